//! Directive execution: each check runs with its own deterministically
//! derived sampler, so the report bytes depend only on (document, seed).

use vlab_core::decompose::{
    chain_diagram, kaplansky_check, perfect_coarsening_scan, ramification_classify,
    standard_decomposition, RamificationClass,
};
use vlab_core::definable::{
    euclidean_check, natural_valuation, order_from_squares, phensel_class_compare,
    sample_square_leaded, verify_scanlon_identity, PClass, ScanlonSet,
};
use vlab_core::hensel::henselianity_spot_check;
use vlab_core::ordgroup::GroupElt;
use vlab_core::tower::expr::eval_str;
use vlab_core::tower::sample::{Profile, Sampler};
use vlab_core::tower::{Tower, Value};
use vlab_core::valuation::{
    finest_common_coarsening, is_convex_wrt_order, JoinCertificate,
    RingComparison, Step, Valuation,
};
use vlab_core::{VlabError, VlabResult};

use crate::specfile::{parse_vexpr_str, realize_valuation, Directive, FieldSpecDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Unsupported,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Unsupported => "UNSUPPORTED",
        }
    }
}

#[derive(Debug)]
pub struct CheckRow {
    pub index: usize,
    pub name: String,
    pub status: Status,
    pub details: Vec<(String, String)>,
}

#[derive(Debug)]
pub struct RunReport {
    pub spec_name: String,
    pub seed: u64,
    pub field: String,
    pub valuation: Option<String>,
    pub rows: Vec<CheckRow>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.status == Status::Fail) {
            1
        } else if self.rows.iter().any(|r| r.status == Status::Unsupported) {
            2
        } else {
            0
        }
    }
}

/// Scale a sample count by the `VLAB_BUDGET` multiplier.
pub fn scaled(n: usize, budget: f64) -> usize {
    ((n as f64) * budget).ceil().max(1.0) as usize
}

pub fn run_checks(
    doc: &FieldSpecDocument,
    spec_name: &str,
    seed_override: Option<u64>,
    budget: f64,
) -> VlabResult<RunReport> {
    let seed = seed_override.unwrap_or(doc.seed);
    let field = crate::specfile::realize_field(&doc.field)?;
    let valuation = match &doc.valuation {
        Some(ve) => Some(realize_valuation(&field, ve)?),
        None => None,
    };
    let mut rows = Vec::new();
    for (i, directive) in doc.checks.iter().enumerate() {
        let index = i + 1;
        let dseed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index as u64);
        let mut sampler = Sampler::new(dseed);
        let row = match run_one(directive, &field, valuation.as_ref(), &mut sampler, budget) {
            Ok((status, details)) => CheckRow {
                index,
                name: directive.name.clone(),
                status,
                details,
            },
            Err(VlabError::Unsupported(msg)) => CheckRow {
                index,
                name: directive.name.clone(),
                status: Status::Unsupported,
                details: vec![("reason".into(), msg)],
            },
            Err(e) => CheckRow {
                index,
                name: directive.name.clone(),
                status: Status::Fail,
                details: vec![("error".into(), format!("{}", e))],
            },
        };
        rows.push(row);
    }
    Ok(RunReport {
        spec_name: spec_name.to_string(),
        seed,
        field: field.name(),
        valuation: valuation
            .as_ref()
            .map(|v| format!("group: {}", v.value_group())),
        rows,
    })
}

type Details = Vec<(String, String)>;

fn need_valuation<'a>(v: Option<&'a Valuation>) -> VlabResult<&'a Valuation> {
    v.ok_or_else(|| VlabError::Domain("this check needs a `valuation = ...` binding".into()))
}

fn expect_arg(d: &Directive) -> &str {
    d.arg("expect").unwrap_or("pass")
}

fn run_one(
    d: &Directive,
    field: &Tower,
    valuation: Option<&Valuation>,
    sampler: &mut Sampler,
    budget: f64,
) -> VlabResult<(Status, Details)> {
    match d.name.as_str() {
        "ultrametric" => {
            let v = need_valuation(valuation)?;
            let n = scaled(d.arg_usize("n", 200), budget);
            let (checked, failures) = ultrametric_suite(field, v, sampler, n)?;
            let status = if failures == 0 { Status::Pass } else { Status::Fail };
            Ok((
                status,
                vec![
                    ("pairs".into(), checked.to_string()),
                    ("failures".into(), failures.to_string()),
                ],
            ))
        }
        "coarsen" => {
            let v = need_valuation(valuation)?;
            let n = scaled(d.arg_usize("n", 200), budget);
            let (subgroups, samples, failures) = coarsen_suite(field, v, sampler, n)?;
            let status = if failures == 0 { Status::Pass } else { Status::Fail };
            Ok((
                status,
                vec![
                    ("subgroups".into(), subgroups.to_string()),
                    ("samples".into(), samples.to_string()),
                    ("failures".into(), failures.to_string()),
                ],
            ))
        }
        "scanlon" => {
            let v = need_valuation(valuation)?;
            let n = scaled(d.arg_usize("n", 100), budget);
            let t_text = d
                .arg("t")
                .ok_or_else(|| VlabError::Domain("scanlon needs t=<expr>".into()))?;
            let t = eval_str(field, t_text)?;
            let stretch = d.arg("stretch") == Some("1");
            let set = ScanlonSet::new(v.clone(), t, stretch)?;
            let report = verify_scanlon_identity(&set, sampler, n)?;
            let agreements = report.samples.len() - report.disagreements;
            let status = if report.disagreements == 0 && report.bad_certificates == 0 {
                Status::Pass
            } else {
                Status::Fail
            };
            Ok((
                status,
                vec![
                    ("samples".into(), report.samples.len().to_string()),
                    ("agreements".into(), agreements.to_string()),
                    (
                        "certificates_verified".into(),
                        (report.samples.len() - report.bad_certificates).to_string(),
                    ),
                ],
            ))
        }
        "decompose" => {
            let v = need_valuation(valuation)?;
            let p = d
                .arg_u64("p")
                .ok_or_else(|| VlabError::Domain("decompose needs p=<prime>".into()))?;
            let n = scaled(d.arg_usize("n", 200), budget);
            let dec = standard_decomposition(v, p)?;
            let compared = dec.verify(v, sampler, n)?;
            let ram = ramification_classify(&dec.v1, p)?;
            Ok((
                Status::Pass,
                vec![
                    ("chain".into(), chain_diagram(&dec)),
                    ("Delta".into(), format!("cut {}", dec.delta.cut())),
                    ("Delta0".into(), format!("cut {}", dec.delta0.cut())),
                    ("Delta_p".into(), format!("cut {}", dec.delta_p.cut())),
                    (
                        "characteristics".into(),
                        format!(
                            "({}, {}, {}, {})",
                            dec.characteristics[0],
                            dec.characteristics[1],
                            dec.characteristics[2],
                            dec.characteristics[3]
                        ),
                    ),
                    ("middle_stage".into(), ram_str(&ram)),
                    ("recomposition_samples".into(), compared.to_string()),
                ],
            ))
        }
        "natural" => {
            let n = scaled(d.arg_usize("n", 200), budget);
            let adversarial = d.arg_usize("adversarial", 0);
            let extra = adversarial_hull_elements(field, adversarial)?;
            let report = natural_valuation(field, sampler, n, &extra)?;
            let status = if report.disagreements == 0 {
                Status::Pass
            } else {
                Status::Fail
            };
            Ok((
                status,
                vec![
                    ("samples".into(), report.samples.len().to_string()),
                    ("adversarial".into(), extra.len().to_string()),
                    ("disagreements".into(), report.disagreements.to_string()),
                ],
            ))
        }
        "euclidean" => {
            let n = scaled(d.arg_usize("n", 200), budget);
            let conditioned = d.arg("sampler") == Some("squares");
            let samples: Vec<Value> = if conditioned {
                sample_square_leaded(field, sampler, n)?
            } else {
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(sampler.sample(field, Profile::NonZero)?);
                }
                out
            };
            let report = euclidean_check(field, &samples)?;
            let passed = report.failure.is_none() && !report.minus_one_is_square;
            let mut details = vec![
                ("decided".into(), report.decided.to_string()),
                (
                    "minus_one_square".into(),
                    report.minus_one_is_square.to_string(),
                ),
            ];
            if let Some(w) = &report.failure {
                details.push(("failure_witness".into(), field.fmt_value(w)));
            }
            if passed {
                let (_, laws) = order_from_squares(field, &samples)?;
                details.push((
                    "order_samples".into(),
                    laws.samples_compared.to_string(),
                ));
                details.push((
                    "order_disagreements".into(),
                    laws.order_disagreements.to_string(),
                ));
                details.push(("law_failures".into(), laws.law_failures.to_string()));
                if laws.order_disagreements > 0 || laws.law_failures > 0 {
                    return Ok((Status::Fail, details));
                }
            }
            let expected_pass = expect_arg(d) == "pass";
            let status = if passed == expected_pass {
                Status::Pass
            } else {
                Status::Fail
            };
            details.push(("euclidean".into(), passed.to_string()));
            Ok((status, details))
        }
        "kaplansky" => {
            let v = need_valuation(valuation)?;
            let p = d
                .arg_u64("p")
                .ok_or_else(|| VlabError::Domain("kaplansky needs p=<prime>".into()))?;
            let n = scaled(d.arg_usize("n", 30), budget);
            let r = kaplansky_check(v, p, sampler, n)?;
            let proxy = match r.residue_as_closed_proxy {
                None => "n/a".to_string(),
                Some(true) => "proxy-true".to_string(),
                Some(false) => "proxy-false".to_string(),
            };
            let verdicts = format!(
                "({}, {}, {})",
                r.group_p_divisible, r.residue_perfect, proxy
            );
            let mut details = vec![("verdicts".into(), verdicts.clone())];
            if let Some(w) = &r.proxy_witness {
                details.push((
                    "proxy_witness".into(),
                    v.residue_field().fmt_value(w),
                ));
            }
            let status = match d.arg("expect") {
                None => Status::Pass,
                Some(e) => {
                    if e == verdicts.replace(' ', "") || e == verdicts {
                        Status::Pass
                    } else {
                        details.push(("expected".into(), e.to_string()));
                        Status::Fail
                    }
                }
            };
            Ok((status, details))
        }
        "independence" => {
            let n = scaled(d.arg_usize("n", 100), budget);
            let (va, vb) = independence_pair(field, d)?;
            let (join, cert) = finest_common_coarsening(&va, &vb, sampler, n)?;
            match cert {
                JoinCertificate::Independence { x, y, splittings } => {
                    let verified = splittings.iter().all(|(r, a, b)| {
                        matches!(
                            (field.add(a, b), va.in_ring(a), vb.in_ring(b)),
                            (Ok(sum), Ok(true), Ok(true)) if field.eq_values(&sum, r)
                        )
                    });
                    let status = if join.is_trivial() && verified {
                        Status::Pass
                    } else {
                        Status::Fail
                    };
                    Ok((
                        status,
                        vec![
                            ("join".into(), "trivial".into()),
                            ("x".into(), field.fmt_value(&x)),
                            ("y".into(), field.fmt_value(&y)),
                            ("splittings".into(), splittings.len().to_string()),
                            ("splittings_verified".into(), verified.to_string()),
                        ],
                    ))
                }
                JoinCertificate::Comparable(cmp) => Ok((
                    Status::Pass,
                    vec![
                        ("join".into(), format!("group: {}", join.value_group())),
                        ("comparable".into(), cmp_str(&cmp)),
                    ],
                )),
            }
        }
        "convex" => {
            let v = need_valuation(valuation)?;
            let n = scaled(d.arg_usize("n", 200), budget);
            let report = is_convex_wrt_order(v, sampler, n)?;
            let status = if report.counterexample.is_none() {
                Status::Pass
            } else {
                Status::Fail
            };
            let mut details = vec![(
                "triples".into(),
                report.triples_checked.to_string(),
            )];
            if let Some((x, y)) = &report.counterexample {
                details.push(("counterexample_x".into(), field.fmt_value(x)));
                details.push(("counterexample_y".into(), field.fmt_value(y)));
            }
            Ok((status, details))
        }
        "phensel" => {
            let p = d
                .arg_u64("p")
                .ok_or_else(|| VlabError::Domain("phensel needs p=<prime>".into()))?;
            let fine_text = d
                .arg("fine")
                .ok_or_else(|| VlabError::Domain("phensel needs fine=<stack>".into()))?;
            let coarse_text = d
                .arg("coarse")
                .ok_or_else(|| VlabError::Domain("phensel needs coarse=<stack>".into()))?;
            let vf = realize_valuation(field, &parse_vexpr_str(fine_text)?)?;
            let vc = realize_valuation(field, &parse_vexpr_str(coarse_text)?)?;
            let report = phensel_class_compare(&vf, &vc, p, sampler)?;
            let status = if report.consistent { Status::Pass } else { Status::Fail };
            Ok((
                status,
                vec![
                    ("class_fine".into(), class_str(&report.class_left)),
                    ("class_coarse".into(), class_str(&report.class_right)),
                    ("comparison".into(), cmp_str(&report.comparison)),
                    ("consistent".into(), report.consistent.to_string()),
                ],
            ))
        }
        "perfectscan" => {
            let v = need_valuation(valuation)?;
            let scan = perfect_coarsening_scan(v)?;
            let mut details = Vec::new();
            for (i, (w, kw, perfect)) in scan.entries.iter().enumerate() {
                details.push((
                    format!("coarsening_{}", i),
                    format!(
                        "group: {} residue: {} perfect: {}",
                        w.value_group(),
                        kw.name(),
                        perfect
                    ),
                ));
            }
            details.push((
                "hypothesis".into(),
                if scan.hypothesis_satisfied {
                    "satisfied".into()
                } else {
                    "violated".into()
                },
            ));
            let expected = d.arg("expect").unwrap_or("satisfied");
            let actual = if scan.hypothesis_satisfied {
                "satisfied"
            } else {
                "violated"
            };
            let status = if expected == actual { Status::Pass } else { Status::Fail };
            Ok((status, details))
        }
        "henselian" => {
            let v = need_valuation(valuation)?;
            let budget_n = scaled(d.arg_usize("budget", 100), budget);
            let report = henselianity_spot_check(v, sampler, budget_n)?;
            let mut details = vec![
                ("attempts".into(), report.attempts.to_string()),
                ("lifted".into(), report.lifted.to_string()),
            ];
            let passed = report.no_counterexample_in_budget;
            if let Some(cex) = &report.counterexample {
                details.push((
                    "counterexample_root".into(),
                    v.residue_field().fmt_value(&cex.residue_root),
                ));
            }
            details.push((
                "verdict".into(),
                if passed {
                    "no-counterexample-in-budget".into()
                } else {
                    "counterexample-found".into()
                },
            ));
            let expected_pass = expect_arg(d) == "pass";
            let status = if passed == expected_pass {
                Status::Pass
            } else {
                Status::Fail
            };
            Ok((status, details))
        }
        "ramify" => {
            let v = need_valuation(valuation)?;
            let p = d
                .arg_u64("p")
                .ok_or_else(|| VlabError::Domain("ramify needs p=<prime>".into()))?;
            let class = if v.value_group().rank() == 1 {
                ramification_classify(v, p)?
            } else {
                let dec = standard_decomposition(v, p)?;
                ramification_classify(&dec.v1, p)?
            };
            let s = ram_str(&class);
            let status = match d.arg("expect") {
                None => Status::Pass,
                Some(e) if e == s => Status::Pass,
                Some(_) => Status::Fail,
            };
            Ok((status, vec![("class".into(), s)]))
        }
        other => Err(VlabError::Domain(format!(
            "unknown check directive {:?}",
            other
        ))),
    }
}

fn ram_str(r: &RamificationClass) -> String {
    match r {
        RamificationClass::Unramified => "unramified".into(),
        RamificationClass::FinitelyRamified { interval_size } => {
            format!("finitely-ramified(m={})", interval_size)
        }
        RamificationClass::PDivisible => "p-divisible".into(),
        RamificationClass::NoneOfThese => "none-of-these".into(),
    }
}

fn cmp_str(c: &RingComparison) -> String {
    match c {
        RingComparison::Equal => "equal".into(),
        RingComparison::LeftFiner => "left-finer".into(),
        RingComparison::RightFiner => "right-finer".into(),
        RingComparison::Incomparable { .. } => "incomparable".into(),
    }
}

fn class_str(c: &PClass) -> String {
    match c {
        PClass::ExtensionExists { .. } => "H1(extension-witnessed)".into(),
        PClass::ClosedProxy => "H2(closed-proxy)".into(),
    }
}

pub fn ultrametric_suite(
    field: &Tower,
    v: &Valuation,
    sampler: &mut Sampler,
    n: usize,
) -> VlabResult<(usize, usize)> {
    let mut checked = 0usize;
    let mut failures = 0usize;
    let mut attempts = 0usize;
    while checked < n && attempts < n * 20 {
        attempts += 1;
        let x = sampler.sample(field, Profile::Any)?;
        let y = sampler.sample(field, Profile::Any)?;
        let (vx, vy) = match (v.eval(&x), v.eval(&y)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let prod = field.mul(&x, &y)?;
        let vp = match v.eval(&prod) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if !vp.eq_elt(&vx.add(&vy)?) {
            failures += 1;
            checked += 1;
            continue;
        }
        let sum = field.add(&x, &y)?;
        if let Ok(vs) = v.eval(&sum) {
            let min = min_elt(&vx, &vy)?;
            if vs.compare(&min)? == std::cmp::Ordering::Less {
                failures += 1;
            } else if !vx.eq_elt(&vy) && !vs.eq_elt(&min) {
                failures += 1;
            }
        }
        checked += 1;
    }
    Ok((checked, failures))
}

fn min_elt(a: &GroupElt, b: &GroupElt) -> VlabResult<GroupElt> {
    Ok(if a.compare(b)? == std::cmp::Ordering::Greater {
        b.clone()
    } else {
        a.clone()
    })
}

pub fn coarsen_suite(
    field: &Tower,
    v: &Valuation,
    sampler: &mut Sampler,
    n: usize,
) -> VlabResult<(usize, usize, usize)> {
    let subgroups = v.value_group().convex_subgroups();
    let mut samples = 0usize;
    let mut failures = 0usize;
    for delta in &subgroups {
        let w = v.coarsen(delta)?;
        let (_, proj) = v.value_group().quotient(delta)?;
        let vbar = v.induced_on_residue(delta)?;
        let recomposed = w.compose(&vbar)?;
        if recomposed != *v {
            failures += 1;
        }
        let mut checked = 0usize;
        let mut attempts = 0usize;
        while checked < n && attempts < n * 20 {
            attempts += 1;
            let x = sampler.sample(field, Profile::Any)?;
            let (ev, ew) = match (v.eval(&x), w.eval(&x)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            if !proj.apply(&ev)?.eq_elt(&ew) {
                failures += 1;
            }
            let er = recomposed.eval(&x)?;
            if !er.eq_elt(&ev) {
                failures += 1;
            }
            checked += 1;
        }
        samples += checked;
    }
    Ok((subgroups.len(), samples, failures))
}

/// Large-integer-part elements near the hull search boundary.
fn adversarial_hull_elements(field: &Tower, n: usize) -> VlabResult<Vec<Value>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let t = match field.layer_view() {
        vlab_core::tower::LayerView::Series { var, .. } => field
            .generator(var)
            .ok_or_else(|| VlabError::Domain("series generator".into()))?,
        _ => return Ok(Vec::new()),
    };
    let mut out = Vec::new();
    let bigs: [i64; 5] = [999_983, 524_287, 999_999, 131_071, 65_521];
    for i in 0..n {
        let c = field.from_i64(bigs[i % bigs.len()] - (i as i64));
        // alternately bounded (big + t) and unbounded (big + t^-1)
        let elt = if i % 2 == 0 {
            field.add(&c, &t)?
        } else {
            let tinv = field.inv(&t)?;
            field.add(&c, &tinv)?
        };
        out.push(elt);
    }
    Ok(out)
}

fn independence_pair(field: &Tower, d: &Directive) -> VlabResult<(Valuation, Valuation)> {
    if let (Some(p), Some(q)) = (d.arg_u64("p"), d.arg_u64("q")) {
        let va = Valuation::structural(field, vec![Step::PrimeOnQ(p)])?;
        let vb = Valuation::structural(field, vec![Step::PrimeOnQ(q)])?;
        return Ok((va, vb));
    }
    if let (Some(pi1), Some(pi2)) = (d.arg("pi1"), d.arg("pi2")) {
        let base = match field.layer_view() {
            vlab_core::tower::LayerView::RatFunc { base, .. } => base.clone(),
            _ => {
                return Err(VlabError::Domain(
                    "pi-adic independence needs a rational function field".into(),
                ))
            }
        };
        let m1 = crate::specfile::poly_from_text(&base, &pi1.replace('_', " "))?;
        let m2 = crate::specfile::poly_from_text(&base, &pi2.replace('_', " "))?;
        let va = Valuation::structural(field, vec![Step::PolyAdic(m1)])?;
        let vb = Valuation::structural(field, vec![Step::PolyAdic(m2)])?;
        return Ok((va, vb));
    }
    Err(VlabError::Domain(
        "independence needs p=..,q=.. (rationals) or pi1=..,pi2=.. (rational functions)".into(),
    ))
}
