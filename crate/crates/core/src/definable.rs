//! Evaluators with machine-checkable certificates for explicitly definable
//! valuation rings: the definable set
//! `S = {a | exists L >= K, [L:K] < p, exists y in L: y^p - a y = t}`,
//! the natural valuation of an ordered field (convex hull of the integers),
//! the sign-from-squares order of Euclidean-style models, and the
//! comparability structure of p-henselian valuations.
//!
//! No certificate is accepted on construction alone: membership witnesses
//! re-verify by substitution, obstructions re-verify by an independent
//! p-th-power computation, hull bounds re-verify by order comparisons.

use num::{BigInt, One, Signed};

use crate::error::{VlabError, VlabResult};
use crate::hensel;
use crate::ordgroup::{GroupElt, Rat};
use crate::tower::sample::{Profile, Sampler};
use crate::tower::{rat_i, Node, Tower, Value};
use crate::valuation::{
    compare_rings, ExtProlongKind, RingComparison, Step, Valuation,
};

// ---------------------------------------------------------------------------
// The S-set of henselian valuations with Artin-Schreier-closed residue
// ---------------------------------------------------------------------------

/// Where the membership witness lives.
#[derive(Debug, Clone)]
pub enum WitnessField {
    /// `L = K` (always the case for p = 2).
    Ground,
    /// A ramified quadratic extension `L = K(b)`, `b^2 = a'` Eisenstein.
    Ramified { field: Tower, valuation: Valuation },
}

/// Machine-checkable certificate for a definable-set claim.
#[derive(Debug, Clone)]
pub enum Certificate {
    /// `y^p - a y = t` holds at precision in the witness field.
    Membership {
        witness_field: WitnessField,
        y: Value,
        residual_valuation: GroupElt,
        required: Rat,
    },
    /// `v(a) > 0` would force a residue equation `ybar^p = tbar` in a
    /// degree < p extension of the residue field, impossible because `tbar`
    /// is not a p-th power there.
    Obstruction { tbar: Value, degree_bound: u64 },
    /// `x` and `-x` are below the integer bound in the field order.
    ConvexHullBound { bound: BigInt },
    /// `x` exceeds every integer up to the sampling bound; structurally, the
    /// leading exponent is negative.
    ConvexHullObstruction {
        checked_up_to: BigInt,
        lead_exponent: Rat,
    },
    /// Sign decided by exhibiting a square root of `x` or of `-x`.
    SignWitness { root_of: i8, root: Value },
}

/// Fixed data of the S-set instance: a henselian structural valuation whose
/// residue field is a materialized Artin-Schreier closure, and a parameter
/// `t` in the valuation ring whose residue is not a p-th power.
pub struct ScanlonSet {
    v: Valuation,
    t: Value,
    p: u64,
    /// Enables the ramified-quadratic path for p = 3.
    allow_stretch: bool,
}

impl ScanlonSet {
    pub fn new(v: Valuation, t: Value, allow_stretch: bool) -> VlabResult<ScanlonSet> {
        let k = v.domain();
        let kv = v.residue_field();
        if !kv.is_as_closure() {
            return Err(VlabError::Domain(
                "the S-set instance needs an Artin-Schreier-closed residue field".into(),
            ));
        }
        let p = kv.characteristic();
        if kv.as_closure_prime() != Some(p) {
            return Err(VlabError::Domain(
                "the residue closure prime must be the residue characteristic".into(),
            ));
        }
        if p != 2 && !(p == 3 && allow_stretch) {
            return Err(VlabError::Unsupported(
                "supported primes: 2 (primary), 3 (stretch, behind the flag)".into(),
            ));
        }
        if k.characteristic() != p {
            return Err(VlabError::Unsupported(
                "equicharacteristic instances only".into(),
            ));
        }
        if !v.in_ring(&t)? {
            return Err(VlabError::Domain("t must lie in the valuation ring".into()));
        }
        let tbar = v.residue(&t)?;
        if kv.has_pth_root(&tbar)?.is_some() {
            return Err(VlabError::Domain(
                "the residue of t must not be a p-th power".into(),
            ));
        }
        Ok(ScanlonSet {
            v,
            t,
            p,
            allow_stretch,
        })
    }

    pub fn valuation(&self) -> &Valuation {
        &self.v
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// Decide membership of `a` in S with a certificate, following the
    /// constructive proof: for `v(a) <= 0` adjoin `b` with `b^(p-1) = a`,
    /// solve the Artin-Schreier residue equation, Hensel-lift, return
    /// `y = z b`; for `v(a) > 0` return the residue obstruction.
    pub fn membership(&self, a: &Value) -> VlabResult<(bool, Certificate)> {
        let k = self.v.domain().clone();
        let va = self.v.eval(a)?;
        if va.is_infinite() || va.is_positive() {
            let tbar = self.v.residue(&self.t)?;
            return Ok((
                false,
                Certificate::Obstruction {
                    tbar,
                    degree_bound: self.p - 1,
                },
            ));
        }
        // b with b^(p-1) = a
        let (witness_field, b, lift_cap) = self.choose_b(a)?;
        let (lf, lv) = match &witness_field {
            WitnessField::Ground => (k.clone(), self.v.clone()),
            WitnessField::Ramified { field, valuation } => (field.clone(), valuation.clone()),
        };
        // c = t / (b a) over O_w
        let (a_l, t_l) = match &witness_field {
            WitnessField::Ground => (a.clone(), self.t.clone()),
            WitnessField::Ramified { field, .. } => {
                (field.embed_scalar(a.clone()), field.embed_scalar(self.t.clone()))
            }
        };
        let ba = lf.mul(&b, &a_l)?;
        let c = lf.div(&t_l, &ba)?;
        if !lv.in_ring(&c)? {
            return Err(VlabError::Domain(
                "internal: t/(ba) fell outside the valuation ring".into(),
            ));
        }
        // Artin-Schreier on the residue, then Hensel in L
        let cbar = lv.residue(&c)?;
        let z0bar = hensel::artin_schreier_solve(lv.residue_field(), &cbar)?;
        let z0 = hensel::lift_residue(&lv, &z0bar)?;
        // f(Z) = Z^p - Z - c
        let mut f = vec![lf.zero(); self.p as usize + 1];
        f[0] = lf.neg(&c)?;
        f[1] = lf.from_i64(-1);
        f[self.p as usize] = lf.one();
        let report = hensel::hensel_lift(&lv, &f, &z0, Some(lift_cap.clone()))?;
        if !report.converged {
            return Err(VlabError::PrecisionCapReached);
        }
        let y = lf.mul(&report.root, &b)?;
        // verify: y^p - a y - t = 0 at the cap
        let residual = {
            let yp = lf.pow_i64(&y, self.p as i64)?;
            let ay = lf.mul(&a_l, &y)?;
            lf.sub(&lf.sub(&yp, &ay)?, &t_l)?
        };
        let rv = lv.eval(&residual)?;
        let required = self.cap()?;
        if !rv.is_infinite() && rv.coords()[0] < required {
            return Err(VlabError::Domain(format!(
                "internal: witness residual {} below the cap {}",
                rv, required
            )));
        }
        Ok((
            true,
            Certificate::Membership {
                witness_field,
                y,
                residual_valuation: rv,
                required,
            },
        ))
    }

    /// The precision cap used by certificates: the stored-precision window of
    /// the ground field.
    pub fn cap(&self) -> VlabResult<Rat> {
        hensel::default_target(self.v.domain())
    }

    fn choose_b(&self, a: &Value) -> VlabResult<(WitnessField, Value, Rat)> {
        let k = self.v.domain().clone();
        let cap = self.cap()?;
        if self.p == 2 {
            // b = a, L = K
            let va = self.v.eval(a)?.coords()[0].clone();
            // residual of the y-equation is a^2 * f(z): lift deeper when a
            // has negative valuation
            let lift_cap = &cap - (va.clone() + va) * rat_i(1);
            return Ok((WitnessField::Ground, a.clone(), lift_cap));
        }
        // p = 3 stretch: b^2 = a
        if !self.allow_stretch {
            return Err(VlabError::Unsupported("stretch path is disabled".into()));
        }
        let va = self.v.eval(a)?.coords()[0].clone();
        let vai = va.to_integer();
        let two = BigInt::from(2);
        // try a square root inside K first
        match k.sqrt_in_field(a) {
            Ok(Some(b)) => {
                let vab = {
                    let vb = va.clone() / rat_i(2);
                    va.clone() + vb
                };
                let lift_cap = &cap - vab;
                return Ok((WitnessField::Ground, b, lift_cap));
            }
            Ok(None) | Err(VlabError::Unsupported(_)) => {}
            Err(e) => return Err(e),
        }
        if (&vai % &two) == BigInt::one() || (&vai % &two) == BigInt::from(-1) {
            // a = s^(2m) a' with v(a') = 1: adjoin b' with b'^2 = a'
            let m: i64 = ((&vai - BigInt::one()) / &two).try_into().unwrap_or(0);
            let s_uni = self
                .v
                .uniformizer()
                .ok_or_else(|| VlabError::Unsupported("no uniformizer".into()))?;
            let shift = k.pow_i64(&s_uni, -2 * m)?;
            let a_prime = k.mul(a, &shift)?;
            let modulus = vec![k.neg(&a_prime)?, k.zero(), k.one()];
            let crate::tower::Adjoined::Extended { field, root } =
                k.adjoin_root(&modulus, "b")?
            else {
                return Err(VlabError::Unsupported(
                    "X^2 - a' unexpectedly reducible in the stretch path".into(),
                ));
            };
            let w = Valuation::structural(
                &field,
                vec![Step::ExtProlong(ExtProlongKind::Eisenstein { e: 2 })],
            )?;
            // b = s^m * root in L
            let s_l = field.embed_scalar(s_uni.clone());
            let b = field.mul(&field.pow_i64(&s_l, m)?, &root)?;
            let vab = va.clone() + va / rat_i(2);
            let lift_cap = &cap - vab;
            return Ok((
                WitnessField::Ramified {
                    field,
                    valuation: w,
                },
                b,
                lift_cap,
            ));
        }
        Err(VlabError::Unsupported(
            "stretch path needs a square in K or odd valuation".into(),
        ))
    }

    /// Independent re-verification of a certificate against a claim about `a`.
    pub fn verify_certificate(&self, a: &Value, cert: &Certificate) -> VlabResult<bool> {
        match cert {
            Certificate::Membership {
                witness_field,
                y,
                required,
                ..
            } => {
                let (lf, lv, a_l, t_l) = match witness_field {
                    WitnessField::Ground => (
                        self.v.domain().clone(),
                        self.v.clone(),
                        a.clone(),
                        self.t.clone(),
                    ),
                    WitnessField::Ramified { field, valuation } => (
                        field.clone(),
                        valuation.clone(),
                        field.embed_scalar(a.clone()),
                        field.embed_scalar(self.t.clone()),
                    ),
                };
                let residual = {
                    let yp = lf.pow_i64(y, self.p as i64)?;
                    let ay = lf.mul(&a_l, y)?;
                    lf.sub(&lf.sub(&yp, &ay)?, &t_l)?
                };
                let rv = lv.eval(&residual)?;
                Ok(rv.is_infinite() || rv.coords()[0] >= *required)
            }
            Certificate::Obstruction { tbar, degree_bound } => {
                let kv = self.v.residue_field();
                let recomputed = self.v.residue(&self.t)?;
                if !kv.eq_values(&recomputed, tbar) {
                    return Ok(false);
                }
                Ok(*degree_bound < self.p && kv.has_pth_root(tbar)?.is_none())
            }
            _ => Err(VlabError::Domain(
                "certificate kind does not match the S-set claim".into(),
            )),
        }
    }
}

/// One row of the identity check: sampled `a`, claimed membership, the sign
/// criterion `v(a) <= 0`, certificate verification.
#[derive(Debug)]
pub struct ScanlonSample {
    pub a: Value,
    pub member: bool,
    pub v_nonpositive: bool,
    pub certificate_ok: bool,
}

#[derive(Debug)]
pub struct ScanlonReport {
    pub samples: Vec<ScanlonSample>,
    pub disagreements: usize,
    pub bad_certificates: usize,
}

/// Check `membership(a) <=> v(a) <= 0` on `n` seeded samples spanning
/// `v(a)` in `[-3, 3]`, re-verifying every certificate.
pub fn verify_scanlon_identity(
    set: &ScanlonSet,
    sampler: &mut Sampler,
    n: usize,
) -> VlabResult<ScanlonReport> {
    let mut samples = Vec::with_capacity(n);
    let mut disagreements = 0usize;
    let mut bad_certificates = 0usize;
    for i in 0..n {
        let lead = (i as i64 % 7) - 3; // spans -3..=3
        let a = scanlon_sample(set.valuation().domain(), sampler, lead)?;
        let va = set.valuation().eval(&a)?;
        let v_nonpositive = !va.is_infinite() && !va.is_positive();
        let (member, cert) = set.membership(&a)?;
        let certificate_ok = set.verify_certificate(&a, &cert)?;
        if member != v_nonpositive {
            disagreements += 1;
        }
        if !certificate_ok {
            bad_certificates += 1;
        }
        samples.push(ScanlonSample {
            a,
            member,
            v_nonpositive,
            certificate_ok,
        });
    }
    Ok(ScanlonReport {
        samples,
        disagreements,
        bad_certificates,
    })
}

/// Sample `a = s^lead * unit` where the unit's residue is drawn from a small
/// pool of base-level elements of the closure (keeps the materialized tower
/// at desk scale while spanning the full valuation range).
pub fn scanlon_sample(k: &Tower, sampler: &mut Sampler, lead: i64) -> VlabResult<Value> {
    let (kv, var) = match &*k.0 {
        Node::Series { base, var, .. } => (base.clone(), var.clone()),
        _ => {
            return Err(VlabError::Domain(
                "the S-set instance lives on a series field".into(),
            ))
        }
    };
    // residue pool: base-level rational functions in u
    let pool = [
        "1", "u", "u + 1", "u^2", "u^2 + u + 1", "1/u", "u/(u + 1)", "u + 1 + 1/u",
    ];
    let pick = pool[sampler.sample_range(0, pool.len() as i64 - 1) as usize];
    let r = crate::tower::expr::eval_str(&kv, pick)?;
    let unit0 = k.embed_scalar(r);
    // small tail above the unit
    let t_gen = k.generator(&var).expect("series generator");
    let mut unit = unit0;
    for d in 1..=2i64 {
        if sampler.sample_range(0, 1) == 1 {
            let pick2 = pool[sampler.sample_range(0, pool.len() as i64 - 1) as usize];
            let c = crate::tower::expr::eval_str(&kv, pick2)?;
            let term = k.mul(&k.embed_scalar(c), &k.pow_i64(&t_gen, d)?)?;
            unit = k.add(&unit, &term)?;
        }
    }
    let shift = k.pow_i64(&t_gen, lead)?;
    k.mul(&unit, &shift)
}

// ---------------------------------------------------------------------------
// Natural valuation: the convex hull of the integers
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct HullSample {
    pub x: Value,
    pub in_hull: bool,
    pub structural_in_ring: bool,
    pub certificate: Certificate,
}

#[derive(Debug)]
pub struct NaturalValuationReport {
    pub valuation: Valuation,
    pub samples: Vec<HullSample>,
    pub disagreements: usize,
}

/// Integer bound for hull membership searches.
const HULL_SEARCH_BOUND: i64 = 1_000_000;

/// The natural valuation of an ordered series model: the full structural
/// stack, whose ring is certified sample-by-sample to equal the convex hull
/// of the integers (membership bounds by doubling search, non-membership by
/// exceeding every integer up to the bound plus the structural negative
/// leading exponent).
pub fn natural_valuation(
    k: &Tower,
    sampler: &mut Sampler,
    n: usize,
    extra: &[Value],
) -> VlabResult<NaturalValuationReport> {
    if !k.orderable() {
        return Err(VlabError::NotOrderable);
    }
    let v = Valuation::full_stack(k)?;
    let mut samples = Vec::new();
    let mut disagreements = 0usize;
    let mut pending: Vec<Value> = extra.to_vec();
    while samples.len() < n + extra.len() {
        let x = if let Some(x) = pending.pop() {
            x
        } else {
            sampler.sample(k, Profile::Any)?
        };
        let structural_in_ring = match v.in_ring(&x) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let (in_hull, certificate) = match hull_membership(k, &x) {
            Ok(r) => r,
            Err(VlabError::PrecisionExhausted(_)) => continue,
            Err(e) => return Err(e),
        };
        if in_hull != structural_in_ring {
            disagreements += 1;
        }
        samples.push(HullSample {
            x,
            in_hull,
            structural_in_ring,
            certificate,
        });
    }
    Ok(NaturalValuationReport {
        valuation: v,
        samples,
        disagreements,
    })
}

/// Hull membership by doubling search: `x, -x < n` for some integer
/// `n <= 10^6`, else the obstruction with the leading-exponent witness.
pub fn hull_membership(k: &Tower, x: &Value) -> VlabResult<(bool, Certificate)> {
    let mut bound: i64 = 1;
    loop {
        let nb = k.from_i64(bound);
        let below = k.lt_order(x, &nb)?;
        let neg_below = {
            let mx = k.neg(x)?;
            k.lt_order(&mx, &nb)?
        };
        if below && neg_below {
            return Ok((
                true,
                Certificate::ConvexHullBound {
                    bound: BigInt::from(bound),
                },
            ));
        }
        if bound >= HULL_SEARCH_BOUND {
            // structural witness: negative leading exponent
            let lead = match x {
                Value::Ser(s) => s
                    .terms
                    .first()
                    .map(|(e, _)| e.clone())
                    .unwrap_or_else(|| rat_i(0)),
                _ => rat_i(0),
            };
            return Ok((
                false,
                Certificate::ConvexHullObstruction {
                    checked_up_to: BigInt::from(HULL_SEARCH_BOUND),
                    lead_exponent: lead,
                },
            ));
        }
        bound = bound.saturating_mul(2).min(HULL_SEARCH_BOUND);
    }
}

/// Re-verify a hull certificate by independent order comparisons.
pub fn verify_hull_certificate(k: &Tower, x: &Value, cert: &Certificate) -> VlabResult<bool> {
    match cert {
        Certificate::ConvexHullBound { bound } => {
            let b: i64 = bound.try_into().unwrap_or(i64::MAX);
            let nb = k.from_i64(b);
            let mx = k.neg(x)?;
            Ok(k.lt_order(x, &nb)? && k.lt_order(&mx, &nb)?)
        }
        Certificate::ConvexHullObstruction { lead_exponent, .. } => {
            // the element or its negative clears the top of the search range;
            // structurally the leading exponent must be negative
            let top = k.from_i64(HULL_SEARCH_BOUND);
            let mx = k.neg(x)?;
            let exceeds = !k.lt_order(x, &top)? || !k.lt_order(&mx, &top)?;
            Ok(exceeds && lead_exponent.is_negative())
        }
        _ => Err(VlabError::Domain("not a hull certificate".into())),
    }
}

// ---------------------------------------------------------------------------
// Euclidean sign-from-squares
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct EuclideanReport {
    /// Samples where exactly one of `a, -a` was a square.
    pub decided: usize,
    /// A sample where the dichotomy failed, if any.
    pub failure: Option<Value>,
    pub minus_one_is_square: bool,
}

/// Check "exactly one of `a`, `-a` is a square and `-1` is not" on the given
/// samples.
pub fn euclidean_check(k: &Tower, samples: &[Value]) -> VlabResult<EuclideanReport> {
    let minus_one = k.from_i64(-1);
    let minus_one_is_square = matches!(k.sqrt_in_field(&minus_one), Ok(Some(_)));
    let mut decided = 0usize;
    let mut failure = None;
    for a in samples {
        if k.is_zero_at_precision(a) {
            continue;
        }
        let pos = matches!(k.sqrt_in_field(a), Ok(Some(_)));
        let neg = {
            let ma = k.neg(a)?;
            matches!(k.sqrt_in_field(&ma), Ok(Some(_)))
        };
        if pos ^ neg {
            decided += 1;
        } else if failure.is_none() {
            failure = Some(a.clone());
        }
    }
    Ok(EuclideanReport {
        decided,
        failure,
        minus_one_is_square,
    })
}

/// The sign rule induced by squares: positive iff a square.
pub struct InducedOrder;

impl InducedOrder {
    pub fn sign(&self, k: &Tower, a: &Value) -> VlabResult<Option<(i8, Certificate)>> {
        if k.is_zero_at_precision(a) {
            return Ok(None);
        }
        if let Some(r) = k.sqrt_in_field(a)? {
            return Ok(Some((1, Certificate::SignWitness { root_of: 1, root: r })));
        }
        let ma = k.neg(a)?;
        if let Some(r) = k.sqrt_in_field(&ma)? {
            return Ok(Some((-1, Certificate::SignWitness { root_of: -1, root: r })));
        }
        Ok(None)
    }
}

#[derive(Debug)]
pub struct OrderFromSquaresReport {
    pub samples_compared: usize,
    /// Disagreements between the induced sign and the declared order.
    pub order_disagreements: usize,
    /// Failures of multiplicativity or positivity-closure on sample pairs.
    pub law_failures: usize,
}

/// When the Euclidean check passes on a model, derive the sign rule and
/// verify on samples that it is a field order agreeing with the declared
/// (leading-coefficient) order.
pub fn order_from_squares(
    k: &Tower,
    samples: &[Value],
) -> VlabResult<(InducedOrder, OrderFromSquaresReport)> {
    let order = InducedOrder;
    let mut compared = 0usize;
    let mut order_disagreements = 0usize;
    let mut law_failures = 0usize;
    let declared_sign = |x: &Value| -> VlabResult<Option<i8>> {
        if !k.orderable() {
            return Ok(None);
        }
        Ok(Some(k.sign_exact(x)?))
    };
    for pair in samples.chunks(2) {
        let a = &pair[0];
        let Some((sa, _)) = order.sign(k, a)? else {
            continue;
        };
        compared += 1;
        if let Some(da) = declared_sign(a)? {
            if da != 0 && da != sa {
                order_disagreements += 1;
            }
        }
        if pair.len() == 2 {
            let b = &pair[1];
            if let Some((sb, _)) = order.sign(k, b)? {
                // multiplicativity
                let ab = k.mul(a, b)?;
                if let Some((sab, _)) = order.sign(k, &ab)? {
                    if sab != sa * sb {
                        law_failures += 1;
                    }
                }
                // positives closed under addition
                if sa > 0 && sb > 0 {
                    let sum = k.add(a, b)?;
                    match order.sign(k, &sum)? {
                        Some((1, _)) | None => {}
                        Some((_, _)) => law_failures += 1,
                    }
                }
            }
        }
    }
    Ok((
        order,
        OrderFromSquaresReport {
            samples_compared: compared,
            order_disagreements,
            law_failures,
        },
    ))
}

/// Samples with square leading coefficients (the fragment of a truncated
/// Puiseux model on which the sign-from-squares dichotomy is total).
pub fn sample_square_leaded(
    k: &Tower,
    sampler: &mut Sampler,
    n: usize,
) -> VlabResult<Vec<Value>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sampler.sample(k, Profile::NonZero)?;
        // scale to make the leading coefficient +-(square)
        let scaled = match &x {
            Value::Ser(s) => match s.terms.first() {
                Some((_, c0)) => {
                    let base = k.base().expect("series base");
                    let c2 = base.mul(c0, c0)?;
                    let fix = base.div(&c2, c0)?; // = c0, kept for clarity
                    let _ = fix;
                    let scale = k.embed_scalar(base.div(&c2, &base.mul(c0, &base.one())?)?);
                    let y = k.mul(&x, &scale)?; // leading coeff becomes c0^2
                    if sampler.sample_range(0, 1) == 1 {
                        k.neg(&y)?
                    } else {
                        y
                    }
                }
                None => x.clone(),
            },
            _ => x.clone(),
        };
        out.push(scaled);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// p-henselian class comparability
// ---------------------------------------------------------------------------

/// Desk-scale proxy for whether a residue field admits a Galois p-extension.
#[derive(Debug, Clone)]
pub enum PClass {
    /// The residue field has a degree-p extension witness: an unsolvable
    /// Artin-Schreier right-hand side (char p) or a non-square (p = 2).
    ExtensionExists { witness: Value, kind: PWitnessKind },
    /// Proxy: the residue field is a materialized Artin-Schreier closure for
    /// this p, so the represented fragment has no such extension.
    ClosedProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PWitnessKind {
    /// `z^p - z = witness` has no root (finite: trace test; function/series
    /// fields: pole of order prime to p).
    ArtinSchreierUnsolvable,
    /// `witness` is not a square (p = 2, characteristic != 2).
    NonSquare,
}

/// Compute and verify the class annotation of a residue field.
pub fn annotate_p_class(kv: &Tower, p: u64) -> VlabResult<PClass> {
    if kv.is_as_closure() && kv.as_closure_prime() == Some(p) {
        return Ok(PClass::ClosedProxy);
    }
    let ch = kv.characteristic();
    if ch == p {
        // Artin-Schreier witness
        if kv.finite_order().is_some() {
            for c in kv.enumerate_finite().into_iter().flatten() {
                if crate::tower::frob::as_solve_finite_tower(kv, &c, p)?.is_none() {
                    return Ok(PClass::ExtensionExists {
                        witness: c,
                        kind: PWitnessKind::ArtinSchreierUnsolvable,
                    });
                }
            }
            return Err(VlabError::MissingAnnotation(
                "finite field unexpectedly Artin-Schreier closed".into(),
            ));
        }
        // function-field or series model: an element with a pole of order
        // prime to p is certifiably outside the image of z^p - z
        match &*kv.0 {
            Node::RatFunc { .. } => {
                let u = kv
                    .generator(match &*kv.0 {
                        Node::RatFunc { var, .. } => var,
                        _ => unreachable!(),
                    })
                    .expect("ratfunc generator");
                let w = kv.inv(&u)?;
                return Ok(PClass::ExtensionExists {
                    witness: w,
                    kind: PWitnessKind::ArtinSchreierUnsolvable,
                });
            }
            Node::Series { var, .. } => {
                let t = kv.generator(var).expect("series generator");
                let w = kv.inv(&t)?;
                return Ok(PClass::ExtensionExists {
                    witness: w,
                    kind: PWitnessKind::ArtinSchreierUnsolvable,
                });
            }
            _ => {}
        }
        return Err(VlabError::MissingAnnotation(format!(
            "no Artin-Schreier witness rule for {}",
            kv
        )));
    }
    if p == 2 {
        // non-square witness
        if kv.finite_order().is_some() {
            for c in kv.enumerate_finite().into_iter().flatten() {
                if kv.is_zero(&c) {
                    continue;
                }
                if kv.sqrt_in_field(&c)?.is_none() {
                    return Ok(PClass::ExtensionExists {
                        witness: c,
                        kind: PWitnessKind::NonSquare,
                    });
                }
            }
            return Err(VlabError::MissingAnnotation(
                "odd finite field without non-squares is impossible".into(),
            ));
        }
        match &*kv.0 {
            Node::Rationals => {
                return Ok(PClass::ExtensionExists {
                    witness: kv.from_i64(2),
                    kind: PWitnessKind::NonSquare,
                })
            }
            Node::PAdic { p: q, .. } => {
                return Ok(PClass::ExtensionExists {
                    witness: kv.from_i64(*q as i64),
                    kind: PWitnessKind::NonSquare,
                })
            }
            _ => {}
        }
    }
    Err(VlabError::MissingAnnotation(format!(
        "no class annotation rule for {} at p = {}",
        kv, p
    )))
}

/// Verify a class witness independently.
pub fn verify_p_witness(kv: &Tower, p: u64, class: &PClass) -> VlabResult<bool> {
    match class {
        PClass::ClosedProxy => Ok(kv.is_as_closure() && kv.as_closure_prime() == Some(p)),
        PClass::ExtensionExists { witness, kind } => match kind {
            PWitnessKind::ArtinSchreierUnsolvable => {
                if kv.finite_order().is_some() {
                    return Ok(crate::tower::frob::as_solve_finite_tower(kv, witness, p)?
                        .is_none());
                }
                // the ultrametric argument: v(z^p - z) is either >= 0 or a
                // negative multiple of p, so a pole of order prime to p is
                // out of reach
                let v = Valuation::full_stack(kv).ok().or_else(|| {
                    match &*kv.0 {
                        Node::RatFunc { base, .. } => {
                            let pi = vec![base.zero(), base.one()];
                            Valuation::structural(kv, vec![Step::PolyAdic(pi)]).ok()
                        }
                        _ => None,
                    }
                });
                let Some(v) = v else {
                    return Ok(false);
                };
                let val = v.eval(witness)?;
                if val.is_infinite() || val.is_nonnegative() {
                    return Ok(false);
                }
                let lead = val.coords()[0].clone();
                let pr = rat_i(p as i64);
                Ok(!(lead / pr).is_integer())
            }
            PWitnessKind::NonSquare => Ok(kv.sqrt_in_field(witness)?.is_none()),
        },
    }
}

#[derive(Debug)]
pub struct PhenselCompareReport {
    pub class_left: PClass,
    pub class_right: PClass,
    pub comparison: RingComparison,
    /// Whether the observed comparison matches the expected structure (two
    /// extension-witnessed valuations are comparable; a closed-proxy one is
    /// finer than an extension-witnessed one). A mismatch refutes the proxy
    /// annotation, not the underlying structure theory.
    pub consistent: bool,
}

/// Classify two p-henselian-flagged valuations by their residue fields and
/// check the expected comparability facts.
pub fn phensel_class_compare(
    v: &Valuation,
    w: &Valuation,
    p: u64,
    sampler: &mut Sampler,
) -> VlabResult<PhenselCompareReport> {
    let class_left = annotate_p_class(v.residue_field(), p)?;
    let class_right = annotate_p_class(w.residue_field(), p)?;
    if !verify_p_witness(v.residue_field(), p, &class_left)?
        || !verify_p_witness(w.residue_field(), p, &class_right)?
    {
        return Err(VlabError::MissingAnnotation(
            "a class witness failed its re-verification".into(),
        ));
    }
    let comparison = compare_rings(v, w, sampler)?;
    let consistent = match (&class_left, &class_right, &comparison) {
        // two residue-extension-witnessed valuations must be comparable
        (
            PClass::ExtensionExists { .. },
            PClass::ExtensionExists { .. },
            RingComparison::Incomparable { .. },
        ) => false,
        (PClass::ExtensionExists { .. }, PClass::ExtensionExists { .. }, _) => true,
        // a closed-residue valuation is finer than an extension-witnessed one
        (PClass::ClosedProxy, PClass::ExtensionExists { .. }, cmp) => {
            matches!(cmp, RingComparison::LeftFiner)
        }
        (PClass::ExtensionExists { .. }, PClass::ClosedProxy, cmp) => {
            matches!(cmp, RingComparison::RightFiner)
        }
        // two closed ones are comparable as well
        (PClass::ClosedProxy, PClass::ClosedProxy, cmp) => {
            !matches!(cmp, RingComparison::Incomparable { .. })
        }
    };
    Ok(PhenselCompareReport {
        class_left,
        class_right,
        comparison,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::expr::eval_str;

    fn scanlon_instance() -> (Tower, ScanlonSet) {
        let f2 = Tower::finite_field(2, 1).unwrap();
        let f2u = Tower::rat_func(&f2, "u").unwrap();
        let kres = Tower::as_closure(&f2u, 2).unwrap();
        let k = Tower::laurent(&kres, "s", 8).unwrap();
        let v = Valuation::full_stack(&k).unwrap();
        let t = k.generator("u").map(|_| ()).and(Some(())).unwrap();
        let _ = t;
        let t = eval_str(&k, "u").unwrap();
        let set = ScanlonSet::new(v, t, false).unwrap();
        (k, set)
    }

    #[test]
    fn scanlon_examples() {
        let (k, set) = scanlon_instance();
        // a = s^-1: member with a verified witness
        let a = eval_str(&k, "s^-1").unwrap();
        let (m, cert) = set.membership(&a).unwrap();
        assert!(m);
        assert!(set.verify_certificate(&a, &cert).unwrap());
        match &cert {
            Certificate::Membership { witness_field, residual_valuation, required, .. } => {
                assert!(matches!(witness_field, WitnessField::Ground));
                assert!(
                    residual_valuation.is_infinite()
                        || residual_valuation.coords()[0] >= *required
                );
            }
            _ => panic!("membership certificate expected"),
        }
        // a = 1: member via the plain Artin-Schreier + lift path
        let one = k.one();
        let (m1, c1) = set.membership(&one).unwrap();
        assert!(m1);
        assert!(set.verify_certificate(&one, &c1).unwrap());
        // a = s: obstruction, u is not a square in the residue closure
        let s = eval_str(&k, "s").unwrap();
        let (m2, c2) = set.membership(&s).unwrap();
        assert!(!m2);
        assert!(set.verify_certificate(&s, &c2).unwrap());
        match &c2 {
            Certificate::Obstruction { degree_bound, .. } => assert_eq!(*degree_bound, 1),
            _ => panic!("obstruction certificate expected"),
        }
    }

    #[test]
    fn scanlon_identity_on_samples() {
        let (_, set) = scanlon_instance();
        let mut s = Sampler::new(42);
        let report = verify_scanlon_identity(&set, &mut s, 40).unwrap();
        assert_eq!(report.disagreements, 0);
        assert_eq!(report.bad_certificates, 0);
        // the sample plan covers both signs of v(a)
        assert!(report.samples.iter().any(|r| r.member));
        assert!(report.samples.iter().any(|r| !r.member));
    }

    #[test]
    fn scanlon_rejects_bad_instances() {
        // residue field not a closure
        let f2 = Tower::finite_field(2, 1).unwrap();
        let f2u = Tower::rat_func(&f2, "u").unwrap();
        let k = Tower::laurent(&f2u, "s", 8).unwrap();
        let v = Valuation::full_stack(&k).unwrap();
        let t = eval_str(&k, "u").unwrap();
        assert!(ScanlonSet::new(v, t, false).is_err());
        // t whose residue is a square
        let f2u2 = Tower::rat_func(&f2, "u").unwrap();
        let kres = Tower::as_closure(&f2u2, 2).unwrap();
        let k2 = Tower::laurent(&kres, "s", 8).unwrap();
        let v2 = Valuation::full_stack(&k2).unwrap();
        let t2 = eval_str(&k2, "u^2").unwrap();
        assert!(ScanlonSet::new(v2, t2, false).is_err());
    }

    #[test]
    fn natural_valuation_matches_hull() {
        let q = Tower::rationals();
        let k = Tower::laurent(&q, "t", 6).unwrap();
        let mut s = Sampler::new(7);
        // x = 3 + t: in the hull with bound 4 (doubling search)
        let x = eval_str(&k, "3 + t").unwrap();
        let (inh, cert) = hull_membership(&k, &x).unwrap();
        assert!(inh);
        match &cert {
            Certificate::ConvexHullBound { bound } => assert_eq!(*bound, BigInt::from(4)),
            _ => panic!("bound certificate expected"),
        }
        assert!(verify_hull_certificate(&k, &x, &cert).unwrap());
        // x = t^-1: infinite element
        let y = eval_str(&k, "t^-1").unwrap();
        let (inh2, cert2) = hull_membership(&k, &y).unwrap();
        assert!(!inh2);
        assert!(verify_hull_certificate(&k, &y, &cert2).unwrap());
        // ring equality on samples
        let report = natural_valuation(&k, &mut s, 60, &[]).unwrap();
        assert_eq!(report.disagreements, 0);
    }

    #[test]
    fn euclidean_checks() {
        // F_5 fails: 2 and -2 = 3 are both non-squares
        let f5 = Tower::finite_field(5, 1).unwrap();
        let all: Vec<Value> = f5.enumerate_finite().unwrap();
        let report = euclidean_check(&f5, &all).unwrap();
        assert!(report.failure.is_some());
        // the ordered Laurent model fails at a = t
        let q = Tower::rationals();
        let k = Tower::laurent(&q, "t", 6).unwrap();
        let t = k.generator("t").unwrap();
        let r2 = euclidean_check(&k, &[t]).unwrap();
        assert!(r2.failure.is_some());
        // square-leaded Puiseux samples pass and induce the declared order
        let pk = Tower::puiseux(&q, "t", 6).unwrap();
        let mut s = Sampler::new(5);
        let samples = sample_square_leaded(&pk, &mut s, 60).unwrap();
        let r3 = euclidean_check(&pk, &samples).unwrap();
        assert!(r3.failure.is_none(), "failed at {:?}", r3.failure);
        assert!(!r3.minus_one_is_square);
        assert!(r3.decided > 0);
        let (_, laws) = order_from_squares(&pk, &samples).unwrap();
        assert_eq!(laws.order_disagreements, 0);
        assert_eq!(laws.law_failures, 0);
        assert!(laws.samples_compared > 0);
    }

    #[test]
    fn phensel_comparability() {
        // F_3((s))((t)) with p = 3: t-adic vs the composed stack
        let f3 = Tower::finite_field(3, 1).unwrap();
        let f3s = Tower::laurent(&f3, "s", 6).unwrap();
        let k = Tower::laurent(&f3s, "t", 6).unwrap();
        let v_t = Valuation::structural(&k, vec![Step::SeriesAdic]).unwrap();
        let v_ts = Valuation::full_stack(&k).unwrap();
        let mut s = Sampler::new(3);
        let report = phensel_class_compare(&v_ts, &v_t, 3, &mut s).unwrap();
        assert!(report.consistent);
        assert!(matches!(report.comparison, RingComparison::LeftFiner));
        assert!(matches!(report.class_left, PClass::ExtensionExists { .. }));
        assert!(matches!(report.class_right, PClass::ExtensionExists { .. }));
        // equal valuations are comparable-equal
        let report2 = phensel_class_compare(&v_t, &v_t, 3, &mut s).unwrap();
        assert!(report2.consistent);
        assert!(matches!(report2.comparison, RingComparison::Equal));
        // closed residue at the fine stage
        let f3b = Tower::finite_field(3, 1).unwrap();
        let kc = Tower::as_closure(&f3b, 3).unwrap();
        let kcs = Tower::laurent(&kc, "s", 6).unwrap();
        let kcst = Tower::laurent(&kcs, "t", 6).unwrap();
        let fine = Valuation::full_stack(&kcst).unwrap(); // residue = closure
        let coarse = Valuation::structural(&kcst, vec![Step::SeriesAdic]).unwrap();
        let report3 = phensel_class_compare(&fine, &coarse, 3, &mut s).unwrap();
        assert!(report3.consistent, "closed-proxy stage should be finer");
        assert!(matches!(report3.class_left, PClass::ClosedProxy));
    }
}
