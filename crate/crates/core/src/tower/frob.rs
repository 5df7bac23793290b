//! Frobenius, p-th-power membership, and Artin-Schreier equation solving.
//!
//! The solvability of `z^p - z = c` drives both the lazily materialized
//! closures (a fresh generator is adjoined exactly when the equation has no
//! root in the current tower, which keeps every stage modulus irreducible)
//! and the obstruction side of the definable-set certificates (via p-th-power
//! membership in residue fields).

use std::cmp::Ordering;

use num::Zero;

use super::poly::{self, pnorm};
use super::value::{Quot, Rat, Value};
use super::{Node, Tower};
use crate::error::{VlabError, VlabResult};

impl Tower {
    /// `a^p` for the field characteristic `p`.
    pub fn frobenius(&self, a: &Value) -> VlabResult<Value> {
        let p = self.characteristic();
        if p == 0 {
            return Err(VlabError::CharacteristicZero("frobenius"));
        }
        self.pow_i64(a, p as i64)
    }

    /// Decides p-th-power membership and returns a witness `w` with
    /// `w^p = a` when one exists.
    pub fn has_pth_root(&self, a: &Value) -> VlabResult<Option<Value>> {
        let p = self.characteristic();
        if p == 0 {
            return Err(VlabError::CharacteristicZero("has_pth_root"));
        }
        match (&*self.0, a) {
            (Node::Finite(ff), Value::Fin(c)) => Ok(Some(Value::Fin(ff.pth_root(c)))),
            (Node::RatFunc { base, .. }, Value::Quot(q)) => {
                self.ratfunc_pth_root(base, q, p)
            }
            (Node::Series { base, puiseux, .. }, Value::Ser(s)) => {
                let mut terms = Vec::with_capacity(s.terms.len());
                let pr = Rat::from_integer(p.into());
                for (e, c) in &s.terms {
                    if !*puiseux && !(e / &pr).is_integer() {
                        return Ok(None);
                    }
                    match base.has_pth_root(c)? {
                        None => return Ok(None),
                        Some(r) => terms.push((e / &pr, r)),
                    }
                }
                let known = s.known_to.as_ref().map(|k| k / &pr);
                Ok(Some(Value::Ser(Box::new(super::Series {
                    terms,
                    known_to: known,
                }))))
            }
            (Node::Ext { .. }, Value::Ext(_)) => {
                // finite extensions of finite fields are perfect
                if let Some(q) = self.finite_order() {
                    let w = self.pow_u64(a, q / p)?;
                    let wp = self.pow_i64(&w, p as i64)?;
                    if self.eq_values(&wp, a) {
                        return Ok(Some(w));
                    }
                    return Ok(None);
                }
                Err(VlabError::Unsupported(
                    "p-th-power membership in this extension".into(),
                ))
            }
            (Node::AsClosure { .. }, Value::As(_)) => self.as_closure_pth_root(a),
            _ => Err(VlabError::FieldMismatch(
                "has_pth_root: value does not match field".into(),
            )),
        }
    }

    fn pow_u64(&self, a: &Value, mut e: u64) -> VlabResult<Value> {
        let mut acc = self.one();
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// p-th-power test in `F_q(u)`: writing the reduced form as
    /// `P * Q^(p-1) / Q^p`, the element is a p-th power iff the numerator has
    /// all its `u^j (mod p)` strata zero except `j = 0`.
    fn ratfunc_pth_root(&self, base: &Tower, q: &Quot, p: u64) -> VlabResult<Option<Value>> {
        if q.num.is_empty() {
            return Ok(Some(self.zero()));
        }
        let qp1 = {
            let mut acc = vec![base.one()];
            for _ in 0..(p - 1) {
                acc = poly::pmul(base, &acc, &q.den)?;
            }
            acc
        };
        let r = poly::pmul(base, &q.num, &qp1)?;
        // stratify r by exponent class mod p; stratum j must vanish for j != 0
        let mut root_num: Vec<Value> = Vec::new();
        for (m, c) in r.iter().enumerate() {
            if base.is_zero(c) {
                continue;
            }
            if m % (p as usize) != 0 {
                return Ok(None);
            }
            let i = m / (p as usize);
            let cr = match base.has_pth_root(c)? {
                None => return Ok(None),
                Some(x) => x,
            };
            if root_num.len() <= i {
                root_num.resize(i + 1, base.zero());
            }
            root_num[i] = cr;
        }
        let root = self.quot_canonical(pnorm(base, root_num), q.den.clone())?;
        // paranoia: verify the witness
        let check = self.pow_i64(&root, p as i64)?;
        let orig = Value::Quot(Box::new(q.clone()));
        if self.eq_values(&check, &orig) {
            Ok(Some(root))
        } else {
            Ok(None)
        }
    }

    fn as_closure_pth_root(&self, a: &Value) -> VlabResult<Option<Value>> {
        let p = self.as_closure_prime().expect("closure");
        let log = self.as_log().read().unwrap();
        let v = match a {
            Value::As(v) => v,
            _ => unreachable!(),
        };
        let t = log.trim(v.stage, (*v.rep).clone());
        if t.stage == 0 {
            // Complete for base-level elements: a separable extension adds no
            // new p-th roots of base elements.
            let basef = log.ctx(0);
            return Ok(basef
                .has_pth_root(&t.rep)?
                .map(|w| Value::As(log.trim(0, w))));
        }
        // finite towers: Frobenius is onto
        if let Some(q) = log.ctx(t.stage).finite_order() {
            let ctx = log.ctx(t.stage);
            let w = ctx_pow_u64(ctx, &t.rep, q / p)?;
            let wp = ctx.pow_i64(&w, p as i64)?;
            if ctx.eq_values(&wp, &t.rep) {
                return Ok(Some(Value::As(log.trim(t.stage, w))));
            }
            return Ok(None);
        }
        // bounded semilinear search in the materialized tower
        let sol = solve_additive_bounded(&log, t.stage, AdditiveMap::Frobenius(p), &t.rep)?;
        Ok(sol.map(|z| Value::As(log.trim(t.stage, z))))
    }

    /// Square-root decision: exhausts finite fields, factors rationals,
    /// reduces rational functions to polynomial square roots, and runs a
    /// leading-term analysis plus Newton refinement on series and p-adics.
    /// In characteristic 2 this is p-th-power membership.
    pub fn sqrt_in_field(&self, a: &Value) -> VlabResult<Option<Value>> {
        if self.characteristic() == 2 {
            return self.has_pth_root(a);
        }
        match (&*self.0, a) {
            (Node::Finite(_), Value::Fin(_)) => Ok(self.sqrt_finite(a)),
            (Node::Rationals, Value::Rat(r)) => {
                if r.is_zero() {
                    return Ok(Some(Value::Rat(Rat::zero())));
                }
                let n = super::bigint_sqrt_exact(r.numer());
                let d = super::bigint_sqrt_exact(r.denom());
                Ok(match (n, d) {
                    (Some(n), Some(d)) => Some(Value::Rat(Rat::new(n, d))),
                    _ => None,
                })
            }
            (Node::RatFunc { base, .. }, Value::Quot(q)) => {
                // in lowest terms with a monic denominator, a square must have
                // both parts literal polynomial squares
                if q.num.is_empty() {
                    return Ok(Some(self.zero()));
                }
                let num_root = poly::psqrt(base, &q.num)?;
                let den_root = poly::psqrt(base, &q.den)?;
                match (num_root, den_root) {
                    (Some(n), Some(d)) => Ok(Some(self.quot_canonical(n, d)?)),
                    _ => Ok(None),
                }
            }
            (Node::PAdic { .. }, Value::Pad(_)) => self.padic_sqrt_decision(a),
            (Node::Series { .. }, Value::Ser(_)) => self.series_sqrt_decision(a),
            (Node::Ext { .. }, Value::Ext(_)) | (Node::AsClosure { .. }, Value::As(_)) => {
                if self.finite_order().is_some() || self.is_as_closure() {
                    if let Node::AsClosure { log, .. } = &*self.0 {
                        let guard = log.read().unwrap();
                        let v = match a {
                            Value::As(v) => v,
                            _ => unreachable!(),
                        };
                        let ctx = guard.ctx(v.stage);
                        if ctx.finite_order().is_some() {
                            return Ok(ctx
                                .sqrt_finite(&v.rep)
                                .map(|w| Value::As(guard.trim(v.stage, w))));
                        }
                        return Err(VlabError::Unsupported(
                            "square roots in this closure".into(),
                        ));
                    }
                    Ok(self.sqrt_finite(a))
                } else {
                    Err(VlabError::Unsupported(
                        "square roots in this extension".into(),
                    ))
                }
            }
            _ => Err(VlabError::Unsupported(
                "square-root decision for this field".into(),
            )),
        }
    }

    /// Square roots in `Q_p` (p odd): even valuation, a quadratic-residue
    /// unit, then quadratic Newton refinement of the exact representative.
    pub(crate) fn padic_sqrt_decision(&self, a: &Value) -> VlabResult<Option<Value>> {
        let (p, prec) = match &*self.0 {
            Node::PAdic { p, prec } => (*p, *prec as i64),
            _ => return Err(VlabError::FieldMismatch("expected p-adic field".into())),
        };
        if p == 2 {
            return Err(VlabError::Unsupported("square roots in Q_2".into()));
        }
        let x = match a {
            Value::Pad(x) => x,
            _ => return Err(VlabError::FieldMismatch("expected p-adic value".into())),
        };
        if x.value.is_zero() {
            return if x.known_to.is_none() {
                Ok(Some(self.zero()))
            } else {
                Err(VlabError::PrecisionExhausted(
                    "square root of an element that is zero at stored precision".into(),
                ))
            };
        }
        let v = super::arith::padic_valuation(&x.value, p).expect("nonzero");
        if v.rem_euclid(2) != 0 {
            return Ok(None);
        }
        // unit part and its residue
        let unit = &x.value / pow_rat_frob(p, v);
        let u0 = rat_mod_p(&unit, p);
        let r0 = (1..p).find(|r| (r * r) % p == u0);
        let Some(r0) = r0 else {
            return Ok(None);
        };
        // Newton: r <- (r + u/r) / 2, quadratic convergence in v_p
        let target = x.known_to.map(|k| k - v).unwrap_or(prec);
        let mut r = Rat::from_integer(r0.into());
        let two = Rat::from_integer(2.into());
        for _ in 0..64 {
            let diff = &r * &r - &unit;
            match super::arith::padic_valuation(&diff, p) {
                None => break,
                Some(d) if d >= target => break,
                _ => {}
            }
            r = (&r + &unit / &r) / &two;
            // keep the representative small
            r = reduce_rat_mod_power(&r, p, target + 2);
        }
        let root_val = r * pow_rat_frob(p, v / 2);
        let known = x.known_to.map(|k| k - v / 2);
        let root = Value::Pad(super::Padic {
            value: root_val,
            known_to: known,
        });
        let root = self.add(&root, &self.zero())?; // canonicalize
        let sq = self.mul(&root, &root)?;
        if self.eq_at_precision(&sq, a)? {
            Ok(Some(root))
        } else {
            Ok(None)
        }
    }

    /// Square roots in series fields of characteristic != 2: the leading
    /// exponent must be even (any exponent halves in Puiseux mode), the
    /// leading coefficient must be a square in the base, and the unit tail is
    /// refined by Newton iteration.
    pub(crate) fn series_sqrt_decision(&self, a: &Value) -> VlabResult<Option<Value>> {
        let (base, puiseux, prec) = match &*self.0 {
            Node::Series { base, puiseux, prec, .. } => (base.clone(), *puiseux, *prec),
            _ => return Err(VlabError::FieldMismatch("expected series field".into())),
        };
        let s = match a {
            Value::Ser(s) => s,
            _ => return Err(VlabError::FieldMismatch("expected series value".into())),
        };
        let Some((e0, c0)) = s.terms.first() else {
            return if s.known_to.is_none() {
                Ok(Some(self.zero()))
            } else {
                Err(VlabError::PrecisionExhausted(
                    "square root of a series that is zero at stored precision".into(),
                ))
            };
        };
        if base.is_zero_at_precision(c0) {
            return Err(VlabError::PrecisionExhausted(
                "leading series coefficient is indeterminate".into(),
            ));
        }
        let two = Rat::from_integer(2.into());
        let half = e0 / &two;
        if !puiseux && !half.is_integer() {
            return Ok(None);
        }
        let Some(c0_root) = base.sqrt_in_field(c0)? else {
            return Ok(None);
        };
        // unit tail u = a / (c0 t^e0); inverse-square-root Newton from 1:
        // y <- y (3 - u y^2) / 2, residual squares each pass, iterates kept
        // truncated at the accuracy actually reached
        let lead_mono = Value::Ser(Box::new(super::Series {
            terms: vec![(e0.clone(), c0.clone())],
            known_to: None,
        }));
        let u = self.div(a, &lead_mono)?;
        let window = Rat::from_integer((prec as i64 + 1).into());
        let u = self.series_truncate(&u, &window)?;
        let rel = match &u {
            Value::Ser(s) => s
                .terms
                .get(1)
                .map(|(e, _)| e.clone())
                .unwrap_or_else(|| window.clone()),
            _ => window.clone(),
        };
        let mut rho = rel;
        let mut y = self.series_truncate(&self.one(), &rho)?;
        let two_inv = self.inv(&self.from_i64(2))?;
        let three = self.from_i64(3);
        for _ in 0..64 {
            if rho >= window {
                break;
            }
            let next = {
                let d = &rho + &rho;
                if d > window {
                    window.clone()
                } else {
                    d
                }
            };
            y = match y {
                Value::Ser(mut s) => {
                    s.known_to = Some(next.clone());
                    Value::Ser(s)
                }
                other => other,
            };
            let y2 = self.mul(&y, &y)?;
            let uy2 = self.mul(&u, &y2)?;
            let corr = self.mul(&self.sub(&three, &uy2)?, &two_inv)?;
            y = self.mul(&y, &corr)?;
            y = self.series_truncate(&y, &next)?;
            rho = next;
        }
        // sqrt(u) = u * y
        let x = self.mul(&u, &y)?;
        let half_mono = Value::Ser(Box::new(super::Series {
            terms: vec![(half, c0_root)],
            known_to: None,
        }));
        let root = self.mul(&half_mono, &x)?;
        let sq = self.mul(&root, &root)?;
        if self.eq_at_precision(&sq, a)? {
            Ok(Some(root))
        } else {
            Ok(None)
        }
    }

    /// Exhaustive square root in a small finite field.
    fn sqrt_finite(&self, a: &Value) -> Option<Value> {
        let q = self.finite_order()?;
        if q > 1 << 14 {
            return None;
        }
        let mut best: Option<Value> = None;
        for x in self.enumerate_finite()? {
            if let Ok(sq) = self.mul(&x, &x) {
                if self.eq_values(&sq, a) {
                    best = Some(match best {
                        None => x,
                        Some(b) => {
                            if canon_cmp(&x, &b) == Ordering::Less {
                                x
                            } else {
                                b
                            }
                        }
                    });
                }
            }
        }
        best
    }

    /// Enumerate all elements of a finite tower (finite field or extension
    /// chain over one) in a fixed deterministic order.
    pub fn enumerate_finite(&self) -> Option<Vec<Value>> {
        let q = self.finite_order()?;
        if q > 1 << 14 {
            return None;
        }
        match &*self.0 {
            Node::Finite(ff) => Some(ff.enumerate().map(Value::Fin).collect()),
            Node::Ext { base, modulus, .. } => {
                let inner = base.enumerate_finite()?;
                let n = modulus.len() - 1;
                let mut out = Vec::with_capacity(q as usize);
                let mut idx = vec![0usize; n];
                loop {
                    out.push(Value::Ext(idx.iter().map(|&i| inner[i].clone()).collect()));
                    let mut j = 0;
                    loop {
                        if j == n {
                            return Some(out);
                        }
                        idx[j] += 1;
                        if idx[j] < inner.len() {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                }
            }
            _ => None,
        }
    }
}

fn pow_rat_frob(p: u64, e: i64) -> Rat {
    let b = num::BigInt::from(p);
    if e >= 0 {
        Rat::from_integer(num::pow::pow(b, e as usize))
    } else {
        Rat::new(1.into(), num::pow::pow(b, (-e) as usize))
    }
}

fn rat_mod_p(r: &Rat, p: u64) -> u64 {
    let pb = num::BigInt::from(p);
    let dinv = super::arith::mod_inverse(r.denom(), &pb).expect("unit denominator");
    let m = ((r.numer() * dinv) % &pb + &pb) % &pb;
    m.try_into().unwrap_or(0)
}

/// Reduce a rational with p-unit denominator modulo `p^k`, keeping the value
/// class but shrinking the representative.
fn reduce_rat_mod_power(r: &Rat, p: u64, k: i64) -> Rat {
    if k <= 0 {
        return r.clone();
    }
    let m = num::pow::pow(num::BigInt::from(p), k as usize);
    match super::arith::mod_inverse(r.denom(), &m) {
        None => r.clone(),
        Some(dinv) => {
            let v = ((r.numer() * dinv) % &m + &m) % &m;
            Rat::from_integer(v)
        }
    }
}

fn ctx_pow_u64(ctx: &Tower, a: &Value, mut e: u64) -> VlabResult<Value> {
    let mut acc = ctx.one();
    let mut base = a.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = ctx.mul(&acc, &base)?;
        }
        e >>= 1;
        if e > 0 {
            base = ctx.mul(&base, &base)?;
        }
    }
    Ok(acc)
}

/// Tie-break among the root set `{z + j : 0 <= j < p}`: the representation-
/// least element under [`canon_cmp`], computed inside a stage context.
fn as_canonical_root_in_ctx(ctx: &Tower, z: Value, p: u64) -> VlabResult<Value> {
    let mut best = z.clone();
    let mut cur = z;
    for _ in 1..p {
        cur = ctx.add(&cur, &ctx.one())?;
        if canon_cmp(&cur, &best) == Ordering::Less {
            best = cur.clone();
        }
    }
    Ok(best)
}

/// A fixed total order on canonical representations, used only for
/// deterministic tie-breaking among Artin-Schreier roots.
pub fn canon_cmp(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Fin(_) => 0,
            Value::Rat(_) => 1,
            Value::Quot(_) => 2,
            Value::Ser(_) => 3,
            Value::Pad(_) => 4,
            Value::Ext(_) => 5,
            Value::As(_) => 6,
        }
    }
    fn cmp_polys(a: &[Value], b: &[Value]) -> Ordering {
        a.len().cmp(&b.len()).then_with(|| {
            for (x, y) in a.iter().zip(b).rev() {
                let c = canon_cmp(x, y);
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        })
    }
    match (a, b) {
        (Value::Fin(x), Value::Fin(y)) => x.cmp(y),
        (Value::Rat(x), Value::Rat(y)) => x.cmp(y),
        (Value::Quot(x), Value::Quot(y)) => {
            cmp_polys(&x.den, &y.den).then_with(|| cmp_polys(&x.num, &y.num))
        }
        (Value::Ser(x), Value::Ser(y)) => {
            x.terms.len().cmp(&y.terms.len()).then_with(|| {
                for ((ex, cx), (ey, cy)) in x.terms.iter().zip(&y.terms) {
                    let c = ex.cmp(ey).then_with(|| canon_cmp(cx, cy));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            })
        }
        (Value::Pad(x), Value::Pad(y)) => x.value.cmp(&y.value),
        (Value::Ext(x), Value::Ext(y)) => {
            for (u, v) in x.iter().zip(y) {
                let c = canon_cmp(u, v);
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        }
        (Value::As(x), Value::As(y)) => x
            .stage
            .cmp(&y.stage)
            .then_with(|| canon_cmp(&x.rep, &y.rep)),
        _ => rank(a).cmp(&rank(b)),
    }
}

/// Additive (F_p-linear) maps whose preimages we search in a bounded space.
#[derive(Clone, Copy)]
pub(crate) enum AdditiveMap {
    /// `y -> y^p`
    Frobenius(u64),
    /// `y -> y^p - y`
    Wp(u64),
}

impl AdditiveMap {
    fn apply(&self, f: &Tower, y: &Value) -> VlabResult<Value> {
        match self {
            AdditiveMap::Frobenius(p) => f.pow_i64(y, *p as i64),
            AdditiveMap::Wp(p) => {
                let yp = f.pow_i64(y, *p as i64)?;
                f.sub(&yp, y)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Complete solvers over the supported base fields
// ---------------------------------------------------------------------------

/// Exhaustive Artin-Schreier solve in a small finite tower; returns the
/// canonically least root.
pub(crate) fn as_solve_finite_tower(f: &Tower, c: &Value, p: u64) -> VlabResult<Option<Value>> {
    solve_additive_exhaustive(f, AdditiveMap::Wp(p), c)
}

/// Exhaustive preimage search for an additive map over a small finite tower.
fn solve_additive_exhaustive(f: &Tower, map: AdditiveMap, c: &Value) -> VlabResult<Option<Value>> {
    let elems = f
        .enumerate_finite()
        .ok_or_else(|| VlabError::Unsupported("finite enumeration too large".into()))?;
    let mut best: Option<Value> = None;
    for z in elems {
        let w = map.apply(f, &z)?;
        if f.eq_values(&w, c) {
            best = Some(match best {
                None => z,
                Some(b) => {
                    if canon_cmp(&z, &b) == Ordering::Less {
                        z
                    } else {
                        b
                    }
                }
            });
        }
    }
    Ok(best)
}

/// Complete solver for `y^p - y = d` over `F_q(u)`.
///
/// Pole orders multiply by `p` under the map, so in lowest terms the
/// denominator of `d` must be a perfect p-th power `E^p`, and then
/// `y = Y / E` with `Y^p - Y E^(p-1) = N` a bounded F_p-linear system in the
/// coefficients of `Y`.
pub(crate) fn wp_solve_ratfunc(f: &Tower, d: &Value, p: u64) -> VlabResult<Option<Value>> {
    let base = f.base().expect("ratfunc base").clone();
    let q = match d {
        Value::Quot(q) => q,
        _ => return Err(VlabError::FieldMismatch("expected rational function".into())),
    };
    if q.num.is_empty() {
        return Ok(Some(f.zero()));
    }
    // factor the denominator
    let e_poly = match poly_pth_power_root(&base, &q.den, p)? {
        None => return Ok(None),
        Some(e) => e,
    };
    let n_poly = &q.num;
    let deg_n = n_poly.len().saturating_sub(1);
    let deg_e = e_poly.len() - 1;
    let deg_y = std::cmp::max(deg_n / p as usize, deg_e) + 1;
    // F_p-linear system in the coefficients of Y over the F_p-basis of F_q
    let ffp = base
        .as_finite()
        .ok_or_else(|| VlabError::Unsupported("Artin-Schreier base must have finite constants".into()))?
        .clone();
    let k = ffp.k as usize;
    let ncols = (deg_y + 1) * k;
    // E^(p-1)
    let mut ep1 = vec![base.one()];
    for _ in 0..(p - 1) {
        ep1 = poly::pmul(&base, &ep1, &e_poly)?;
    }
    let row_len = std::cmp::max(p as usize * (deg_y + 1), deg_y + 1 + ep1.len()) + 2;
    let nrows = row_len * k;
    let mut matrix = vec![vec![0u8; ncols]; nrows];
    let mut basis_vals: Vec<Vec<Value>> = Vec::with_capacity(ncols);
    for i in 0..=deg_y {
        for l in 0..k {
            // basis polynomial eps_l * u^i
            let mut coeffs = vec![base.zero(); i + 1];
            let mut fv = ffp.zero();
            fv[l] = 1;
            coeffs[i] = Value::Fin(fv);
            // T(b) = b^p - b * E^(p-1)
            let bp = {
                let mut acc = vec![base.one()];
                for _ in 0..p {
                    acc = poly::pmul(&base, &acc, &coeffs)?;
                }
                acc
            };
            let lin = poly::pmul(&base, &coeffs, &ep1)?;
            let t = poly::psub(&base, &bp, &lin)?;
            let col = basis_vals.len();
            for (m, cv) in t.iter().enumerate() {
                if let Value::Fin(fc) = cv {
                    for (l2, &x) in fc.iter().enumerate() {
                        if x != 0 {
                            matrix[m * k + l2][col] = (x % p) as u8;
                        }
                    }
                }
            }
            basis_vals.push(coeffs);
        }
    }
    let mut rhs = vec![0u8; nrows];
    for (m, cv) in n_poly.iter().enumerate() {
        if let Value::Fin(fc) = cv {
            for (l2, &x) in fc.iter().enumerate() {
                rhs[m * k + l2] = (x % p) as u8;
            }
        }
    }
    let sol = match solve_mod_p(matrix, rhs, p as u8) {
        None => return Ok(None),
        Some(s) => s,
    };
    // assemble Y
    let mut y_poly = vec![base.zero(); deg_y + 1];
    for (col, mult) in sol.iter().enumerate() {
        if *mult == 0 {
            continue;
        }
        let b = &basis_vals[col];
        for (i, c) in b.iter().enumerate() {
            let scaled = base.mul(c, &base.from_i64(*mult as i64))?;
            y_poly[i] = base.add(&y_poly[i], &scaled)?;
        }
    }
    let y = f.quot_canonical(pnorm(&base, y_poly), e_poly)?;
    // verify
    let yp = f.pow_i64(&y, p as i64)?;
    let lhs = f.sub(&yp, &y)?;
    if f.eq_values(&lhs, d) {
        Ok(Some(y))
    } else {
        Ok(None)
    }
}

/// If `a = e^p` for a monic polynomial `e`, return `e`.
fn poly_pth_power_root(base: &Tower, a: &[Value], p: u64) -> VlabResult<Option<Vec<Value>>> {
    let deg = match poly::pdeg(a) {
        None => return Ok(Some(Vec::new())),
        Some(d) => d,
    };
    if deg == 0 {
        return Ok(Some(vec![base.one()]));
    }
    if deg % p as usize != 0 {
        return Ok(None);
    }
    // factor by trial division with ascending-degree monic divisors
    let factors = factor_monic_over_finite(base, a)?;
    let mut root = vec![base.one()];
    for (f, m) in factors {
        if m % p as usize != 0 {
            return Ok(None);
        }
        for _ in 0..(m / p as usize) {
            root = poly::pmul(base, &root, &f)?;
        }
    }
    Ok(Some(root))
}

/// Irreducible factorization of a monic-normalizable polynomial over a small
/// finite field, by trial division in ascending degree.
pub(crate) fn factor_monic_over_finite(
    base: &Tower,
    a: &[Value],
) -> VlabResult<Vec<(Vec<Value>, usize)>> {
    let mut rem = poly::pmonic(base, a)?;
    let mut out: Vec<(Vec<Value>, usize)> = Vec::new();
    let elems = base
        .enumerate_finite()
        .ok_or_else(|| VlabError::Unsupported("factorization needs finite constants".into()))?;
    let mut d = 1usize;
    while poly::pdeg(&rem).unwrap_or(0) > 0 {
        let rdeg = poly::pdeg(&rem).unwrap();
        if d > rdeg / 2 {
            // remainder is irreducible
            out.push((rem.clone(), 1));
            break;
        }
        if d > 8 {
            return Err(VlabError::Unsupported(
                "denominator factorization degree exceeds the desk-scale bound".into(),
            ));
        }
        // enumerate monic polynomials of degree d
        let mut idx = vec![0usize; d];
        let mut advanced = false;
        'candidates: loop {
            let mut cand: Vec<Value> = idx.iter().map(|&i| elems[i].clone()).collect();
            cand.push(base.one());
            let mut mult = 0usize;
            loop {
                let (quo, r) = poly::pdivrem(base, &rem, &cand)?;
                if r.is_empty() && !quo.is_empty() {
                    rem = quo;
                    mult += 1;
                } else {
                    break;
                }
            }
            if mult > 0 {
                out.push((cand, mult));
                if poly::pdeg(&rem).unwrap_or(0) == 0 {
                    break 'candidates;
                }
            }
            // odometer
            let mut j = 0;
            loop {
                if j == d {
                    advanced = true;
                    break 'candidates;
                }
                idx[j] += 1;
                if idx[j] < elems.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
        if advanced {
            d += 1;
        } else if poly::pdeg(&rem).unwrap_or(0) == 0 {
            break;
        }
    }
    // merge duplicate factors recorded across restarts
    let mut merged: Vec<(Vec<Value>, usize)> = Vec::new();
    'outer: for (f, m) in out {
        for entry in merged.iter_mut() {
            if entry.0 == f {
                entry.1 += m;
                continue 'outer;
            }
        }
        merged.push((f, m));
    }
    Ok(merged)
}

/// Gaussian elimination over F_p for small dense u8 matrices.
/// `matrix[row][col] * x[col] = rhs[row]`; returns any solution.
fn solve_mod_p(mut matrix: Vec<Vec<u8>>, mut rhs: Vec<u8>, p: u8) -> Option<Vec<u8>> {
    let nrows = matrix.len();
    let ncols = if nrows == 0 { 0 } else { matrix[0].len() };
    let inv = |a: u8| -> u8 {
        // p is tiny
        (1..p).find(|&x| (x as u16 * a as u16) % p as u16 == 1).unwrap_or(1)
    };
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        let Some(pr) = (row..nrows).find(|&r| matrix[r][col] % p != 0) else {
            continue;
        };
        matrix.swap(row, pr);
        rhs.swap(row, pr);
        let iv = inv(matrix[row][col] % p);
        for c in col..ncols {
            matrix[row][c] = ((matrix[row][c] as u16 * iv as u16) % p as u16) as u8;
        }
        rhs[row] = ((rhs[row] as u16 * iv as u16) % p as u16) as u8;
        for r in 0..nrows {
            if r != row && matrix[r][col] % p != 0 {
                let factor = matrix[r][col] % p;
                for c in col..ncols {
                    let s = (matrix[r][c] as i16
                        - factor as i16 * matrix[row][c] as i16)
                        .rem_euclid(p as i16);
                    matrix[r][c] = s as u8;
                }
                let s =
                    (rhs[r] as i16 - factor as i16 * rhs[row] as i16).rem_euclid(p as i16);
                rhs[r] = s as u8;
            }
        }
        pivots.push((row, col));
        row += 1;
        if row == nrows {
            break;
        }
    }
    // consistency
    for r in row..nrows {
        if rhs[r] % p != 0 {
            return None;
        }
    }
    let mut x = vec![0u8; ncols];
    for (r, c) in pivots {
        x[c] = rhs[r] % p;
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Bounded in-tower solver
// ---------------------------------------------------------------------------

/// Flatten a stage value into its `p^stage` coordinates over the closure base.
fn flatten(log: &super::AsLog, stage: usize, v: &Value) -> Vec<Value> {
    if stage == 0 {
        return vec![v.clone()];
    }
    match v {
        Value::Ext(coords) => coords
            .iter()
            .flat_map(|c| flatten(log, stage - 1, c))
            .collect(),
        _ => unreachable!("stage value must be an extension element"),
    }
}

/// Solve `map(y) = target` inside the materialized stage tower by F_p-linear
/// algebra over a bounded candidate space. Sound (solutions are verified);
/// the candidate space is generous but finite, so a `None` is a desk-scale
/// verdict rather than a proof for exotic coefficient growth.
pub(crate) fn solve_additive_bounded(
    log: &super::AsLog,
    stage: usize,
    map: AdditiveMap,
    target: &Value,
) -> VlabResult<Option<Value>> {
    let ctx = log.ctx(stage).clone();
    let base = log.ctx(0).clone();
    let p = match map {
        AdditiveMap::Frobenius(p) | AdditiveMap::Wp(p) => p,
    };
    match &*base.0 {
        Node::RatFunc { .. } => {}
        _ => return solve_additive_exhaustive(&ctx, map, target),
    }
    let inner = base.base().expect("ratfunc base").clone();
    let ffp = inner
        .as_finite()
        .ok_or_else(|| VlabError::Unsupported("closure base constants must be finite".into()))?
        .clone();
    let kb = ffp.k as usize;
    let dim = (p as usize).pow(stage as u32);

    // candidate denominator: product of the denominators appearing in the
    // target and in the stage moduli, squared for slack
    let mut den_acc: Vec<Value> = vec![inner.one()];
    let mut deg_num_max = 0usize;
    let collect = |coords: &[Value], den_acc: &mut Vec<Value>, deg_num_max: &mut usize| -> VlabResult<()> {
        for c in coords {
            if let Value::Quot(q) = c {
                if poly::pdeg(&q.den).unwrap_or(0) > 0 {
                    *den_acc = poly::pmul(&inner, den_acc, &q.den)?;
                }
                *deg_num_max = (*deg_num_max).max(q.num.len());
            }
        }
        Ok(())
    };
    collect(&flatten(log, stage, target), &mut den_acc, &mut deg_num_max)?;
    for (i, gen) in log.gens.iter().enumerate().take(stage) {
        collect(&flatten(log, i, &gen.c), &mut den_acc, &mut deg_num_max)?;
    }
    let dprime = poly::pmul(&inner, &den_acc, &den_acc)?;
    let deg_d = poly::pdeg(&dprime).unwrap_or(0);
    let deg_y = deg_d + deg_num_max + 2 * p as usize + 2;
    let ncols = dim * (deg_y + 1) * kb;
    if ncols > 4000 {
        return Err(VlabError::Unsupported(
            "bounded Artin-Schreier search space too large".into(),
        ));
    }

    // basis elements: monomial-slot m, u^i / D', F_p-coordinate l
    let dprime_inv = {
        let dq = Value::Quot(Box::new(Quot {
            num: dprime.clone(),
            den: vec![inner.one()],
        }));
        base.inv(&dq)?
    };
    let mut images: Vec<Vec<Value>> = Vec::with_capacity(ncols);
    let mut basis: Vec<Value> = Vec::with_capacity(ncols);
    for slot in 0..dim {
        for i in 0..=deg_y {
            for l in 0..kb {
                let mut fv = ffp.zero();
                fv[l] = 1;
                let mut num = vec![inner.zero(); i + 1];
                num[i] = Value::Fin(fv);
                let coeff = base.mul(
                    &Value::Quot(Box::new(Quot {
                        num: pnorm(&inner, num),
                        den: vec![inner.one()],
                    })),
                    &dprime_inv,
                )?;
                // place into monomial slot
                let b = unflatten(log, stage, slot, coeff)?;
                let img = map.apply(&ctx, &b)?;
                images.push(flatten(log, stage, &img));
                basis.push(b);
            }
        }
    }

    // common denominator across all image coords and target coords
    let mut cden: Vec<Value> = vec![inner.one()];
    let push_den = |coords: &[Value], cden: &mut Vec<Value>| -> VlabResult<()> {
        for c in coords {
            if let Value::Quot(q) = c {
                let g = poly::pgcd(&inner, cden, &q.den)?;
                let (extra, _) = poly::pdivrem(&inner, &q.den, &g)?;
                *cden = poly::pmul(&inner, cden, &extra)?;
            }
        }
        Ok(())
    };
    let target_coords = flatten(log, stage, target);
    push_den(&target_coords, &mut cden)?;
    for img in &images {
        push_den(img, &mut cden)?;
    }
    let row_deg = {
        let mut m = 0usize;
        let probe = |coords: &[Value], m: &mut usize| -> VlabResult<()> {
            for c in coords {
                if let Value::Quot(q) = c {
                    let (mult, _) = poly::pdivrem(&inner, &cden, &q.den)?;
                    *m = (*m).max(q.num.len() + mult.len());
                }
            }
            Ok(())
        };
        probe(&target_coords, &mut m)?;
        for img in &images {
            probe(img, &mut m)?;
        }
        m + 1
    };
    let nrows = dim * row_deg * kb;
    let mut matrix = vec![vec![0u8; ncols]; nrows];
    let fill = |coords: &[Value], put: &mut dyn FnMut(usize, u8)| -> VlabResult<()> {
        for (slot, c) in coords.iter().enumerate() {
            if let Value::Quot(q) = c {
                if q.num.is_empty() {
                    continue;
                }
                let (mult, r) = poly::pdivrem(&inner, &cden, &q.den)?;
                debug_assert!(r.is_empty());
                let scaled = poly::pmul(&inner, &q.num, &mult)?;
                for (m, cv) in scaled.iter().enumerate() {
                    if let Value::Fin(fc) = cv {
                        for (l, &x) in fc.iter().enumerate() {
                            if x != 0 {
                                put(slot * row_deg * kb + m * kb + l, (x % p) as u8);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    };
    for (col, img) in images.iter().enumerate() {
        fill(img, &mut |row, val| {
            if row < nrows {
                matrix[row][col] = val;
            }
        })?;
    }
    let mut rhs = vec![0u8; nrows];
    fill(&target_coords, &mut |row, val| {
        if row < nrows {
            rhs[row] = val;
        }
    })?;

    let sol = match solve_mod_p(matrix, rhs, p as u8) {
        None => return Ok(None),
        Some(s) => s,
    };
    let mut y = ctx.zero();
    for (col, mult) in sol.iter().enumerate() {
        if *mult == 0 {
            continue;
        }
        let scaled = ctx.mul(&basis[col], &ctx.from_i64(*mult as i64))?;
        y = ctx.add(&y, &scaled)?;
    }
    // verify
    let img = map.apply(&ctx, &y)?;
    if ctx.eq_values(&img, target) {
        Ok(Some(y))
    } else {
        Ok(None)
    }
}

/// Inverse of `flatten` for a single coordinate slot.
fn unflatten(log: &super::AsLog, stage: usize, slot: usize, v: Value) -> VlabResult<Value> {
    if stage == 0 {
        debug_assert_eq!(slot, 0);
        return Ok(v);
    }
    let prev_dim = {
        let p = log.ctx(1).ext_degree().unwrap_or(2);
        p.pow(stage as u32 - 1) as usize
    };
    let outer = slot / prev_dim;
    let inner_slot = slot % prev_dim;
    let inner = unflatten(log, stage - 1, inner_slot, v)?;
    let deg = log.ctx(stage).ext_degree().expect("stage is an extension");
    let prev = log.ctx(stage - 1);
    let mut coords = vec![prev.zero(); deg];
    coords[outer] = inner;
    Ok(Value::Ext(coords))
}

// ---------------------------------------------------------------------------
// Closure-level Artin-Schreier interface
// ---------------------------------------------------------------------------

impl Tower {
    /// Find `z` with `z^p - z = c` in the Artin-Schreier closure. With
    /// `adjoin = true` a fresh generator is materialized when no root exists
    /// in the current tower (so the call always succeeds); with
    /// `adjoin = false` the result reports in-tower solvability only.
    pub fn as_closure_solve(&self, c: &Value, adjoin: bool) -> VlabResult<Option<Value>> {
        let p = self
            .as_closure_prime()
            .ok_or_else(|| VlabError::Unsupported("not an Artin-Schreier closure".into()))?;
        {
            let log = self.as_log().read().unwrap();
            if let Some(z) = self.as_solve_in_tower(&log, c, p)? {
                return Ok(Some(z));
            }
        }
        if !adjoin {
            return Ok(None);
        }
        let mut log = self.as_log().write().unwrap();
        // re-check under the write lock
        if let Some(z) = self.as_solve_in_tower(&log, c, p)? {
            return Ok(Some(z));
        }
        let v = match c {
            Value::As(v) => v,
            _ => return Err(VlabError::FieldMismatch("expected closure element".into())),
        };
        let top = log.top_stage();
        let c_top = log.lift(v, top);
        let gen = log.adjoin(p, c_top)?;
        Ok(Some(Value::As(gen)))
    }

    fn as_solve_in_tower(
        &self,
        log: &super::AsLog,
        c: &Value,
        p: u64,
    ) -> VlabResult<Option<Value>> {
        let v = match c {
            Value::As(v) => v,
            _ => return Err(VlabError::FieldMismatch("expected closure element".into())),
        };
        let t = log.trim(v.stage, (*v.rep).clone());
        // exact cache hit
        for (i, gen) in log.gens.iter().enumerate() {
            let gi = log.trim(i, gen.c.clone());
            if gi.stage == t.stage && gi.rep == t.rep {
                return Ok(Some(Value::As(log.generator_value(i + 1))));
            }
        }
        let base = log.ctx(0).clone();
        if base.finite_order().is_some() {
            let top = log.top_stage();
            let ctx = log.ctx(top);
            let lifted = log.lift(&t, top);
            let sol = as_solve_finite_tower(ctx, &lifted, p)?;
            return Ok(sol.map(|z| Value::As(log.trim(top, z))));
        }
        if log.all_base && t.stage == 0 {
            // c in the base: solvable iff c - sum(a_i c_i) is in wp(base)
            // for some F_p-vector a (Artin-Schreier pairing for elementary
            // abelian towers)
            let k = log.gens.len();
            let mut avec = vec![0u64; k];
            loop {
                // d = c - sum a_i c_i  (computed in the base field)
                let mut d = (*t.rep).clone();
                for (i, &ai) in avec.iter().enumerate() {
                    if ai == 0 {
                        continue;
                    }
                    let gi = log.trim(i, log.gens[i].c.clone());
                    debug_assert_eq!(gi.stage, 0);
                    let scaled = base.mul(&gi.rep, &base.from_i64(ai as i64))?;
                    d = base.sub(&d, &scaled)?;
                }
                if let Some(y) = wp_solve_ratfunc(&base, &d, p)? {
                    // z = y + sum a_i th_i, assembled in the top stage context
                    let top = log.top_stage();
                    let ctx = log.ctx(top);
                    let mut z = log.lift(&log.trim(0, y), top);
                    for (i, &ai) in avec.iter().enumerate() {
                        if ai == 0 {
                            continue;
                        }
                        let th = log.lift(&log.generator_value(i + 1), top);
                        for _ in 0..ai {
                            z = ctx.add(&z, &th)?;
                        }
                    }
                    let z = as_canonical_root_in_ctx(ctx, z, p)?;
                    return Ok(Some(Value::As(log.trim(top, z))));
                }
                // odometer over F_p^k
                let mut j = 0;
                loop {
                    if j == k {
                        return Ok(None);
                    }
                    avec[j] += 1;
                    if avec[j] < p {
                        break;
                    }
                    avec[j] = 0;
                    j += 1;
                }
            }
        }
        // general bounded search at the top stage
        let top = log.top_stage();
        let ctx = log.ctx(top);
        let lifted = log.lift(&t, top);
        match solve_additive_bounded(log, top, AdditiveMap::Wp(p), &lifted)? {
            None => Ok(None),
            Some(z) => {
                let z = as_canonical_root_in_ctx(ctx, z, p)?;
                Ok(Some(Value::As(log.trim(top, z))))
            }
        }
    }
}
