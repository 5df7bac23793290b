//! Dense univariate polynomial helpers over an arbitrary tower field.
//!
//! Coefficient vectors are little-endian. These are plain functions rather
//! than a polynomial type: the coefficient field travels alongside as a
//! [`Tower`] reference, matching how the tower dispatches its own arithmetic.

use super::{Tower, Value};
use crate::error::{VlabError, VlabResult};

/// Strip trailing (leading-coefficient) exact zeros.
pub fn pnorm(f: &Tower, mut c: Vec<Value>) -> Vec<Value> {
    while let Some(last) = c.last() {
        if f.is_zero(last) {
            c.pop();
        } else {
            break;
        }
    }
    c
}

pub fn pdeg(c: &[Value]) -> Option<usize> {
    if c.is_empty() {
        None
    } else {
        Some(c.len() - 1)
    }
}

pub fn pis_zero(c: &[Value]) -> bool {
    c.is_empty()
}

pub fn pconst(f: &Tower, v: Value) -> Vec<Value> {
    if f.is_zero(&v) {
        Vec::new()
    } else {
        vec![v]
    }
}

pub fn padd(f: &Tower, a: &[Value], b: &[Value]) -> VlabResult<Vec<Value>> {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = a.get(i).cloned().unwrap_or_else(|| f.zero());
        let y = b.get(i).cloned().unwrap_or_else(|| f.zero());
        out.push(f.add(&x, &y)?);
    }
    Ok(pnorm(f, out))
}

pub fn pneg(f: &Tower, a: &[Value]) -> VlabResult<Vec<Value>> {
    a.iter().map(|c| f.neg(c)).collect()
}

pub fn psub(f: &Tower, a: &[Value], b: &[Value]) -> VlabResult<Vec<Value>> {
    let nb = pneg(f, b)?;
    padd(f, a, &nb)
}

pub fn pmul(f: &Tower, a: &[Value], b: &[Value]) -> VlabResult<Vec<Value>> {
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = vec![f.zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if f.is_zero(x) {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            let t = f.mul(x, y)?;
            out[i + j] = f.add(&out[i + j], &t)?;
        }
    }
    Ok(pnorm(f, out))
}

pub fn pscale(f: &Tower, a: &[Value], c: &Value) -> VlabResult<Vec<Value>> {
    if f.is_zero(c) {
        return Ok(Vec::new());
    }
    let out: VlabResult<Vec<Value>> = a.iter().map(|x| f.mul(x, c)).collect();
    Ok(pnorm(f, out?))
}

/// Euclidean division; requires an invertible leading coefficient of `den`.
/// Positions are eliminated structurally from the top, so coefficients that
/// are only zero at stored precision cannot stall the division.
pub fn pdivrem(f: &Tower, num: &[Value], den: &[Value]) -> VlabResult<(Vec<Value>, Vec<Value>)> {
    let den = pnorm(f, den.to_vec());
    if den.is_empty() {
        return Err(VlabError::DivisionByZero);
    }
    let dd = den.len() - 1;
    let lead_inv = f.inv(den.last().unwrap())?;
    let mut rem: Vec<Value> = pnorm(f, num.to_vec());
    if rem.len() < den.len() {
        return Ok((Vec::new(), rem));
    }
    let mut quot = vec![f.zero(); rem.len() - dd];
    for shift in (0..=rem.len() - den.len()).rev() {
        let c = f.mul(&rem[shift + dd], &lead_inv)?;
        if f.is_zero(&c) {
            continue;
        }
        for (i, m) in den.iter().enumerate().take(dd) {
            let t = f.mul(&c, m)?;
            rem[shift + i] = f.sub(&rem[shift + i], &t)?;
        }
        quot[shift] = c;
    }
    rem.truncate(dd);
    Ok((pnorm(f, quot), pnorm(f, rem)))
}

pub fn pmonic(f: &Tower, a: &[Value]) -> VlabResult<Vec<Value>> {
    match a.last() {
        None => Ok(Vec::new()),
        Some(lc) => {
            let inv = f.inv(lc)?;
            pscale(f, a, &inv)
        }
    }
}

/// Monic greatest common divisor (exact coefficient fields).
pub fn pgcd(f: &Tower, a: &[Value], b: &[Value]) -> VlabResult<Vec<Value>> {
    let mut x = pnorm(f, a.to_vec());
    let mut y = pnorm(f, b.to_vec());
    while !y.is_empty() {
        let (_, r) = pdivrem(f, &x, &y)?;
        x = y;
        y = r;
    }
    pmonic(f, &x)
}

/// Extended Euclid: returns `(g, s, t)` with `s a + t b = g`, `g` monic.
pub fn pext_gcd(
    f: &Tower,
    a: &[Value],
    b: &[Value],
) -> VlabResult<(Vec<Value>, Vec<Value>, Vec<Value>)> {
    let mut r0 = pnorm(f, a.to_vec());
    let mut r1 = pnorm(f, b.to_vec());
    let mut s0 = vec![f.one()];
    let mut s1: Vec<Value> = Vec::new();
    let mut t0: Vec<Value> = Vec::new();
    let mut t1 = vec![f.one()];
    while !r1.is_empty() {
        let (q, r) = pdivrem(f, &r0, &r1)?;
        let qs = pmul(f, &q, &s1)?;
        let qt = pmul(f, &q, &t1)?;
        let ns = psub(f, &s0, &qs)?;
        let nt = psub(f, &t0, &qt)?;
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = ns;
        t0 = t1;
        t1 = nt;
    }
    // normalize to monic g
    match r0.last() {
        None => Ok((Vec::new(), Vec::new(), Vec::new())),
        Some(lc) => {
            let inv = f.inv(lc)?;
            Ok((pscale(f, &r0, &inv)?, pscale(f, &s0, &inv)?, pscale(f, &t0, &inv)?))
        }
    }
}

/// Horner evaluation.
pub fn peval(f: &Tower, poly: &[Value], x: &Value) -> VlabResult<Value> {
    let mut acc = f.zero();
    for c in poly.iter().rev() {
        acc = f.mul(&acc, x)?;
        acc = f.add(&acc, c)?;
    }
    Ok(acc)
}

pub fn pderiv(f: &Tower, poly: &[Value]) -> VlabResult<Vec<Value>> {
    let mut out = Vec::new();
    for (i, c) in poly.iter().enumerate().skip(1) {
        let k = f.from_i64(i as i64);
        out.push(f.mul(c, &k)?);
    }
    Ok(pnorm(f, out))
}

/// Exact polynomial square root in characteristic != 2, if one exists.
pub fn psqrt(f: &Tower, a: &[Value]) -> VlabResult<Option<Vec<Value>>> {
    if a.is_empty() {
        return Ok(Some(Vec::new()));
    }
    let deg = a.len() - 1;
    if deg % 2 != 0 {
        return Ok(None);
    }
    let half = deg / 2;
    // leading coefficient must be a square in the coefficient field; the
    // callers only use this over fields with a square-root decision
    let lc_root = match f.sqrt_in_field(a.last().unwrap())? {
        Some(r) => r,
        None => return Ok(None),
    };
    // undetermined-coefficient descent from the top
    let mut root = vec![f.zero(); half + 1];
    root[half] = lc_root;
    let two_lc_inv = f.inv(&f.mul(&f.from_i64(2), &root[half])?)?;
    for i in (0..half).rev() {
        // coefficient of X^(half + i) in root^2 must match a[half + i]
        let mut acc = a[half + i].clone();
        for j in (i + 1)..=half {
            let l = half + i - j;
            if l > half || l <= i {
                continue;
            }
            let t = f.mul(&root[j], &root[l])?;
            acc = f.sub(&acc, &t)?;
        }
        root[i] = f.mul(&acc, &two_lc_inv)?;
    }
    let sq = pmul(f, &root, &root)?;
    let diff = psub(f, &sq, a)?;
    if diff.is_empty() {
        Ok(Some(pnorm(f, root)))
    } else {
        Ok(None)
    }
}
