//! Arithmetic dispatch: canonical forms, precision bookkeeping, display.

use num::{BigInt, One, Signed, Zero};

use super::poly::{self, pnorm};
use super::value::{AsVal, Padic, Quot, Rat, Series, Value};
use super::{rat_i, Node, Tower};
use crate::error::{VlabError, VlabResult};

impl Tower {
    pub fn zero(&self) -> Value {
        match &*self.0 {
            Node::Finite(ff) => Value::Fin(ff.zero()),
            Node::Rationals => Value::Rat(Rat::zero()),
            Node::RatFunc { base, .. } => Value::Quot(Box::new(Quot {
                num: vec![],
                den: vec![base.one()],
            })),
            Node::Series { .. } => Value::Ser(Box::new(Series::exact_zero())),
            Node::PAdic { .. } => Value::Pad(Padic::exact(Rat::zero())),
            Node::Ext { base, modulus, .. } => {
                Value::Ext(vec![base.zero(); modulus.len() - 1])
            }
            Node::AsClosure { base, .. } => Value::As(AsVal {
                stage: 0,
                rep: Box::new(base.zero()),
            }),
        }
    }

    pub fn one(&self) -> Value {
        self.from_i64(1)
    }

    pub fn from_i64(&self, n: i64) -> Value {
        match &*self.0 {
            Node::Finite(ff) => Value::Fin(ff.from_i64(n)),
            Node::Rationals => Value::Rat(rat_i(n)),
            Node::PAdic { .. } => Value::Pad(Padic::exact(rat_i(n))),
            _ => {
                let base = self.base().expect("layered node has a base");
                self.embed_scalar(base.from_i64(n))
            }
        }
    }

    pub fn from_rat(&self, r: &Rat) -> VlabResult<Value> {
        match &*self.0 {
            Node::Finite(ff) => {
                let p = BigInt::from(ff.p);
                let den = r.denom();
                if (den % &p).is_zero() {
                    return Err(VlabError::Domain(format!(
                        "rational {} has denominator divisible by the characteristic",
                        r
                    )));
                }
                let num = self.from_bigint_fin(r.numer(), ff);
                let denv = self.from_bigint_fin(den, ff);
                self.div(&Value::Fin(num), &Value::Fin(denv))
            }
            Node::Rationals => Ok(Value::Rat(r.clone())),
            Node::PAdic { .. } => Ok(Value::Pad(Padic::exact(r.clone()))),
            _ => {
                let base = self.base().expect("layered node has a base");
                Ok(self.embed_scalar(base.from_rat(r)?))
            }
        }
    }

    fn from_bigint_fin(&self, n: &BigInt, ff: &super::FiniteFf) -> Vec<u64> {
        let p = BigInt::from(ff.p);
        let mut m = n % &p;
        if m.is_negative() {
            m += &p;
        }
        let scalar: u64 = m.try_into().unwrap_or(0);
        let mut v = ff.zero();
        v[0] = scalar;
        v
    }

    /// Exact zero test (canonical representations).
    pub fn is_zero(&self, a: &Value) -> bool {
        match a {
            Value::Fin(c) => c.iter().all(|&x| x == 0),
            Value::Rat(r) => r.is_zero(),
            Value::Quot(q) => q.num.is_empty(),
            Value::Ser(s) => s.terms.is_empty() && s.known_to.is_none(),
            Value::Pad(p) => p.value.is_zero() && p.known_to.is_none(),
            Value::Ext(c) =>

 {
                let base = self.base().expect("ext base");
                c.iter().all(|x| base.is_zero(x))
            }
            Value::As(v) => {
                if v.stage == 0 {
                    self.base().expect("as base").is_zero(&v.rep)
                } else {
                    false // canonical values are trimmed to their minimal stage
                }
            }
        }
    }

    /// Zero test at stored precision: true when every stored coefficient is
    /// zero, i.e. the element cannot be distinguished from zero.
    pub fn is_zero_at_precision(&self, a: &Value) -> bool {
        match a {
            Value::Ser(s) => {
                let base = self.base().expect("series base");
                s.terms.iter().all(|(_, c)| base.is_zero_at_precision(c))
            }
            Value::Pad(p) => p.value.is_zero(),
            Value::Quot(q) => q.num.is_empty(),
            Value::Ext(c) => {
                let base = self.base().expect("ext base");
                c.iter().all(|x| base.is_zero_at_precision(x))
            }
            Value::As(v) => {
                v.stage == 0 && {
                    self.base()
                        .expect("as base")
                        .is_zero_at_precision(&v.rep)
                }
            }
            _ => self.is_zero(a),
        }
    }

    /// Structural equality of canonical forms (distinct precisions compare
    /// unequal; use [`Tower::eq_at_precision`] for the coarser test).
    pub fn eq_values(&self, a: &Value, b: &Value) -> bool {
        a == b
    }

    /// Equality up to the joint stored precision.
    pub fn eq_at_precision(&self, a: &Value, b: &Value) -> VlabResult<bool> {
        let d = self.sub(a, b)?;
        Ok(self.is_zero_at_precision(&d))
    }

    pub fn add(&self, a: &Value, b: &Value) -> VlabResult<Value> {
        match (&*self.0, a, b) {
            (Node::Finite(ff), Value::Fin(x), Value::Fin(y)) => Ok(Value::Fin(ff.add(x, y))),
            (Node::Rationals, Value::Rat(x), Value::Rat(y)) => Ok(Value::Rat(x + y)),
            (Node::RatFunc { base, .. }, Value::Quot(x), Value::Quot(y)) => {
                // x.num/x.den + y.num/y.den
                let n1 = poly::pmul(base, &x.num, &y.den)?;
                let n2 = poly::pmul(base, &y.num, &x.den)?;
                let num = poly::padd(base, &n1, &n2)?;
                let den = poly::pmul(base, &x.den, &y.den)?;
                self.quot_canonical(num, den)
            }
            (Node::Series { base, .. }, Value::Ser(x), Value::Ser(y)) => {
                Ok(Value::Ser(Box::new(self.ser_add(base, x, y)?)))
            }
            (Node::PAdic { p, .. }, Value::Pad(x), Value::Pad(y)) => {
                let known = opt_min_i(&x.known_to, &y.known_to);
                Ok(Value::Pad(self.pad_canonical(
                    Padic {
                        value: &x.value + &y.value,
                        known_to: known,
                    },
                    *p,
                )))
            }
            (Node::Ext { base, .. }, Value::Ext(x), Value::Ext(y)) => {
                let coords: VlabResult<Vec<Value>> =
                    x.iter().zip(y).map(|(u, v)| base.add(u, v)).collect();
                Ok(Value::Ext(coords?))
            }
            (Node::AsClosure { .. }, Value::As(_), Value::As(_)) => {
                self.as_binop(a, b, |f, x, y| f.add(x, y))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    pub fn neg(&self, a: &Value) -> VlabResult<Value> {
        match (&*self.0, a) {
            (Node::Finite(ff), Value::Fin(x)) => Ok(Value::Fin(ff.neg(x))),
            (Node::Rationals, Value::Rat(x)) => Ok(Value::Rat(-x)),
            (Node::RatFunc { base, .. }, Value::Quot(x)) => Ok(Value::Quot(Box::new(Quot {
                num: poly::pneg(base, &x.num)?,
                den: x.den.clone(),
            }))),
            (Node::Series { base, .. }, Value::Ser(x)) => {
                let terms: VlabResult<Vec<(Rat, Value)>> = x
                    .terms
                    .iter()
                    .map(|(e, c)| Ok((e.clone(), base.neg(c)?)))
                    .collect();
                Ok(Value::Ser(Box::new(Series {
                    terms: terms?,
                    known_to: x.known_to.clone(),
                })))
            }
            (Node::PAdic { p, .. }, Value::Pad(x)) => Ok(Value::Pad(self.pad_canonical(
                Padic {
                    value: -&x.value,
                    known_to: x.known_to,
                },
                *p,
            ))),
            (Node::Ext { base, .. }, Value::Ext(x)) => {
                let coords: VlabResult<Vec<Value>> = x.iter().map(|u| base.neg(u)).collect();
                Ok(Value::Ext(coords?))
            }
            (Node::AsClosure { .. }, Value::As(_)) => {
                self.as_unop(a, |f, x| f.neg(x))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    pub fn sub(&self, a: &Value, b: &Value) -> VlabResult<Value> {
        let nb = self.neg(b)?;
        self.add(a, &nb)
    }

    pub fn mul(&self, a: &Value, b: &Value) -> VlabResult<Value> {
        match (&*self.0, a, b) {
            (Node::Finite(ff), Value::Fin(x), Value::Fin(y)) => Ok(Value::Fin(ff.mul(x, y))),
            (Node::Rationals, Value::Rat(x), Value::Rat(y)) => Ok(Value::Rat(x * y)),
            (Node::RatFunc { base, .. }, Value::Quot(x), Value::Quot(y)) => {
                let num = poly::pmul(base, &x.num, &y.num)?;
                let den = poly::pmul(base, &x.den, &y.den)?;
                self.quot_canonical(num, den)
            }
            (Node::Series { base, .. }, Value::Ser(x), Value::Ser(y)) => {
                Ok(Value::Ser(Box::new(self.ser_mul(base, x, y)?)))
            }
            (Node::PAdic { p, .. }, Value::Pad(x), Value::Pad(y)) => {
                Ok(Value::Pad(self.pad_mul(x, y, *p)))
            }
            (Node::Ext { base, modulus, .. }, Value::Ext(x), Value::Ext(y)) => {
                let prod = poly::pmul(base, x, y)?;
                let (_, rem) = poly::pdivrem(base, &prod, modulus)?;
                Ok(self.ext_from_poly(base, rem, modulus.len() - 1))
            }
            (Node::AsClosure { .. }, Value::As(_), Value::As(_)) => {
                self.as_binop(a, b, |f, x, y| f.mul(x, y))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    pub fn inv(&self, a: &Value) -> VlabResult<Value> {
        match (&*self.0, a) {
            (Node::Finite(ff), Value::Fin(x)) => Ok(Value::Fin(ff.inv(x)?)),
            (Node::Rationals, Value::Rat(x)) => {
                if x.is_zero() {
                    Err(VlabError::DivisionByZero)
                } else {
                    Ok(Value::Rat(x.recip()))
                }
            }
            (Node::RatFunc { .. }, Value::Quot(x)) => {
                if x.num.is_empty() {
                    return Err(VlabError::DivisionByZero);
                }
                self.quot_canonical(x.den.clone(), x.num.clone())
            }
            (Node::Series { base, prec, .. }, Value::Ser(x)) => {
                Ok(Value::Ser(Box::new(self.ser_inv(base, x, *prec)?)))
            }
            (Node::PAdic { p, prec }, Value::Pad(x)) => {
                if x.value.is_zero() {
                    return if x.known_to.is_none() {
                        Err(VlabError::DivisionByZero)
                    } else {
                        Err(VlabError::PrecisionExhausted(
                            "inverting an element that is zero at stored precision".into(),
                        ))
                    };
                }
                let _ = prec;
                let e = padic_valuation(&x.value, *p).expect("nonzero");
                let known = x.known_to.map(|k| k - 2 * e);
                Ok(Value::Pad(self.pad_canonical(
                    Padic {
                        value: x.value.recip(),
                        known_to: known,
                    },
                    *p,
                )))
            }
            (Node::Ext { base, modulus, .. }, Value::Ext(x)) => {
                let xa = pnorm(base, x.clone());
                if xa.is_empty() {
                    return Err(VlabError::DivisionByZero);
                }
                let (g, s, _) = poly::pext_gcd(base, &xa, modulus)?;
                if poly::pdeg(&g) != Some(0) {
                    return Err(VlabError::Domain(
                        "zero divisor in extension: modulus is not irreducible over this base"
                            .into(),
                    ));
                }
                // s * x = g (a unit); scale s by g^{-1}
                let ginv = base.inv(&g[0])?;
                let inv = poly::pscale(base, &s, &ginv)?;
                let (_, rem) = poly::pdivrem(base, &inv, modulus)?;
                Ok(self.ext_from_poly(base, rem, modulus.len() - 1))
            }
            (Node::AsClosure { .. }, Value::As(_)) => self.as_unop(a, |f, x| f.inv(x)),
            _ => Err(self.mismatch(a)),
        }
    }

    pub fn div(&self, a: &Value, b: &Value) -> VlabResult<Value> {
        let ib = self.inv(b)?;
        self.mul(a, &ib)
    }

    pub fn pow_i64(&self, a: &Value, e: i64) -> VlabResult<Value> {
        if e < 0 {
            let ia = self.inv(a)?;
            return self.pow_i64(&ia, -e);
        }
        let mut acc = self.one();
        let mut base = a.clone();
        let mut k = e as u64;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            k >>= 1;
            if k > 0 {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    fn mismatch(&self, a: &Value) -> VlabError {
        VlabError::FieldMismatch(format!(
            "value {:?} does not match field {}",
            variant_name(a),
            self.name()
        ))
    }

    // ----- rational functions -----

    pub(crate) fn quot_canonical(&self, num: Vec<Value>, den: Vec<Value>) -> VlabResult<Value> {
        let base = self.base().expect("ratfunc base");
        let num = pnorm(base, num);
        let den = pnorm(base, den);
        if den.is_empty() {
            return Err(VlabError::DivisionByZero);
        }
        if num.is_empty() {
            return Ok(Value::Quot(Box::new(Quot {
                num: vec![],
                den: vec![base.one()],
            })));
        }
        let g = poly::pgcd(base, &num, &den)?;
        let (num, den) = if poly::pdeg(&g) == Some(0) {
            (num, den)
        } else {
            let (qn, _) = poly::pdivrem(base, &num, &g)?;
            let (qd, _) = poly::pdivrem(base, &den, &g)?;
            (qn, qd)
        };
        // normalize the denominator to be monic
        let lc = den.last().unwrap().clone();
        let lcinv = base.inv(&lc)?;
        let den = poly::pscale(base, &den, &lcinv)?;
        let num = poly::pscale(base, &num, &lcinv)?;
        Ok(Value::Quot(Box::new(Quot { num, den })))
    }

    // ----- series -----

    fn ser_window(&self) -> Rat {
        match &*self.0 {
            Node::Series { prec, .. } => rat_i(*prec as i64 + 1),
            _ => unreachable!("series window on non-series node"),
        }
    }

    fn ser_add(&self, base: &Tower, x: &Series, y: &Series) -> VlabResult<Series> {
        let known = opt_min(&x.known_to, &y.known_to);
        let mut terms: Vec<(Rat, Value)> = Vec::with_capacity(x.terms.len() + y.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < x.terms.len() || j < y.terms.len() {
            let take_x = match (x.terms.get(i), y.terms.get(j)) {
                (Some((ex, _)), Some((ey, _))) => {
                    if ex == ey {
                        let c = base.add(&x.terms[i].1, &y.terms[j].1)?;
                        if !base.is_zero(&c) {
                            terms.push((ex.clone(), c));
                        }
                        i += 1;
                        j += 1;
                        continue;
                    }
                    ex < ey
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_x {
                terms.push(x.terms[i].clone());
                i += 1;
            } else {
                terms.push(y.terms[j].clone());
                j += 1;
            }
        }
        Ok(self.ser_trim(Series {
            terms,
            known_to: known,
        }))
    }

    fn ser_mul(&self, base: &Tower, x: &Series, y: &Series) -> VlabResult<Series> {
        // exact zero absorbs
        if x.terms.is_empty() && x.known_to.is_none() {
            return Ok(Series::exact_zero());
        }
        if y.terms.is_empty() && y.known_to.is_none() {
            return Ok(Series::exact_zero());
        }
        let known = {
            // candidates k_x + vlow(y), k_y + vlow(x); vlow of a truncated
            // zero is its precision bound
            let mut k: Option<Rat> = None;
            if let Some(kx) = &x.known_to {
                if let Some(vy) = ser_vlow(y) {
                    k = opt_min(&k, &Some(kx + vy));
                } // vlow None means y is exact zero, handled above
            }
            if let Some(ky) = &y.known_to {
                if let Some(vx) = ser_vlow(x) {
                    k = opt_min(&k, &Some(ky + vx));
                }
            }
            k
        };
        let mut acc: std::collections::BTreeMap<Rat, Value> = std::collections::BTreeMap::new();
        for (ex, cx) in &x.terms {
            for (ey, cy) in &y.terms {
                let e = ex + ey;
                if let Some(k) = &known {
                    if &e >= k {
                        continue;
                    }
                }
                let c = base.mul(cx, cy)?;
                match acc.entry(e) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(c);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        let s = base.add(o.get(), &c)?;
                        *o.get_mut() = s;
                    }
                }
            }
        }
        Ok(self.ser_trim(Series {
            terms: acc.into_iter().collect(),
            known_to: known,
        }))
    }

    /// Inversion by Newton doubling: `y <- y + y (1 - x y)`; the residual
    /// squares each pass in every characteristic, since
    /// `1 - x y (2 - x y) = (1 - x y)^2` is a ring identity.
    fn ser_inv(&self, base: &Tower, x: &Series, _prec: u32) -> VlabResult<Series> {
        if x.terms.is_empty() {
            return if x.known_to.is_none() {
                Err(VlabError::DivisionByZero)
            } else {
                Err(VlabError::PrecisionExhausted(
                    "inverting a series that is zero at stored precision".into(),
                ))
            };
        }
        let (e0, c0) = x.terms[0].clone();
        if base.is_zero_at_precision(&c0) {
            return Err(VlabError::PrecisionExhausted(
                "leading series coefficient is indeterminate".into(),
            ));
        }
        let c0inv = base.inv(&c0)?;
        // exact monomials invert exactly
        if x.terms.len() == 1 && x.known_to.is_none() {
            return Ok(Series {
                terms: vec![(-e0, c0inv)],
                known_to: None,
            });
        }
        let window = self.ser_window();
        let rel = match &x.known_to {
            None => window.clone(),
            Some(k) => {
                let r = k - &e0;
                if r > window {
                    window.clone()
                } else {
                    r
                }
            }
        };
        // truncated working copy of x so products stay within the window
        let xt = Series {
            terms: x
                .terms
                .iter()
                .filter(|(e, _)| e - &e0 < rel)
                .cloned()
                .collect(),
            known_to: Some(&e0 + &rel),
        };
        // relative accuracy: y = x^{-1} (1 + O(t^rho)); starts at the gap to
        // the second term and doubles each pass, with y truncated to its
        // accuracy so unconverged slots never accumulate garbage
        let mut rho = xt
            .terms
            .get(1)
            .map(|(e, _)| e - &e0)
            .unwrap_or_else(|| rel.clone());
        let mut y = Series {
            terms: vec![(-e0.clone(), c0inv)],
            known_to: Some(-&e0 + &rho),
        };
        let one = Series {
            terms: vec![(Rat::zero(), base.one())],
            known_to: None,
        };
        for _ in 0..64 {
            if rho >= rel {
                break;
            }
            let next = {
                let d = &rho + &rho;
                if d > rel {
                    rel.clone()
                } else {
                    d
                }
            };
            y.known_to = Some(-&e0 + &next);
            let xy = self.ser_mul(base, &xt, &y)?;
            let merr = self.ser_add(base, &one, &{
                let mut n = xy;
                for t in n.terms.iter_mut() {
                    t.1 = base.neg(&t.1)?;
                }
                n
            })?;
            if !merr.terms.is_empty() {
                let corr = self.ser_mul(base, &y, &merr)?;
                y = self.ser_add(base, &y, &corr)?;
            }
            y.known_to = Some(-&e0 + &next);
            let bound = -&e0 + &next;
            y.terms.retain(|(e, _)| *e < bound);
            rho = next;
        }
        y.known_to = Some(-&e0 + rel);
        Ok(self.ser_trim(y))
    }

    fn ser_trim(&self, mut s: Series) -> Series {
        let base = self.base().expect("series base");
        if let Some(k) = &s.known_to {
            s.terms.retain(|(e, _)| e < k);
        }
        s.terms.retain(|(_, c)| !base.is_zero(c));
        if let Node::Series { puiseux, .. } = &*self.0 {
            if !*puiseux {
                debug_assert!(s.terms.iter().all(|(e, _)| e.is_integer()));
            }
        }
        s
    }

    /// Truncate a series value so that nothing at or above the absolute
    /// exponent bound is asserted. Used by iterative lifters to keep exact
    /// intermediate results from growing without bound.
    pub fn series_truncate(&self, a: &Value, bound: &Rat) -> VlabResult<Value> {
        match (&*self.0, a) {
            (Node::Series { .. }, Value::Ser(s)) => {
                let known = match &s.known_to {
                    None => Some(bound.clone()),
                    Some(k) => Some(k.min(bound).clone()),
                };
                Ok(Value::Ser(Box::new(self.ser_trim(Series {
                    terms: s.terms.clone(),
                    known_to: known,
                }))))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    /// Digit expansion of a p-adic value up to (not including) exponent
    /// `upto`: returns the leading exponent and the digits from there.
    pub fn padic_digits(&self, a: &Value, upto: i64) -> VlabResult<(i64, Vec<u64>)> {
        match (&*self.0, a) {
            (Node::PAdic { p, .. }, Value::Pad(x)) => {
                if x.value.is_zero() {
                    return Ok((upto, vec![]));
                }
                let e = padic_valuation(&x.value, *p).expect("nonzero");
                if e >= upto {
                    return Ok((upto, vec![]));
                }
                let unit = &x.value / big_pow(*p, e);
                let modulus = big_pow_u(*p, (upto - e) as u64);
                let m = modulus.numer();
                let dinv = mod_inverse(unit.denom(), m).ok_or_else(|| {
                    VlabError::Domain("denominator not a p-unit".into())
                })?;
                let mut n = ((unit.numer() * dinv) % m + m) % m;
                let pb = BigInt::from(*p);
                let mut digits = Vec::new();
                for _ in e..upto {
                    let d = (&n % &pb + &pb) % &pb;
                    digits.push(u64::try_from(d.clone()).unwrap_or(0));
                    n = (&n - &d) / &pb;
                }
                Ok((e, digits))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    /// Truncate a p-adic value to `O(p^bound)`.
    pub fn padic_truncate(&self, a: &Value, bound: i64) -> VlabResult<Value> {
        match (&*self.0, a) {
            (Node::PAdic { p, .. }, Value::Pad(x)) => {
                let known = match x.known_to {
                    None => Some(bound),
                    Some(k) => Some(k.min(bound)),
                };
                Ok(Value::Pad(self.pad_canonical(
                    Padic {
                        value: x.value.clone(),
                        known_to: known,
                    },
                    *p,
                )))
            }
            _ => Err(self.mismatch(a)),
        }
    }

    // ----- p-adics -----

    fn pad_canonical(&self, x: Padic, p: u64) -> Padic {
        match x.known_to {
            None => x,
            Some(k) => {
                if x.value.is_zero() {
                    return Padic {
                        value: Rat::zero(),
                        known_to: Some(k),
                    };
                }
                let e = padic_valuation(&x.value, p).expect("nonzero");
                if e >= k {
                    return Padic {
                        value: Rat::zero(),
                        known_to: Some(k),
                    };
                }
                // reduce the unit part mod p^(k - e)
                let pe = big_pow(p, e);
                let unit = &x.value / &pe;
                let modulus = big_pow_u(p, (k - e) as u64);
                let m = modulus.numer();
                let num = unit.numer();
                let den = unit.denom();
                let dinv = mod_inverse(den, m).expect("unit denominator is coprime to p");
                let r = ((num * dinv) % m + m) % m;
                Padic {
                    value: Rat::from_integer(r) * pe,
                    known_to: Some(k),
                }
            }
        }
    }

    fn pad_mul(&self, x: &Padic, y: &Padic, p: u64) -> Padic {
        let vx = pad_vlow(x, p);
        let vy = pad_vlow(y, p);
        let mut known: Option<i64> = None;
        if let Some(kx) = x.known_to {
            known = opt_min_i(&known, &vy.map(|v| kx + v));
            if vy.is_none() {
                // y is exactly zero; product is exact zero
                return Padic::exact(Rat::zero());
            }
        }
        if let Some(ky) = y.known_to {
            known = opt_min_i(&known, &vx.map(|v| ky + v));
            if vx.is_none() {
                return Padic::exact(Rat::zero());
            }
        }
        self.pad_canonical(
            Padic {
                value: &x.value * &y.value,
                known_to: known,
            },
            p,
        )
    }

    // ----- extensions -----

    fn ext_from_poly(&self, base: &Tower, mut rem: Vec<Value>, degree: usize) -> Value {
        rem.resize(degree, base.zero());
        Value::Ext(rem)
    }

    pub(crate) fn ext_degree(&self) -> Option<usize> {
        match &*self.0 {
            Node::Ext { modulus, .. } => Some(modulus.len() - 1),
            _ => None,
        }
    }


    // ----- ordered models -----

    /// Exact sign in an ordered model: the rationals, or series fields over an
    /// ordered base with the infinitesimal-positive-variable order (the sign
    /// of a nonzero series is the sign of its leading coefficient).
    pub fn sign_exact(&self, a: &Value) -> VlabResult<i8> {
        match (&*self.0, a) {
            (Node::Rationals, Value::Rat(r)) => Ok(if r.is_zero() {
                0
            } else if r.is_positive() {
                1
            } else {
                -1
            }),
            (Node::Series { base, ordered, .. }, Value::Ser(s)) => {
                if !*ordered {
                    return Err(VlabError::NotOrderable);
                }
                match s.terms.first() {
                    None => {
                        if s.known_to.is_none() {
                            Ok(0)
                        } else {
                            Err(VlabError::PrecisionExhausted(
                                "sign of a series that is zero at stored precision".into(),
                            ))
                        }
                    }
                    Some((_, c)) => base.sign_exact(c),
                }
            }
            _ => Err(VlabError::NotOrderable),
        }
    }

    /// `a < b` in the declared order.
    pub fn lt_order(&self, a: &Value, b: &Value) -> VlabResult<bool> {
        let d = self.sub(b, a)?;
        Ok(self.sign_exact(&d)? > 0)
    }

    // ----- display -----

    pub fn fmt_value(&self, a: &Value) -> String {
        match (&*self.0, a) {
            (Node::Finite(ff), Value::Fin(c)) => {
                if ff.k == 1 {
                    format!("{}", c[0])
                } else {
                    scalar_poly_display(c, "g")
                }
            }
            (Node::Rationals, Value::Rat(r)) => format!("{}", r),
            (Node::RatFunc { base, var }, Value::Quot(q)) => {
                if q.num.is_empty() {
                    return "0".to_string();
                }
                let n = poly_display(base, &q.num, var);
                if poly::pdeg(&q.den) == Some(0) {
                    n
                } else {
                    format!("({})/({})", n, poly_display(base, &q.den, var))
                }
            }
            (Node::Series { base, var, .. }, Value::Ser(s)) => {
                let mut parts: Vec<String> = Vec::new();
                for (e, c) in &s.terms {
                    let cs = base.fmt_value(c);
                    let cs = if cs.contains(' ') || cs.contains('+') || cs.contains('/') {
                        format!("({})", cs)
                    } else {
                        cs
                    };
                    let t = if e.is_zero() {
                        cs
                    } else {
                        let ex = if e.is_integer() && !e.is_negative() && e.is_one() {
                            var.to_string()
                        } else if e.is_integer() {
                            format!("{}^{}", var, e)
                        } else {
                            format!("{}^({})", var, e)
                        };
                        if cs == "1" {
                            ex
                        } else {
                            format!("{}*{}", cs, ex)
                        }
                    };
                    parts.push(t);
                }
                if let Some(k) = &s.known_to {
                    let ks = if k.is_integer() {
                        format!("{}", k)
                    } else {
                        format!("({})", k)
                    };
                    parts.push(format!("O({}^{})", var, ks));
                }
                if parts.is_empty() {
                    "0".to_string()
                } else {
                    join_signed(&parts)
                }
            }
            (Node::PAdic { p, .. }, Value::Pad(x)) => pad_display(x, *p),
            (Node::Ext { base, var, .. }, Value::Ext(c)) => {
                let parts = value_poly_display(base, c, var);
                if parts.is_empty() {
                    "0".to_string()
                } else {
                    parts
                }
            }
            (Node::AsClosure { log, .. }, Value::As(v)) => {
                let guard = log.read().unwrap();
                let ctx = guard.ctx(v.stage);
                ctx.fmt_value(&v.rep)
            }
            _ => format!("{:?}", a),
        }
    }
}

// ----- free helpers -----

fn variant_name(a: &Value) -> &'static str {
    match a {
        Value::Fin(_) => "finite-field element",
        Value::Rat(_) => "rational",
        Value::Quot(_) => "rational function",
        Value::Ser(_) => "series",
        Value::Pad(_) => "p-adic",
        Value::Ext(_) => "extension element",
        Value::As(_) => "Artin-Schreier tower element",
    }
}

pub(crate) fn ser_vlow(s: &Series) -> Option<Rat> {
    // a lower bound for the valuation: first stored exponent, else the
    // precision bound; None means the element is exactly zero
    match s.terms.first() {
        Some((e, _)) => Some(e.clone()),
        None => s.known_to.clone(),
    }
}

pub(crate) fn pad_vlow(x: &Padic, p: u64) -> Option<i64> {
    match padic_valuation(&x.value, p) {
        Some(v) => Some(v),
        None => x.known_to,
    }
}

/// `p^e` as an exact rational (negative exponents allowed).
pub fn rat_pow(p: u64, e: i64) -> Rat {
    big_pow(p, e)
}

/// Reduce a p-unit rational mod p (the residue digit).
pub fn rat_mod_prime(r: &Rat, p: u64) -> crate::error::VlabResult<u64> {
    let pb = BigInt::from(p);
    let dinv = mod_inverse(r.denom(), &pb).ok_or_else(|| {
        crate::error::VlabError::Domain("denominator is not a p-unit".into())
    })?;
    let m = ((r.numer() * dinv) % &pb + &pb) % &pb;
    Ok(m.try_into().unwrap_or(0))
}

/// p-adic valuation of an exact rational; `None` for zero.
pub fn padic_valuation(r: &Rat, p: u64) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut num = r.numer().clone();
    let mut den = r.denom().clone();
    let mut v: i64 = 0;
    while (&num % &p).is_zero() {
        num /= &p;
        v += 1;
    }
    while (&den % &p).is_zero() {
        den /= &p;
        v -= 1;
    }
    Some(v)
}

fn big_pow(p: u64, e: i64) -> Rat {
    let b = BigInt::from(p);
    if e >= 0 {
        Rat::from_integer(num::pow::pow(b, e as usize))
    } else {
        Rat::new(BigInt::one(), num::pow::pow(b, (-e) as usize))
    }
}

fn big_pow_u(p: u64, e: u64) -> Rat {
    Rat::from_integer(num::pow::pow(BigInt::from(p), e as usize))
}

pub(crate) fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let (mut r0, mut r1) = (m.clone(), ((a % m) + m) % m);
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r = &r0 - &q * &r1;
        r0 = r1;
        r1 = r;
        let t = &t0 - &q * &t1;
        t0 = t1;
        t1 = t;
    }
    if r0.is_one() {
        Some(((t0 % m) + m) % m)
    } else {
        None
    }
}

fn pad_display(x: &Padic, p: u64) -> String {
    match x.known_to {
        None => format!("{}", x.value),
        Some(k) => {
            if x.value.is_zero() {
                return format!("O({}^{})", p, k);
            }
            let e = padic_valuation(&x.value, p).expect("nonzero");
            // digits of the canonical representative
            let pe = big_pow(p, e);
            let unit = &x.value / pe;
            let mut n = unit.to_integer();
            let pb = BigInt::from(p);
            let mut parts: Vec<String> = Vec::new();
            let mut exp = e;
            while !n.is_zero() && exp < k {
                let d = (&n % &pb + &pb) % &pb;
                if !d.is_zero() {
                    let t = match exp {
                        0 => format!("{}", d),
                        1 => {
                            if d.is_one() {
                                format!("{}", p)
                            } else {
                                format!("{}*{}", d, p)
                            }
                        }
                        _ => {
                            if d.is_one() {
                                format!("{}^{}", p, exp)
                            } else {
                                format!("{}*{}^{}", d, p, exp)
                            }
                        }
                    };
                    parts.push(t);
                }
                n = (&n - &d) / &pb;
                exp += 1;
            }
            parts.push(format!("O({}^{})", p, k));
            parts.join(" + ")
        }
    }
}

fn scalar_poly_display(c: &[u64], var: &str) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (i, &x) in c.iter().enumerate().rev() {
        if x == 0 {
            continue;
        }
        let t = match i {
            0 => format!("{}", x),
            1 => {
                if x == 1 {
                    var.to_string()
                } else {
                    format!("{}*{}", x, var)
                }
            }
            _ => {
                if x == 1 {
                    format!("{}^{}", var, i)
                } else {
                    format!("{}*{}^{}", x, var, i)
                }
            }
        };
        parts.push(t);
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        join_signed(&parts)
    }
}

/// Join displayed terms, folding `+ -x` into `- x`.
pub(crate) fn join_signed(parts: &[String]) -> String {
    let mut out = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i == 0 {
            out.push_str(p);
        } else if let Some(rest) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(p);
        }
    }
    out
}

pub(crate) fn value_poly_display(base: &Tower, c: &[Value], var: &str) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (i, x) in c.iter().enumerate().rev() {
        if base.is_zero(x) {
            continue;
        }
        let cs = base.fmt_value(x);
        let needs_parens = cs.contains(' ') || cs.contains('+') || cs.contains('/');
        let cs_wrapped = if needs_parens { format!("({})", cs) } else { cs.clone() };
        let t = match i {
            0 => cs,
            1 => {
                if cs_wrapped == "1" {
                    var.to_string()
                } else {
                    format!("{}*{}", cs_wrapped, var)
                }
            }
            _ => {
                if cs_wrapped == "1" {
                    format!("{}^{}", var, i)
                } else {
                    format!("{}*{}^{}", cs_wrapped, var, i)
                }
            }
        };
        parts.push(t);
    }
    join_signed(&parts)
}

pub(crate) fn poly_display(base: &Tower, c: &[Value], var: &str) -> String {
    let s = value_poly_display(base, c, var);
    if s.is_empty() {
        "0".to_string()
    } else {
        s
    }
}

fn opt_min(a: &Option<Rat>, b: &Option<Rat>) -> Option<Rat> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) => Some(x.clone()),
        (None, Some(y)) => Some(y.clone()),
        (Some(x), Some(y)) => Some(x.min(y).clone()),
    }
}

fn opt_min_i(a: &Option<i64>, b: &Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) => Some(*x),
        (None, Some(y)) => Some(*y),
        (Some(x), Some(y)) => Some(*x.min(y)),
    }
}
