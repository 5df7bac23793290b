//! Seeded deterministic element samplers.
//!
//! All randomized checks in the workbench draw from a [`Sampler`] seeded
//! explicitly, so reports are byte-reproducible for a fixed (input, seed).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::value::{Padic, Rat, Series, Value};
use super::{rat_i, Node, Tower};
use crate::error::VlabResult;

/// What kind of element a draw should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Anything, including zero.
    Any,
    /// Exactly-nonzero elements.
    NonZero,
    /// Elements with first-layer valuation zero (series/p-adic units;
    /// elsewhere the same as NonZero).
    Unit,
    /// Elements of the first-layer valuation ring (v >= 0).
    Integral,
}

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn derive(&mut self) -> Sampler {
        Sampler::new(self.rng.gen())
    }

    fn small_int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    /// Uniform draw from `lo..=hi`.
    pub fn sample_range(&mut self, lo: i64, hi: i64) -> i64 {
        self.small_int(lo, hi)
    }

    pub fn sample(&mut self, f: &Tower, profile: Profile) -> VlabResult<Value> {
        for _ in 0..64 {
            let v = self.raw_sample(f, profile)?;
            let ok = match profile {
                Profile::Any => true,
                Profile::NonZero | Profile::Unit => !f.is_zero_at_precision(&v),
                Profile::Integral => !f.is_zero(&v) || true,
            };
            if ok {
                return Ok(v);
            }
        }
        Ok(f.one())
    }

    fn raw_sample(&mut self, f: &Tower, profile: Profile) -> VlabResult<Value> {
        match &*f.0 {
            Node::Finite(ff) => {
                let coords = (0..ff.k)
                    .map(|_| self.rng.gen_range(0..ff.p))
                    .collect::<Vec<_>>();
                Ok(Value::Fin(coords))
            }
            Node::Rationals => {
                let num = self.small_int(-9, 9);
                let den = self.small_int(1, 9);
                Ok(Value::Rat(Rat::new(num.into(), den.into())))
            }
            Node::RatFunc { base, .. } => {
                let dn = self.small_int(0, 2) as usize;
                let dd = self.small_int(0, 1) as usize;
                let num = self.poly(base, dn)?;
                let mut den = self.poly_nonzero(base, dd)?;
                if den.is_empty() {
                    den = vec![base.one()];
                }
                f.quot_canonical(num, den)
            }
            Node::Series { base, prec, puiseux, .. } => {
                let lead: i64 = match profile {
                    Profile::Unit => 0,
                    Profile::Integral => self.small_int(0, 3),
                    _ => self.small_int(-3, 3),
                };
                let denom: i64 = if *puiseux {
                    [1, 2, 3][self.rng.gen_range(0..3usize)]
                } else {
                    1
                };
                let nterms = self.small_int(1, 4) as usize;
                let mut terms: Vec<(Rat, Value)> = Vec::new();
                let lead_rat = Rat::new(lead.into(), denom.into());
                // leading coefficient nonzero
                let c0 = self.nonzero(base)?;
                terms.push((lead_rat.clone(), c0));
                for _ in 1..nterms {
                    let off = self.small_int(1, *prec as i64 - 1);
                    let e = &lead_rat + rat_i(off) / rat_i(denom);
                    let c = self.raw_sample(base, Profile::Any)?;
                    if !base.is_zero(&c) && !terms.iter().any(|(ee, _)| *ee == e) {
                        terms.push((e, c));
                    }
                }
                terms.sort_by(|a, b| a.0.cmp(&b.0));
                // mix exact polynomials and truncated measurements
                let known_to = if self.rng.gen_range(0..4u8) == 0 {
                    None
                } else {
                    Some(&lead_rat + rat_i(*prec as i64 + 1))
                };
                Ok(Value::Ser(Box::new(Series { terms, known_to })))
            }
            Node::PAdic { p, prec } => {
                let e: i64 = match profile {
                    Profile::Unit => 0,
                    Profile::Integral => self.small_int(0, 3),
                    _ => self.small_int(-3, 3),
                };
                let unit = loop {
                    let n = self.small_int(1, (*p as i64).pow(3));
                    if n % *p as i64 != 0 {
                        break n;
                    }
                };
                let value = Rat::new(unit.into(), 1.into())
                    * pow_rat(*p, e);
                let known_to = if self.rng.gen_range(0..4u8) == 0 {
                    None
                } else {
                    Some(e + *prec as i64)
                };
                Ok(Value::Pad(Padic { value, known_to }).pipe_canonical(f))
            }
            Node::Ext { base, modulus, .. } => {
                let coords: VlabResult<Vec<Value>> = (0..modulus.len() - 1)
                    .map(|_| self.raw_sample(base, Profile::Any))
                    .collect();
                Ok(Value::Ext(coords?))
            }
            Node::AsClosure { base, log, .. } => {
                // mostly base-level draws; occasionally mix in a materialized
                // generator linearly (no fresh adjunctions from sampling)
                let b = self.raw_sample(base, profile)?;
                let guard = log.read().unwrap();
                if !guard.gens.is_empty() && self.rng.gen_range(0..5u8) == 0 {
                    let idx = self.rng.gen_range(0..guard.gens.len()) + 1;
                    let th = guard.generator_value(idx);
                    let ctx = guard.ctx(idx);
                    let lifted = {
                        let zero_stage = guard.trim(0, b);
                        guard.lift(&zero_stage, idx)
                    };
                    let sum = ctx.add(&lifted, &th.rep)?;
                    return Ok(Value::As(guard.trim(idx, sum)));
                }
                Ok(Value::As(guard.trim(0, b)))
            }
        }
    }

    fn nonzero(&mut self, f: &Tower) -> VlabResult<Value> {
        for _ in 0..32 {
            let v = self.raw_sample(f, Profile::NonZero)?;
            if !f.is_zero_at_precision(&v) {
                return Ok(v);
            }
        }
        Ok(f.one())
    }

    fn poly(&mut self, base: &Tower, deg: usize) -> VlabResult<Vec<Value>> {
        let mut out = Vec::with_capacity(deg + 1);
        for _ in 0..=deg {
            out.push(self.raw_sample(base, Profile::Any)?);
        }
        Ok(super::poly::pnorm(base, out))
    }

    fn poly_nonzero(&mut self, base: &Tower, deg: usize) -> VlabResult<Vec<Value>> {
        let mut out = self.poly(base, deg)?;
        if out.is_empty() {
            out = vec![self.nonzero(base)?];
        }
        Ok(out)
    }

    /// A pair of distinct samples.
    pub fn sample_pair(&mut self, f: &Tower, profile: Profile) -> VlabResult<(Value, Value)> {
        Ok((self.sample(f, profile)?, self.sample(f, profile)?))
    }
}

fn pow_rat(p: u64, e: i64) -> Rat {
    let b = num::BigInt::from(p);
    if e >= 0 {
        Rat::from_integer(num::pow::pow(b, e as usize))
    } else {
        Rat::new(1.into(), num::pow::pow(b, (-e) as usize))
    }
}

trait PipeCanonical {
    fn pipe_canonical(self, f: &Tower) -> Value;
}

impl PipeCanonical for Value {
    fn pipe_canonical(self, f: &Tower) -> Value {
        // normalize a freshly built p-adic through an add with zero
        f.add(&self, &f.zero()).unwrap_or(self)
    }
}

/// Convenience: sampled element with valuation-profile `lead` forced, for
/// series layers. Used by checks that need to span a valuation range.
pub fn series_with_lead(
    sampler: &mut Sampler,
    f: &Tower,
    lead: i64,
) -> VlabResult<Value> {
    let unit = sampler.sample(f, Profile::Unit)?;
    let t = match &*f.0 {
        Node::Series { var, .. } => f.generator(var).expect("series generator"),
        _ => return Ok(unit),
    };
    let shift = f.pow_i64(&t, lead)?;
    f.mul(&unit, &shift)
}
