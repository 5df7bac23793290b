//! Lazily materialized Artin-Schreier closures.
//!
//! The closure of a base field `B` of characteristic `p` is represented by an
//! append-only witness log of adjoined generators `th_i` with
//! `th_i^p - th_i = c_i`, where `c_i` is an element of the previously built
//! stage. Stage contexts are plain simple-extension towers over `B`, built on
//! demand and cached. Readers may run concurrently; adjunctions take the
//! single writer lock.

use super::value::{AsVal, Value};
use super::{Node, Tower};
use crate::error::{VlabError, VlabResult};

#[derive(Debug)]
pub(crate) struct AsGen {
    /// Right-hand side of `th^p - th = c`, a value of the previous stage.
    pub c: Value,
    pub name: String,
}

#[derive(Debug)]
pub(crate) struct AsLog {
    pub gens: Vec<AsGen>,
    /// `ctxs[0]` is the base; `ctxs[i]` is the degree-p extension of
    /// `ctxs[i-1]` by `th_i`.
    pub ctxs: Vec<Tower>,
    /// Whether every recorded `c_i` lies in the base field; keeps the fast
    /// complete solvability criterion applicable.
    pub all_base: bool,
}

impl AsLog {
    pub fn new(base: Tower) -> Self {
        AsLog {
            gens: Vec::new(),
            ctxs: vec![base],
            all_base: true,
        }
    }

    pub fn ctx(&self, stage: usize) -> &Tower {
        &self.ctxs[stage]
    }

    pub fn top_stage(&self) -> usize {
        self.gens.len()
    }

    /// The stage-`idx` generator as a closure value (`idx >= 1`).
    pub fn generator_value(&self, idx: usize) -> AsVal {
        let ctx = &self.ctxs[idx];
        let root = ctx
            .generator(&self.gens[idx - 1].name)
            .expect("stage context exposes its own generator");
        AsVal {
            stage: idx,
            rep: Box::new(root),
        }
    }

    /// Lift a stage value into a higher stage context by constant embedding.
    pub fn lift(&self, v: &AsVal, stage: usize) -> Value {
        debug_assert!(v.stage <= stage);
        let mut rep = (*v.rep).clone();
        for s in v.stage..stage {
            rep = self.ctxs[s + 1].embed_scalar(rep);
        }
        rep
    }

    /// Canonicalize to the minimal stage.
    pub fn trim(&self, stage: usize, mut rep: Value) -> AsVal {
        let mut s = stage;
        while s > 0 {
            let descend = match &rep {
                Value::Ext(coords) => {
                    let prev = &self.ctxs[s - 1];
                    coords[1..].iter().all(|c| prev.is_zero(c))
                }
                _ => false,
            };
            if !descend {
                break;
            }
            if let Value::Ext(mut coords) = rep {
                rep = coords.swap_remove(0);
                s -= 1;
            } else {
                unreachable!()
            }
        }
        AsVal {
            stage: s,
            rep: Box::new(rep),
        }
    }

    /// Append a generator for `th^p - th = c`, `c` given at the top stage.
    /// Callers must have verified that the equation has no root in the
    /// current tower.
    pub fn adjoin(&mut self, p: u64, c_top: Value) -> VlabResult<AsVal> {
        let k = self.top_stage();
        let top = self.ctxs[k].clone();
        let name = format!("th{}", k + 1);
        // Z^p - Z - c
        let mut modulus = vec![top.zero(); p as usize + 1];
        modulus[0] = top.neg(&c_top)?;
        modulus[1] = top.add(&modulus[1], &top.from_i64(-1))?;
        modulus[p as usize] = top.one();
        let next = Tower::ext_unchecked(&top, &name, modulus);
        if k > 0 {
            // c is base-level only if it trims to stage 0
            let trimmed = self.trim(k, c_top.clone());
            if trimmed.stage > 0 {
                self.all_base = false;
            }
        }
        self.gens.push(AsGen { c: c_top, name });
        self.ctxs.push(next);
        Ok(self.generator_value(k + 1))
    }
}

impl Tower {
    pub(crate) fn as_log(&self) -> &std::sync::RwLock<AsLog> {
        match &*self.0 {
            Node::AsClosure { log, .. } => log,
            _ => unreachable!("as_log on non-closure"),
        }
    }

    pub(crate) fn as_unop(
        &self,
        a: &Value,
        f: impl Fn(&Tower, &Value) -> VlabResult<Value>,
    ) -> VlabResult<Value> {
        let log = self.as_log().read().unwrap();
        let v = match a {
            Value::As(v) => v,
            _ => return Err(VlabError::FieldMismatch("expected a closure element".into())),
        };
        let ctx = log.ctx(v.stage);
        let out = f(ctx, &v.rep)?;
        Ok(Value::As(log.trim(v.stage, out)))
    }

    pub(crate) fn as_binop(
        &self,
        a: &Value,
        b: &Value,
        f: impl Fn(&Tower, &Value, &Value) -> VlabResult<Value>,
    ) -> VlabResult<Value> {
        let log = self.as_log().read().unwrap();
        let (va, vb) = match (a, b) {
            (Value::As(x), Value::As(y)) => (x, y),
            _ => return Err(VlabError::FieldMismatch("expected closure elements".into())),
        };
        let s = va.stage.max(vb.stage);
        let ctx = log.ctx(s);
        let ra = log.lift(va, s);
        let rb = log.lift(vb, s);
        let out = f(ctx, &ra, &rb)?;
        Ok(Value::As(log.trim(s, out)))
    }

    /// Snapshot of the witness log: `(name, c, verified)` per generator, where
    /// `verified` re-checks `th^p - th = c` in the tower.
    pub fn as_witness_log(&self) -> VlabResult<Vec<(String, String, bool)>> {
        let p = self
            .as_closure_prime()
            .ok_or_else(|| VlabError::Unsupported("not an Artin-Schreier closure".into()))?;
        let log = self.as_log().read().unwrap();
        let mut out = Vec::new();
        for (i, gen) in log.gens.iter().enumerate() {
            let stage = i + 1;
            let ctx = log.ctx(stage);
            let th = log.generator_value(stage);
            let lhs = {
                let tp = ctx.pow_i64(&th.rep, p as i64)?;
                ctx.sub(&tp, &th.rep)?
            };
            let c_lift = ctx.embed_scalar(gen.c.clone());
            let ok = ctx.eq_values(&lhs, &c_lift);
            let prev = log.ctx(i);
            out.push((gen.name.clone(), prev.fmt_value(&gen.c), ok));
        }
        Ok(out)
    }
}
