//! Arithmetic for `F_{p^k}` with a fixed deterministic modulus polynomial.
//!
//! Elements are coordinate vectors of length `k` over `F_p`. The modulus is
//! the lexicographically first monic irreducible polynomial of degree `k`
//! (constant coefficient most significant in the enumeration order), so that
//! two descriptors of the same `q` are interchangeable.

use crate::error::{VlabError, VlabResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteFf {
    pub p: u64,
    pub k: u32,
    /// Monic modulus, little-endian, length `k + 1`. For `k = 1` this is `X`.
    pub modulus: Vec<u64>,
}

impl FiniteFf {
    pub fn new(p: u64, k: u32) -> VlabResult<Self> {
        if !is_small_prime(p) {
            return Err(VlabError::Domain(format!("{} is not a (small) prime", p)));
        }
        if k == 0 || k > 6 {
            return Err(VlabError::Domain(format!(
                "finite field degree {} out of the supported range 1..=6",
                k
            )));
        }
        let modulus = first_irreducible(p, k as usize);
        Ok(FiniteFf { p, k, modulus })
    }

    pub fn order(&self) -> u64 {
        self.p.pow(self.k)
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.k as usize]
    }

    pub fn one(&self) -> Vec<u64> {
        let mut v = self.zero();
        v[0] = 1;
        v
    }

    pub fn from_i64(&self, n: i64) -> Vec<u64> {
        let mut v = self.zero();
        v[0] = n.rem_euclid(self.p as i64) as u64;
        v
    }

    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| (x + y) % self.p).collect()
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        a.iter().map(|&x| (self.p - x % self.p) % self.p).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let k = self.k as usize;
        let mut prod = vec![0u64; 2 * k];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % self.p;
            }
        }
        self.reduce(&mut prod);
        prod.truncate(k.max(1));
        prod.resize(k, 0);
        prod
    }

    /// Reduce a raw coefficient vector modulo the modulus polynomial.
    fn reduce(&self, poly: &mut Vec<u64>) {
        let k = self.k as usize;
        while poly.len() > k {
            let d = poly.len() - 1;
            let c = poly[d];
            if c != 0 {
                // subtract c * X^(d-k) * modulus
                for (i, &m) in self.modulus.iter().enumerate() {
                    let idx = d - k + i;
                    poly[idx] = (poly[idx] + c * (self.p - m % self.p)) % self.p;
                }
            }
            poly.pop();
        }
    }

    pub fn inv(&self, a: &[u64]) -> VlabResult<Vec<u64>> {
        if self.is_zero(a) {
            return Err(VlabError::DivisionByZero);
        }
        // a^(q-2)
        Ok(self.pow(a, self.order() - 2))
    }

    pub fn pow(&self, a: &[u64], mut e: u64) -> Vec<u64> {
        let mut base = a.to_vec();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// The p-th root, which always exists: `x^(q/p)`.
    pub fn pth_root(&self, a: &[u64]) -> Vec<u64> {
        self.pow(a, self.order() / self.p)
    }

    /// Absolute trace down to `F_p`, returned as a scalar.
    pub fn trace(&self, a: &[u64]) -> u64 {
        let mut acc = self.zero();
        let mut x = a.to_vec();
        for _ in 0..self.k {
            acc = self.add(&acc, &x);
            x = self.pow(&x, self.p);
        }
        debug_assert!(acc[1..].iter().all(|&c| c == 0));
        acc[0]
    }

    /// All field elements in a fixed deterministic order.
    pub fn enumerate(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        let q = self.order();
        (0..q).map(move |mut n| {
            let mut v = self.zero();
            for c in v.iter_mut() {
                *c = n % self.p;
                n /= self.p;
            }
            v
        })
    }
}

pub fn is_small_prime(p: u64) -> bool {
    if p < 2 || p > 1 << 16 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Lexicographically first monic irreducible polynomial of degree `k` over
/// `F_p` (enumeration by the base-p digits of the non-leading coefficients,
/// constant coefficient least significant).
fn first_irreducible(p: u64, k: usize) -> Vec<u64> {
    if k == 1 {
        return vec![0, 1]; // X
    }
    let count = p.pow(k as u32);
    for n in 0..count {
        let mut poly = Vec::with_capacity(k + 1);
        let mut m = n;
        for _ in 0..k {
            poly.push(m % p);
            m /= p;
        }
        poly.push(1);
        if poly_irreducible(p, &poly) {
            return poly;
        }
    }
    unreachable!("irreducible polynomials of every degree exist over F_p")
}

/// Trial-division irreducibility over `F_p` for small degrees.
pub fn poly_irreducible(p: u64, poly: &[u64]) -> bool {
    let deg = poly.len() - 1;
    if deg == 0 {
        return false;
    }
    if deg == 1 {
        return true;
    }
    for d in 1..=deg / 2 {
        let count = p.pow(d as u32);
        for n in 0..count {
            let mut div = Vec::with_capacity(d + 1);
            let mut m = n;
            for _ in 0..d {
                div.push(m % p);
                m /= p;
            }
            div.push(1);
            if poly_rem_is_zero(p, poly, &div) {
                return false;
            }
        }
    }
    true
}

fn poly_rem_is_zero(p: u64, num: &[u64], den: &[u64]) -> bool {
    let mut rem: Vec<u64> = num.to_vec();
    let dd = den.len() - 1;
    while rem.len() > dd {
        let c = *rem.last().unwrap();
        let shift = rem.len() - 1 - dd;
        if c != 0 {
            for (i, &m) in den.iter().enumerate() {
                rem[shift + i] = (rem[shift + i] + c * (p - m % p)) % p;
            }
        }
        rem.pop();
        while rem.len() > dd && *rem.last().unwrap() == 0 {
            rem.pop();
        }
    }
    rem.iter().all(|&c| c == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f4_modulus_and_trace() {
        let f4 = FiniteFf::new(2, 2).unwrap();
        // X^2 + X + 1 is the only irreducible quadratic over F_2
        assert_eq!(f4.modulus, vec![1, 1, 1]);
        // Tr(1) = 1 + 1 = 0 over F_2
        assert_eq!(f4.trace(&f4.one()), 0);
    }

    #[test]
    fn f9_arithmetic() {
        let f9 = FiniteFf::new(3, 2).unwrap();
        // X^2 + 1 is irreducible mod 3 and is lexicographically first
        assert_eq!(f9.modulus, vec![1, 0, 1]);
        let i = vec![0, 1]; // a root of X^2 + 1
        assert_eq!(f9.mul(&i, &i), f9.from_i64(-1));
        let inv = f9.inv(&i).unwrap();
        assert_eq!(f9.mul(&i, &inv), f9.one());
    }

    #[test]
    fn enumerate_sizes() {
        let f8 = FiniteFf::new(2, 3).unwrap();
        let all: Vec<_> = f8.enumerate().collect();
        assert_eq!(all.len(), 8);
        // every nonzero element invertible
        for a in &all {
            if !f8.is_zero(a) {
                let ia = f8.inv(a).unwrap();
                assert_eq!(f8.mul(a, &ia), f8.one());
            }
        }
    }

    #[test]
    fn f7_squares() {
        let _f7 = FiniteFf::new(7, 1).unwrap();
        let squares: Vec<u64> = (0..7).map(|n| (n * n) % 7).collect();
        assert!(squares.contains(&2)); // 3^2 = 9 = 2 mod 7
        assert!(squares.contains(&4));
        assert!(!squares.contains(&5));
    }
}
