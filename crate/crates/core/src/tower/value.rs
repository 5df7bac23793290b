//! Element representations for the declared field towers.

use num::BigRational;

pub type Rat = BigRational;

/// An element of some tower field. The variant must match the descriptor of
/// the field the element belongs to; all operations go through [`super::Tower`].
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Element of `F_{p^k}`: coordinates in the power basis of the fixed
    /// modulus, length `k`, entries reduced mod `p`.
    Fin(Vec<u64>),
    /// Exact rational.
    Rat(Rat),
    /// Rational function in lowest terms (denominator monic, gcd 1).
    Quot(Box<Quot>),
    /// Truncated series (Laurent or Puiseux) over the base field.
    Ser(Box<Series>),
    /// Truncated p-adic, backed by an exact rational representative.
    Pad(Padic),
    /// Element of a simple extension: coordinates over the base in the power
    /// basis of the adjoined root, length = extension degree.
    Ext(Vec<Value>),
    /// Element of a lazily Artin-Schreier-closed field, valid at some stage
    /// of the materialized tower (kept at its minimal stage).
    As(AsVal),
}

/// Numerator/denominator pair of polynomials over the base field,
/// little-endian coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Quot {
    pub num: Vec<Value>,
    pub den: Vec<Value>,
}

/// A truncated series: finitely many known terms below an optional precision
/// bound.
///
/// `terms` is sorted by strictly increasing exponent and contains no exactly
/// zero coefficients. `known_to = None` means the element is exact (all
/// unlisted coefficients are zero); `known_to = Some(k)` means coefficients at
/// exponents `>= k` are unknown, i.e. the element is `sum(terms) + O(t^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub terms: Vec<(Rat, Value)>,
    pub known_to: Option<Rat>,
}

impl Series {
    pub fn exact_zero() -> Self {
        Series {
            terms: Vec::new(),
            known_to: None,
        }
    }

    /// Exponent of the first stored term, if any.
    pub fn lead_exponent(&self) -> Option<&Rat> {
        self.terms.first().map(|(e, _)| e)
    }

    pub fn is_exact(&self) -> bool {
        self.known_to.is_none()
    }
}

/// A truncated p-adic number, stored as an exact rational representative.
///
/// With `known_to = Some(k)` the element stands for `value + O(p^k)` and the
/// representative is canonically reduced mod `p^k`; with `known_to = None` the
/// element is exactly the stored rational. The digit expansion is derived on
/// demand for display.
#[derive(Debug, Clone, PartialEq)]
pub struct Padic {
    pub value: Rat,
    pub known_to: Option<i64>,
}

impl Padic {
    pub fn exact(value: Rat) -> Self {
        Padic {
            value,
            known_to: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.known_to.is_none()
    }
}

/// Element of an Artin-Schreier closure: `rep` is a value of the stage-`stage`
/// context field (stage 0 = the base field itself).
#[derive(Debug, Clone, PartialEq)]
pub struct AsVal {
    pub stage: usize,
    pub rep: Box<Value>,
}
