//! A workbench for exact computation in valued fields.
//!
//! The crate provides exact arithmetic for a family of declared field towers
//! (finite fields, rational function fields, truncated Laurent/Puiseux series,
//! truncated p-adics, simple algebraic extensions, lazily Artin-Schreier-closed
//! fields), lexicographic value groups with their convex-subgroup lattice,
//! structural valuations with coarsening and composition of places, Hensel and
//! Artin-Schreier lifting, certificate-producing evaluators for some explicitly
//! definable valuation rings, and the standard mixed-characteristic
//! decomposition of a valuation into three stages.
//!
//! Everything is exact: rationals are arbitrary precision, series and p-adics
//! carry an explicit precision bound and operations refuse to answer questions
//! below it. No floating point is used anywhere.

pub mod decompose;
pub mod definable;
pub mod error;
pub mod hensel;
pub mod ordgroup;
pub mod tower;
pub mod valuation;

pub use error::{VlabError, VlabResult};
pub use valuation::Valuation;
pub use ordgroup::{ConvexSubgroup, GroupElt, ValueGroup};
pub use tower::{Tower, Value};

