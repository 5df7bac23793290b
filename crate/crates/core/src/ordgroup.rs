//! Lexicographic ordered abelian groups and their convex-subgroup lattice.
//!
//! A [`ValueGroup`] is a finite lexicographic product of rank-1 components,
//! each either `c * Z` for a positive rational `c` or the full rational line.
//! The first component is the most significant. Under this restriction the
//! convex subgroups are exactly the `n + 1` suffix cuts, which makes the
//! whole lattice enumerable.

use std::fmt;
use std::sync::Arc;

use num::{BigRational, One, Signed, Zero};

use crate::error::{VlabError, VlabResult};

pub type Rat = BigRational;

/// One archimedean component of a value group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    /// The subgroup `c * Z` of the rationals, `c > 0` (gcd-normalized form of
    /// any finitely generated subgroup of Q).
    Cyclic(Rat),
    /// The full rational line (divisible component).
    Divisible,
}

impl Component {
    pub fn contains(&self, x: &Rat) -> bool {
        match self {
            Component::Cyclic(c) => (x / c).is_integer(),
            Component::Divisible => true,
        }
    }

    pub fn is_p_divisible(&self, _p: u64) -> bool {
        // c*Z is isomorphic to Z, never p-divisible; Q always is.
        matches!(self, Component::Divisible)
    }
}

/// A finite lexicographic product of rank-1 components, most significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueGroup {
    components: Vec<Component>,
}

impl ValueGroup {
    pub fn new(components: Vec<Component>) -> Arc<Self> {
        Arc::new(ValueGroup { components })
    }

    /// The trivial (zero) group.
    pub fn trivial() -> Arc<Self> {
        Self::new(Vec::new())
    }

    /// `Z^n` with the lexicographic order.
    pub fn lex_z(n: usize) -> Arc<Self> {
        Self::new(vec![Component::Cyclic(Rat::one()); n])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.components.is_empty()
    }

    /// Zero element of the group.
    pub fn zero(self: &Arc<Self>) -> GroupElt {
        GroupElt {
            group: Arc::clone(self),
            coords: vec![Rat::zero(); self.rank()],
            infinite: false,
        }
    }

    /// The absorbing maximum, used as the value of 0.
    pub fn infinity(self: &Arc<Self>) -> GroupElt {
        GroupElt {
            group: Arc::clone(self),
            coords: vec![Rat::zero(); self.rank()],
            infinite: true,
        }
    }

    /// Builds an element after checking componentwise membership.
    pub fn element(self: &Arc<Self>, coords: Vec<Rat>) -> VlabResult<GroupElt> {
        if coords.len() != self.rank() {
            return Err(VlabError::GroupMismatch);
        }
        for (x, c) in coords.iter().zip(&self.components) {
            if !c.contains(x) {
                return Err(VlabError::Domain(format!(
                    "coordinate {} does not lie in its component",
                    x
                )));
            }
        }
        Ok(GroupElt {
            group: Arc::clone(self),
            coords,
            infinite: false,
        })
    }

    pub fn element_from_i64(self: &Arc<Self>, coords: &[i64]) -> VlabResult<GroupElt> {
        self.element(coords.iter().map(|&k| Rat::from_integer(k.into())).collect())
    }

    /// Whether every component is p-divisible, i.e. the whole group is.
    pub fn is_p_divisible(&self, p: u64) -> bool {
        self.maximal_p_divisible_cut(p) == 0
    }

    fn maximal_p_divisible_cut(&self, p: u64) -> usize {
        // Largest suffix of p-divisible components.
        let mut cut = self.rank();
        while cut > 0 && self.components[cut - 1].is_p_divisible(p) {
            cut -= 1;
        }
        cut
    }

    /// The maximal p-divisible convex subgroup (a suffix of divisible
    /// components).
    pub fn maximal_p_divisible_subgroup(self: &Arc<Self>, p: u64) -> ConvexSubgroup {
        ConvexSubgroup {
            group: Arc::clone(self),
            cut: self.maximal_p_divisible_cut(p),
        }
    }

    /// All convex subgroups, coarsest cut first (cut 0 = whole group,
    /// cut n = trivial subgroup).
    pub fn convex_subgroups(self: &Arc<Self>) -> Vec<ConvexSubgroup> {
        (0..=self.rank())
            .map(|cut| ConvexSubgroup {
                group: Arc::clone(self),
                cut,
            })
            .collect()
    }

    pub fn convex_subgroup(self: &Arc<Self>, cut: usize) -> VlabResult<ConvexSubgroup> {
        if cut > self.rank() {
            return Err(VlabError::Domain(format!(
                "cut {} out of range for rank {}",
                cut,
                self.rank()
            )));
        }
        Ok(ConvexSubgroup {
            group: Arc::clone(self),
            cut,
        })
    }

    /// Quotient by a convex subgroup: the lexicographic product of the leading
    /// components, together with the coordinate-truncation projection.
    pub fn quotient(self: &Arc<Self>, delta: &ConvexSubgroup) -> VlabResult<(Arc<ValueGroup>, Projection)> {
        if !Arc::ptr_eq(self, &delta.group) && *delta.group != **self {
            return Err(VlabError::GroupMismatch);
        }
        let q = Self::new(self.components[..delta.cut].to_vec());
        Ok((
            Arc::clone(&q),
            Projection {
                source: Arc::clone(self),
                target: q,
                keep: delta.cut,
            },
        ))
    }
}

impl fmt::Display for ValueGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| match c {
                Component::Cyclic(c) if c.is_one() => "Z".to_string(),
                Component::Cyclic(c) => format!("({})Z", c),
                Component::Divisible => "Q".to_string(),
            })
            .collect();
        write!(f, "{}", parts.join(" x "))
    }
}

/// An element of a [`ValueGroup`], or the absorbing infinity (the value of 0).
#[derive(Debug, Clone)]
pub struct GroupElt {
    group: Arc<ValueGroup>,
    coords: Vec<Rat>,
    infinite: bool,
}

impl GroupElt {
    pub fn group(&self) -> &Arc<ValueGroup> {
        &self.group
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn is_infinite(&self) -> bool {
        self.infinite
    }

    pub fn is_zero(&self) -> bool {
        !self.infinite && self.coords.iter().all(|c| c.is_zero())
    }

    fn same_group(&self, other: &GroupElt) -> VlabResult<()> {
        if Arc::ptr_eq(&self.group, &other.group) || *self.group == *other.group {
            Ok(())
        } else {
            Err(VlabError::GroupMismatch)
        }
    }

    /// Addition; infinity is absorbing.
    pub fn add(&self, other: &GroupElt) -> VlabResult<GroupElt> {
        self.same_group(other)?;
        if self.infinite || other.infinite {
            return Ok(self.group.infinity());
        }
        Ok(GroupElt {
            group: Arc::clone(&self.group),
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
            infinite: false,
        })
    }

    pub fn neg(&self) -> VlabResult<GroupElt> {
        if self.infinite {
            return Err(VlabError::Domain("cannot negate infinity".into()));
        }
        Ok(GroupElt {
            group: Arc::clone(&self.group),
            coords: self.coords.iter().map(|a| -a).collect(),
            infinite: false,
        })
    }

    pub fn sub(&self, other: &GroupElt) -> VlabResult<GroupElt> {
        self.add(&other.neg()?)
    }

    /// Lexicographic comparison; infinity is greater than everything except
    /// itself.
    pub fn compare(&self, other: &GroupElt) -> VlabResult<std::cmp::Ordering> {
        use std::cmp::Ordering;
        self.same_group(other)?;
        Ok(match (self.infinite, other.infinite) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.coords.cmp(&other.coords),
        })
    }

    pub fn eq_elt(&self, other: &GroupElt) -> bool {
        matches!(self.compare(other), Ok(std::cmp::Ordering::Equal))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.infinite || !matches!(self.sign(), std::cmp::Ordering::Less)
    }

    pub fn is_positive(&self) -> bool {
        self.infinite || matches!(self.sign(), std::cmp::Ordering::Greater)
    }

    fn sign(&self) -> std::cmp::Ordering {
        for c in &self.coords {
            if c.is_positive() {
                return std::cmp::Ordering::Greater;
            }
            if c.is_negative() {
                return std::cmp::Ordering::Less;
            }
        }
        std::cmp::Ordering::Equal
    }

    fn first_nonzero(&self) -> Option<usize> {
        self.coords.iter().position(|c| !c.is_zero())
    }

    /// The smallest convex subgroup containing a nonzero, finite element:
    /// the suffix cut at its first nonzero coordinate.
    pub fn smallest_convex_containing(&self) -> VlabResult<ConvexSubgroup> {
        if self.infinite {
            return Err(VlabError::Domain("infinity has no convex hull".into()));
        }
        match self.first_nonzero() {
            None => Err(VlabError::Domain(
                "smallest convex subgroup containing 0 is trivial; argument must be nonzero".into(),
            )),
            Some(i) => Ok(ConvexSubgroup {
                group: Arc::clone(&self.group),
                cut: i,
            }),
        }
    }

    /// The biggest convex subgroup avoiding a nonzero, finite element: the cut
    /// one step past its first nonzero coordinate.
    pub fn biggest_convex_avoiding(&self) -> VlabResult<ConvexSubgroup> {
        let smallest = self.smallest_convex_containing()?;
        Ok(ConvexSubgroup {
            group: Arc::clone(&self.group),
            cut: smallest.cut + 1,
        })
    }
}

impl fmt::Display for GroupElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.infinite {
            return write!(f, "inf");
        }
        if self.coords.len() == 1 {
            return write!(f, "{}", self.coords[0]);
        }
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// A convex subgroup of a lexicographic product: `{0}^cut x (components cut..)`.
#[derive(Debug, Clone)]
pub struct ConvexSubgroup {
    group: Arc<ValueGroup>,
    cut: usize,
}

impl ConvexSubgroup {
    pub fn group(&self) -> &Arc<ValueGroup> {
        &self.group
    }

    /// Number of leading components that are pinned to zero.
    pub fn cut(&self) -> usize {
        self.cut
    }

    pub fn is_trivial(&self) -> bool {
        self.cut == self.group.rank()
    }

    pub fn is_whole_group(&self) -> bool {
        self.cut == 0
    }

    pub fn contains(&self, x: &GroupElt) -> bool {
        !x.infinite && x.coords[..self.cut].iter().all(|c| c.is_zero())
    }

    /// The subgroup itself, viewed as a value group (the suffix product).
    pub fn as_group(&self) -> Arc<ValueGroup> {
        ValueGroup::new(self.group.components[self.cut..].to_vec())
    }

    /// Containment test against another convex subgroup of the same parent.
    pub fn is_subgroup_of(&self, other: &ConvexSubgroup) -> bool {
        self.cut >= other.cut
    }
}

impl fmt::Display for ConvexSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0 (cut {})", self.cut);
        }
        if self.cut == 0 {
            return write!(f, "{} (cut 0)", self.group);
        }
        write!(f, "{{0}}^{} x {} (cut {})", self.cut, self.as_group(), self.cut)
    }
}

/// The order-preserving coordinate-truncation homomorphism onto a quotient by
/// a convex subgroup.
#[derive(Debug, Clone)]
pub struct Projection {
    source: Arc<ValueGroup>,
    target: Arc<ValueGroup>,
    keep: usize,
}

impl Projection {
    pub fn target(&self) -> &Arc<ValueGroup> {
        &self.target
    }

    pub fn apply(&self, x: &GroupElt) -> VlabResult<GroupElt> {
        if *x.group != *self.source {
            return Err(VlabError::GroupMismatch);
        }
        if x.infinite {
            return Ok(self.target.infinity());
        }
        self.target.element(x.coords[..self.keep].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cmp::Ordering;

    fn z2() -> Arc<ValueGroup> {
        ValueGroup::lex_z(2)
    }

    #[test]
    fn lex_compare() {
        let g = z2();
        let a = g.element_from_i64(&[1, 0]).unwrap();
        let b = g.element_from_i64(&[0, 5]).unwrap();
        assert_eq!(a.compare(&b).unwrap(), Ordering::Greater);

        let c = g.element_from_i64(&[0, 3]).unwrap();
        assert_eq!(c.compare(&c).unwrap(), Ordering::Equal);

        let inf = g.infinity();
        let d = g.element_from_i64(&[7, -2]).unwrap();
        assert_eq!(inf.compare(&d).unwrap(), Ordering::Greater);
        assert_eq!(d.compare(&inf).unwrap(), Ordering::Less);
        assert_eq!(inf.compare(&inf).unwrap(), Ordering::Equal);
    }

    #[test]
    fn infinity_absorbs_addition() {
        let g = z2();
        let inf = g.infinity();
        let d = g.element_from_i64(&[7, -2]).unwrap();
        assert!(inf.add(&d).unwrap().is_infinite());
        assert!(d.add(&inf).unwrap().is_infinite());
    }

    #[test]
    fn convex_hull_cuts() {
        let g = z2();
        let a = g.element_from_i64(&[0, 1]).unwrap();
        assert_eq!(a.smallest_convex_containing().unwrap().cut(), 1);
        assert_eq!(a.biggest_convex_avoiding().unwrap().cut(), 2);
        assert!(a.biggest_convex_avoiding().unwrap().is_trivial());

        let b = g.element_from_i64(&[1, 0]).unwrap();
        assert_eq!(b.smallest_convex_containing().unwrap().cut(), 0);
        assert!(b.smallest_convex_containing().unwrap().is_whole_group());
        assert_eq!(b.biggest_convex_avoiding().unwrap().cut(), 1);

        let g3 = ValueGroup::lex_z(3);
        let c = g3.element_from_i64(&[0, 0, 5]).unwrap();
        assert_eq!(c.smallest_convex_containing().unwrap().cut(), 2);

        let zero = g.zero();
        assert!(zero.smallest_convex_containing().is_err());
        assert!(g.infinity().smallest_convex_containing().is_err());
    }

    #[test]
    fn adjacent_cuts_differ_by_one() {
        let g = ValueGroup::lex_z(3);
        for coords in [[0, 1, 4], [2, 0, 0], [0, 0, -3], [1, 1, 1]] {
            let x = g.element_from_i64(&coords).unwrap();
            let small = x.smallest_convex_containing().unwrap();
            let big = x.biggest_convex_avoiding().unwrap();
            assert_eq!(big.cut(), small.cut() + 1);
            assert!(big.is_subgroup_of(&small));
            assert!(small.contains(&x));
            assert!(!big.contains(&x));
        }
    }

    #[test]
    fn quotient_projections() {
        let g = z2();
        let delta = g.convex_subgroup(1).unwrap(); // {0} x Z
        let (q, pi) = g.quotient(&delta).unwrap();
        assert_eq!(q.rank(), 1);
        let x = g.element_from_i64(&[3, -4]).unwrap();
        let px = pi.apply(&x).unwrap();
        assert_eq!(px.coords()[0], Rat::from_integer(3.into()));

        // quotient by the trivial subgroup is the identity
        let triv = g.convex_subgroup(2).unwrap();
        let (q2, pi2) = g.quotient(&triv).unwrap();
        assert_eq!(q2.rank(), 2);
        assert!(pi2.apply(&x).unwrap().eq_elt(&x));

        // quotient by the whole group is trivial
        let whole = g.convex_subgroup(0).unwrap();
        let (q3, pi3) = g.quotient(&whole).unwrap();
        assert!(q3.is_trivial());
        assert!(pi3.apply(&x).unwrap().is_zero());

        // infinity maps to infinity
        assert!(pi.apply(&g.infinity()).unwrap().is_infinite());
    }

    #[test]
    fn p_divisible_subgroups() {
        let z = ValueGroup::lex_z(1);
        assert_eq!(z.maximal_p_divisible_subgroup(2).cut(), 1);
        assert!(!z.is_p_divisible(2));

        let q = ValueGroup::new(vec![Component::Divisible]);
        assert!(q.is_p_divisible(3));
        assert_eq!(q.maximal_p_divisible_subgroup(3).cut(), 0);

        let zq = ValueGroup::new(vec![
            Component::Cyclic(Rat::one()),
            Component::Divisible,
        ]);
        let d = zq.maximal_p_divisible_subgroup(3);
        assert_eq!(d.cut(), 1);

        // (1/2)Z is isomorphic to Z, not 2-divisible
        let half = ValueGroup::new(vec![Component::Cyclic(Rat::new(1.into(), 2.into()))]);
        assert!(!half.is_p_divisible(2));
    }

    #[test]
    fn half_integer_membership() {
        let half = ValueGroup::new(vec![Component::Cyclic(Rat::new(1.into(), 2.into()))]);
        assert!(half.element(vec![Rat::new(3.into(), 2.into())]).is_ok());
        assert!(half.element(vec![Rat::new(1.into(), 3.into())]).is_err());
    }

    #[test]
    fn suffix_cuts_are_pairwise_comparable() {
        let g = ValueGroup::lex_z(3);
        let subs = g.convex_subgroups();
        assert_eq!(subs.len(), 4);
        for a in &subs {
            for b in &subs {
                assert!(a.is_subgroup_of(b) || b.is_subgroup_of(a));
            }
        }
    }
}
