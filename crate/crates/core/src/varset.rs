//! Small bitmask sets of variable indices.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound on the number of variables a table may declare.
pub const MAX_VARS: usize = 24;

/// A set of variable positions, stored as a bitmask.
///
/// Iteration always yields positions in ascending order, which is the order
/// used for the coordinates of cells restricted to the set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarSet(u32);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn from_bits(bits: u32) -> Self {
        VarSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn singleton(v: usize) -> Self {
        debug_assert!(v < MAX_VARS);
        VarSet(1 << v)
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_VARS);
        VarSet(((1u64 << n) - 1) as u32)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        it.into_iter().fold(VarSet::EMPTY, |s, v| s.with(v))
    }

    pub fn with(self, v: usize) -> Self {
        VarSet(self.0 | (1 << v))
    }

    pub fn without(self, v: usize) -> Self {
        VarSet(self.0 & !(1 << v))
    }

    pub fn contains(self, v: usize) -> bool {
        v < 32 && self.0 & (1 << v) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersection(self, other: VarSet) -> VarSet {
        VarSet(self.0 & other.0)
    }

    pub fn difference(self, other: VarSet) -> VarSet {
        VarSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: VarSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |v| bits & (1 << v) != 0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Position of `v` among the members of the set, counting in ascending order.
    pub fn rank_of(self, v: usize) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        Some((self.0 & ((1u32 << v) - 1)).count_ones() as usize)
    }

    /// All subsets, the empty set first and `self` last.
    ///
    /// Subsets come out in order of increasing bitmask value, which is stable and
    /// deterministic for golden comparisons.
    pub fn subsets(self) -> Subsets {
        Subsets {
            full: self.0,
            next: Some(0),
        }
    }

    /// Nonempty subsets ordered by size, then lexicographically by members.
    pub fn nonempty_subsets_by_size(self) -> Vec<VarSet> {
        let mut out: Vec<VarSet> = self.subsets().filter(|s| !s.is_empty()).collect();
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.to_vec().cmp(&b.to_vec())));
        out
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct Subsets {
    full: u32,
    next: Option<u32>,
}

impl Iterator for Subsets {
    type Item = VarSet;

    fn next(&mut self) -> Option<VarSet> {
        let cur = self.next?;
        // standard submask enumeration in increasing order
        self.next = if cur == self.full {
            None
        } else {
            Some(((cur | !self.full).wrapping_add(1)) & self.full)
        };
        Some(VarSet(cur))
    }
}
