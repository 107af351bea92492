//! Assignment of effects to marginal sets under hierarchy and completeness.

use thiserror::Error;

use crate::varset::VarSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("no marginal sets given")]
    Empty,
    #[error("marginal set {0} is empty")]
    EmptyMarginal(usize),
    #[error("marginal {later:?} (position {later_pos}) is contained in earlier marginal {earlier:?} (position {earlier_pos})")]
    OrderingViolation {
        earlier_pos: usize,
        earlier: VarSet,
        later_pos: usize,
        later: VarSet,
    },
    #[error("effects not covered by any marginal: {0:?}")]
    IncompleteCoverage(Vec<VarSet>),
}

/// Ordered marginal sets with each nonempty effect of their union assigned to
/// the first marginal containing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectAllocation {
    marginals: Vec<VarSet>,
    effects: Vec<Vec<VarSet>>,
}

impl EffectAllocation {
    pub fn marginals(&self) -> &[VarSet] {
        &self.marginals
    }

    /// Effects assigned to the `k`-th marginal, by size then members.
    pub fn effects_of(&self, k: usize) -> Vec<VarSet> {
        self.effects[k].clone()
    }

    /// The marginal an effect is assigned to.
    pub fn marginal_of(&self, effect: VarSet) -> Option<VarSet> {
        self.marginals
            .iter()
            .position(|m| effect.is_subset(*m))
            .map(|k| self.marginals[k])
    }

    /// Union of all marginals.
    pub fn universe(&self) -> VarSet {
        self.marginals.iter().fold(VarSet::EMPTY, |a, &m| a.union(m))
    }

    /// Number of free parameters given per-variable cardinalities.
    pub fn dimension(&self, cards: &[usize]) -> usize {
        self.effects
            .iter()
            .flatten()
            .map(|e| e.iter().map(|j| cards[j] - 1).product::<usize>())
            .sum()
    }
}

/// Builds the allocation, rejecting orderings where a later marginal is
/// contained in an earlier one and reporting effects left uncovered.
pub fn allocate_effects(marginals: &[VarSet]) -> Result<EffectAllocation, AllocationError> {
    if marginals.is_empty() {
        return Err(AllocationError::Empty);
    }
    for (i, m) in marginals.iter().enumerate() {
        if m.is_empty() {
            return Err(AllocationError::EmptyMarginal(i));
        }
        for (j, earlier) in marginals[..i].iter().enumerate() {
            if m.is_subset(*earlier) {
                return Err(AllocationError::OrderingViolation {
                    earlier_pos: j,
                    earlier: *earlier,
                    later_pos: i,
                    later: *m,
                });
            }
        }
    }
    let universe = marginals.iter().fold(VarSet::EMPTY, |a, &m| a.union(m));
    let mut effects = vec![Vec::new(); marginals.len()];
    let mut missing = Vec::new();
    for effect in universe.nonempty_subsets_by_size() {
        match marginals.iter().position(|m| effect.is_subset(*m)) {
            Some(k) => effects[k].push(effect),
            None => missing.push(effect),
        }
    }
    if !missing.is_empty() {
        return Err(AllocationError::IncompleteCoverage(missing));
    }
    Ok(EffectAllocation {
        marginals: marginals.to_vec(),
        effects,
    })
}
