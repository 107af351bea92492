//! Hierarchical multinomial marginal parameters.
//!
//! A parameter `eta^M_L(i_L)` is an alternating sum, over subsets `J` of the
//! effect `L`, of log-probabilities of events in the marginal table of `M`:
//! variables of `J` sit at their reference event, the rest of `L` at the
//! observed level, and `M \ L` at a conditioning level (by default the top).
//! All cells here are in coded coordinates: for reverse-continuation variables
//! level `k` stands for stored level `I + 1 - k`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::EffectAllocation;
use crate::table::{Coding, Layout, ProbabilityVector, VariableSpec};
use crate::varset::VarSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EtaError {
    #[error("effect must be a nonempty subset of the marginal")]
    BadEffect,
    #[error("variable #{0} is not declared")]
    UnknownVariable(usize),
    #[error("level {level} of variable `{variable}` outside 1..={max}")]
    CellOutOfRange {
        variable: String,
        level: usize,
        max: usize,
    },
    #[error("expected {expected} levels, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("event with zero probability in marginal {0:?}")]
    ZeroProbability(VarSet),
    #[error("variable `{0}` is not local-coded")]
    NotLocal(String),
}

/// Identifies `eta^M_L(i_L)`; `cell` lists one coded level per member of `effect`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EtaIndex {
    pub marginal: VarSet,
    pub effect: VarSet,
    pub cell: Vec<usize>,
}

impl EtaIndex {
    pub fn new(marginal: VarSet, effect: VarSet, cell: Vec<usize>) -> Self {
        EtaIndex {
            marginal,
            effect,
            cell,
        }
    }

    /// Checks `effect ⊆ marginal` and every level in `1..I_j - 1`.
    pub fn validate(&self, variables: &[VariableSpec]) -> Result<(), EtaError> {
        check_sets(variables, self.marginal, self.effect)?;
        check_cell(variables, self.effect, &self.cell, true)
    }

    /// True when some coordinate sits at its top level, where the parameter is 0.
    pub fn touches_top(&self, variables: &[VariableSpec]) -> bool {
        self.effect
            .iter()
            .zip(&self.cell)
            .any(|(j, &l)| l >= variables[j].cardinality)
    }

    /// Renders as `eta[1234](12)(1,1)` using variable names.
    pub fn display<'a>(&'a self, variables: &'a [VariableSpec]) -> EtaDisplay<'a> {
        EtaDisplay {
            idx: self,
            variables,
        }
    }
}

pub struct EtaDisplay<'a> {
    idx: &'a EtaIndex,
    variables: &'a [VariableSpec],
}

pub(crate) fn set_label(set: VarSet, variables: &[VariableSpec]) -> String {
    let names: Vec<&str> = set.iter().map(|j| variables[j].name.as_str()).collect();
    if names.iter().all(|n| n.len() == 1) {
        names.concat()
    } else {
        names.join(",")
    }
}

impl fmt::Display for EtaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell: Vec<String> = self.idx.cell.iter().map(|l| l.to_string()).collect();
        write!(
            f,
            "eta[{}]({})({})",
            set_label(self.idx.marginal, self.variables),
            set_label(self.idx.effect, self.variables),
            cell.join(",")
        )
    }
}

/// Level pinned for a conditioning variable (a member of `M \ L`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// The coded top level `I_j`.
    Top,
    /// A concrete coded level.
    At(usize),
    /// The reference event that level `i` would use as an effect variable.
    ReferenceOf(usize),
}

/// One signed log-probability term of a parameter.
///
/// `ranges[k]` is the inclusive range of STORED levels of the `k`-th member of
/// the marginal (ascending variable order); the event is their product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTerm {
    pub sign: i8,
    pub ranges: Vec<(usize, usize)>,
}

fn check_sets(variables: &[VariableSpec], marginal: VarSet, effect: VarSet) -> Result<(), EtaError> {
    if let Some(bad) = marginal.iter().find(|&j| j >= variables.len()) {
        return Err(EtaError::UnknownVariable(bad));
    }
    if effect.is_empty() || !effect.is_subset(marginal) {
        return Err(EtaError::BadEffect);
    }
    Ok(())
}

fn check_cell(
    variables: &[VariableSpec],
    set: VarSet,
    cell: &[usize],
    below_top: bool,
) -> Result<(), EtaError> {
    if cell.len() != set.len() {
        return Err(EtaError::Shape {
            expected: set.len(),
            got: cell.len(),
        });
    }
    for (j, &l) in set.iter().zip(cell) {
        let max = variables[j].cardinality - usize::from(below_top);
        if l < 1 || l > max {
            return Err(EtaError::CellOutOfRange {
                variable: variables[j].name.clone(),
                level: l,
                max,
            });
        }
    }
    Ok(())
}

/// Coded range of the reference event of level `i` under `coding`.
fn reference_range(coding: Coding, i: usize, card: usize) -> (usize, usize) {
    match coding {
        Coding::Baseline => (card, card),
        Coding::Local => (i + 1, i + 1),
        Coding::Continuation | Coding::ReverseContinuation => (i + 1, card),
    }
}

fn to_stored(spec: &VariableSpec, (lo, hi): (usize, usize)) -> (usize, usize) {
    match spec.coding {
        Coding::ReverseContinuation => (spec.coded_to_original(hi), spec.coded_to_original(lo)),
        _ => (lo, hi),
    }
}

/// The signed events of `eta^M_L(i_L | conditioning)`.
///
/// `cell` must lie below the top level in every coordinate; `conditioning`
/// lists one entry per member of `M \ L`.
pub fn eta_events(
    variables: &[VariableSpec],
    marginal: VarSet,
    effect: VarSet,
    cell: &[usize],
    conditioning: &[Conditioning],
) -> Result<Vec<EventTerm>, EtaError> {
    check_sets(variables, marginal, effect)?;
    check_cell(variables, effect, cell, true)?;
    let rest = marginal.difference(effect);
    if conditioning.len() != rest.len() {
        return Err(EtaError::Shape {
            expected: rest.len(),
            got: conditioning.len(),
        });
    }
    let mut fixed = Vec::with_capacity(marginal.len());
    for j in marginal.iter() {
        let spec = &variables[j];
        let card = spec.cardinality;
        let coded = if let Some(r) = effect.rank_of(j) {
            (cell[r], cell[r])
        } else {
            match conditioning[rest.rank_of(j).unwrap()] {
                Conditioning::Top => (card, card),
                Conditioning::At(l) => {
                    if l < 1 || l > card {
                        return Err(EtaError::CellOutOfRange {
                            variable: spec.name.clone(),
                            level: l,
                            max: card,
                        });
                    }
                    (l, l)
                }
                Conditioning::ReferenceOf(l) => {
                    if l < 1 || l >= card {
                        return Err(EtaError::CellOutOfRange {
                            variable: spec.name.clone(),
                            level: l,
                            max: card - 1,
                        });
                    }
                    reference_range(spec.coding, l, card)
                }
            }
        };
        fixed.push(coded);
    }
    let members: Vec<usize> = marginal.to_vec();
    let mut terms = Vec::with_capacity(1 << effect.len());
    for j_set in effect.subsets() {
        let sign = if effect.difference(j_set).len() % 2 == 0 { 1 } else { -1 };
        let ranges = members
            .iter()
            .zip(&fixed)
            .map(|(&j, &coded)| {
                let spec = &variables[j];
                let coded = if j_set.contains(j) {
                    reference_range(spec.coding, coded.0, spec.cardinality)
                } else {
                    coded
                };
                to_stored(spec, coded)
            })
            .collect();
        terms.push(EventTerm { sign, ranges });
    }
    Ok(terms)
}

/// The marginal distribution of one variable subset, ready for event sums.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    set: VarSet,
    variables: Vec<VariableSpec>,
    layout: Layout,
    probs: Vec<f64>,
}

impl MarginalTable {
    pub fn new(pv: &ProbabilityVector, set: VarSet) -> Result<Self, EtaError> {
        if let Some(bad) = set.iter().find(|&j| j >= pv.variables().len()) {
            return Err(EtaError::UnknownVariable(bad));
        }
        let m = pv.marginalize(set).map_err(|_| EtaError::BadEffect)?;
        Ok(MarginalTable {
            set,
            variables: pv.variables().to_vec(),
            layout: m.layout(),
            probs: m.probs().to_vec(),
        })
    }

    /// Probability of a product of stored-level ranges.
    pub fn event_prob(&self, ranges: &[(usize, usize)]) -> f64 {
        fn rec(t: &MarginalTable, ranges: &[(usize, usize)], k: usize, base: usize) -> f64 {
            if k == ranges.len() {
                return t.probs[base];
            }
            let stride = t.layout.strides()[k];
            (ranges[k].0..=ranges[k].1)
                .map(|l| rec(t, ranges, k + 1, base + (l - 1) * stride))
                .sum()
        }
        rec(self, ranges, 0, 0)
    }

    /// `eta^M_L(i_L | conditioning)` where `M` is this table's variable set.
    ///
    /// Cells with a top-level coordinate give 0.
    pub fn eta(
        &self,
        effect: VarSet,
        cell: &[usize],
        conditioning: &[Conditioning],
    ) -> Result<f64, EtaError> {
        check_sets(&self.variables, self.set, effect)?;
        check_cell(&self.variables, effect, cell, false)?;
        if effect
            .iter()
            .zip(cell)
            .any(|(j, &l)| l == self.variables[j].cardinality)
        {
            return Ok(0.0);
        }
        let terms = eta_events(&self.variables, self.set, effect, cell, conditioning)?;
        let mut acc = 0.0;
        for t in terms {
            let p = self.event_prob(&t.ranges);
            if !(p > 0.0) {
                return Err(EtaError::ZeroProbability(self.set));
            }
            acc += f64::from(t.sign) * p.ln();
        }
        Ok(acc)
    }
}

/// `eta^M_L(i_L)` with conditioning variables at the given coded levels, or at
/// their top levels when `conditioning` is `None`.
pub fn eta_value(
    pv: &ProbabilityVector,
    idx: &EtaIndex,
    conditioning: Option<&[usize]>,
) -> Result<f64, EtaError> {
    let rest = idx.marginal.difference(idx.effect);
    let cond: Vec<Conditioning> = match conditioning {
        None => vec![Conditioning::Top; rest.len()],
        Some(levels) => levels.iter().map(|&l| Conditioning::At(l)).collect(),
    };
    MarginalTable::new(pv, idx.marginal)?.eta(idx.effect, &idx.cell, &cond)
}

/// `eta^M_L(i_L)` evaluated in the conditional distribution where `M \ L` is
/// pinned at `context` (coded levels, ascending variable order).
pub fn conditional_eta(
    pv: &ProbabilityVector,
    marginal: VarSet,
    effect: VarSet,
    cell: &[usize],
    context: &[usize],
) -> Result<f64, EtaError> {
    let cond: Vec<Conditioning> = context.iter().map(|&l| Conditioning::At(l)).collect();
    MarginalTable::new(pv, marginal)?.eta(effect, cell, &cond)
}

/// Parameter with an arbitrary mix of conditioning kinds.
pub fn eta_with(
    pv: &ProbabilityVector,
    marginal: VarSet,
    effect: VarSet,
    cell: &[usize],
    conditioning: &[Conditioning],
) -> Result<f64, EtaError> {
    MarginalTable::new(pv, marginal)?.eta(effect, cell, conditioning)
}

fn restrict(set: VarSet, sub: VarSet, cell: &[usize]) -> Vec<usize> {
    sub.iter().map(|j| cell[set.rank_of(j).unwrap()]).collect()
}

/// Conditioning vector for `M \ effect` where members of `reference` take the
/// reference of their level in `cell` (indexed by `cell_set`), members of
/// `observed` take that level, and the rest sit at the top.
fn mixed_conditioning(
    marginal: VarSet,
    effect: VarSet,
    cell_set: VarSet,
    cell: &[usize],
    reference: VarSet,
    observed: VarSet,
) -> Vec<Conditioning> {
    marginal
        .difference(effect)
        .iter()
        .map(|j| {
            if reference.contains(j) {
                Conditioning::ReferenceOf(cell[cell_set.rank_of(j).unwrap()])
            } else if observed.contains(j) {
                Conditioning::At(cell[cell_set.rank_of(j).unwrap()])
            } else {
                Conditioning::Top
            }
        })
        .collect()
}

/// Both sides of the decomposition of `eta^M_{L∪C}(i_{L∪C})` into parameters
/// of `L ∪ (C \ J)` with `J` at its reference, plus the `L` parameter with `C`
/// pinned at `i_C`.
///
/// `cell` covers `L ∪ C` in ascending variable order; it must lie below top.
pub fn decompose_parameter(
    pv: &ProbabilityVector,
    marginal: VarSet,
    effect: VarSet,
    context: VarSet,
    cell: &[usize],
) -> Result<(f64, f64), EtaError> {
    let full = effect.union(context);
    if !effect.is_disjoint(context) || !full.is_subset(marginal) {
        return Err(EtaError::BadEffect);
    }
    let table = MarginalTable::new(pv, marginal)?;
    let top = vec![Conditioning::Top; marginal.difference(full).len()];
    let lhs = table.eta(full, cell, &top)?;
    let mut rhs = 0.0;
    for j_set in context.subsets().filter(|s| !s.is_empty()) {
        let sub = effect.union(context.difference(j_set));
        let cond = mixed_conditioning(marginal, sub, full, cell, j_set, VarSet::EMPTY);
        let sign = if j_set.len() % 2 == 1 { 1.0 } else { -1.0 };
        rhs += sign * table.eta(sub, &restrict(full, sub, cell), &cond)?;
    }
    let cond = mixed_conditioning(marginal, effect, full, cell, VarSet::EMPTY, context);
    let sign = if context.len() % 2 == 0 { 1.0 } else { -1.0 };
    rhs += sign * table.eta(effect, &restrict(full, effect, cell), &cond)?;
    Ok((lhs, rhs))
}

/// Both sides of the expansion of a conditional parameter
/// `eta^M_L(i_L | i_C)` into higher-order parameters:
/// `sum_{J ⊆ C} (-1)^{|J|} eta^M_{L∪J}(i_{L∪J} | reference of i_{C \ J})`.
///
/// `cell` covers `L ∪ C`; `C` coordinates must lie below top.
pub fn decompose_conditional(
    pv: &ProbabilityVector,
    marginal: VarSet,
    effect: VarSet,
    context: VarSet,
    cell: &[usize],
) -> Result<(f64, f64), EtaError> {
    let full = effect.union(context);
    if !effect.is_disjoint(context) || !full.is_subset(marginal) {
        return Err(EtaError::BadEffect);
    }
    let table = MarginalTable::new(pv, marginal)?;
    let cond = mixed_conditioning(marginal, effect, full, cell, VarSet::EMPTY, context);
    let lhs = table.eta(effect, &restrict(full, effect, cell), &cond)?;
    let mut rhs = 0.0;
    for j_set in context.subsets() {
        let sub = effect.union(j_set);
        let cond = mixed_conditioning(marginal, sub, full, cell, context.difference(j_set), VarSet::EMPTY);
        let sign = if j_set.len() % 2 == 0 { 1.0 } else { -1.0 };
        rhs += sign * table.eta(sub, &restrict(full, sub, cell), &cond)?;
    }
    Ok((lhs, rhs))
}

/// All cells of `set` with every coordinate in `1..I_j - 1`, last variable fastest.
pub fn sub_top_cells(variables: &[VariableSpec], set: VarSet) -> Vec<Vec<usize>> {
    let cards: Vec<usize> = set.iter().map(|j| variables[j].cardinality - 1).collect();
    let layout = Layout::new(&cards);
    layout.cells().collect()
}

/// A full parameter vector for an allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaVector {
    pub variables: Vec<VariableSpec>,
    pub allocation: EffectAllocation,
    entries: Vec<(EtaIndex, f64)>,
    lookup: HashMap<EtaIndex, usize>,
}

impl EtaVector {
    pub fn from_entries(
        variables: Vec<VariableSpec>,
        allocation: EffectAllocation,
        entries: Vec<(EtaIndex, f64)>,
    ) -> Self {
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(k, (idx, _))| (idx.clone(), k))
            .collect();
        EtaVector {
            variables,
            allocation,
            entries,
            lookup,
        }
    }

    pub fn entries(&self) -> &[(EtaIndex, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Value of a parameter; top-level cells read as 0.
    pub fn get(&self, idx: &EtaIndex) -> Option<f64> {
        if idx.touches_top(&self.variables) {
            return Some(0.0);
        }
        self.lookup.get(idx).map(|&k| self.entries[k].1)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let names = |s: VarSet| -> Vec<String> {
            s.iter().map(|j| self.variables[j].name.clone()).collect()
        };
        let entries: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|(idx, v)| {
                serde_json::json!({
                    "marginal": names(idx.marginal),
                    "effect": names(idx.effect),
                    "cell": idx.cell,
                    "value": v,
                })
            })
            .collect();
        serde_json::Value::Array(entries)
    }
}

/// Every parameter index of an allocation: marginals in order, effects by size
/// then members, cells lexicographically.
pub fn allocation_indices(variables: &[VariableSpec], allocation: &EffectAllocation) -> Vec<EtaIndex> {
    let mut out = Vec::new();
    for (k, &m) in allocation.marginals().iter().enumerate() {
        for effect in allocation.effects_of(k) {
            for cell in sub_top_cells(variables, effect) {
                out.push(EtaIndex::new(m, effect, cell));
            }
        }
    }
    out
}

/// Evaluates every parameter of `allocation` with top-level conditioning.
pub fn eta_vector(pv: &ProbabilityVector, allocation: &EffectAllocation) -> Result<EtaVector, EtaError> {
    let variables = pv.variables().to_vec();
    let mut entries = Vec::new();
    for (k, &m) in allocation.marginals().iter().enumerate() {
        let table = MarginalTable::new(pv, m)?;
        for effect in allocation.effects_of(k) {
            let cond = vec![Conditioning::Top; m.difference(effect).len()];
            for cell in sub_top_cells(&variables, effect) {
                let v = table.eta(effect, &cell, &cond)?;
                entries.push((EtaIndex::new(m, effect, cell), v));
            }
        }
    }
    Ok(EtaVector::from_entries(variables, allocation.clone(), entries))
}

/// Converts local-coded parameters to baseline ones by summing over the upper
/// lattice of cells: `eta_b(i_L) = sum_{i' >= i_L} eta_l(i')`.
///
/// Binary variables are accepted under any coding since all codings agree there.
pub fn baseline_from_local(eta_local: &EtaVector) -> Result<EtaVector, EtaError> {
    for v in &eta_local.variables {
        if v.cardinality > 2 && v.coding != Coding::Local {
            return Err(EtaError::NotLocal(v.name.clone()));
        }
    }
    let variables: Vec<VariableSpec> = eta_local
        .variables
        .iter()
        .map(|v| VariableSpec {
            coding: Coding::Baseline,
            ..v.clone()
        })
        .collect();
    let mut entries = Vec::with_capacity(eta_local.len());
    for (idx, _) in eta_local.entries() {
        let uppers: Vec<usize> = idx
            .effect
            .iter()
            .map(|j| eta_local.variables[j].cardinality - 1)
            .collect();
        let ranges: Vec<(usize, usize)> = idx.cell.iter().zip(&uppers).map(|(&l, &u)| (l, u)).collect();
        let mut sum = 0.0;
        for_each_in_box(&ranges, |cell| {
            let key = EtaIndex::new(idx.marginal, idx.effect, cell.to_vec());
            sum += eta_local.get(&key).unwrap_or(0.0);
        });
        entries.push((idx.clone(), sum));
    }
    Ok(EtaVector::from_entries(
        variables,
        eta_local.allocation.clone(),
        entries,
    ))
}

/// Calls `f` on every integer point of a product of inclusive ranges,
/// last coordinate fastest.
pub fn for_each_in_box<F: FnMut(&[usize])>(ranges: &[(usize, usize)], mut f: F) {
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return;
    }
    let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&cur);
        let mut k = ranges.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if cur[k] < ranges[k].1 {
                cur[k] += 1;
                break;
            }
            cur[k] = ranges[k].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocate_effects;
    use crate::table::numbered_variables;

    fn product_3x3(coding: Coding) -> ProbabilityVector {
        let rows = [0.2, 0.3, 0.5];
        let cols = [0.1, 0.4, 0.5];
        let w: Vec<f64> = rows.iter().flat_map(|r| cols.iter().map(move |c| r * c)).collect();
        ProbabilityVector::new(numbered_variables(&[3, 3], coding), w).unwrap()
    }

    fn one(j: usize) -> VarSet {
        VarSet::singleton(j)
    }

    #[test]
    fn first_order_baseline_is_reference_over_observed() {
        let pv = product_3x3(Coding::Baseline);
        let idx = EtaIndex::new(VarSet::full(2), one(0), vec![1]);
        let v = eta_value(&pv, &idx, None).unwrap();
        assert!((v - (0.25f64 / 0.10).ln()).abs() < 1e-12);
    }

    #[test]
    fn independence_kills_interaction() {
        for coding in [Coding::Baseline, Coding::Local, Coding::Continuation] {
            let pv = product_3x3(coding);
            for cell in sub_top_cells(pv.variables(), VarSet::full(2)) {
                let idx = EtaIndex::new(VarSet::full(2), VarSet::full(2), cell);
                assert!(eta_value(&pv, &idx, None).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_order_codings_match_logit_table() {
        let w: Vec<f64> = (1..=9).map(f64::from).collect();
        let p = |i: usize, j: usize| w[(i - 1) * 3 + j - 1] / 45.0;
        let m = VarSet::full(2);
        let local = ProbabilityVector::new(numbered_variables(&[3, 3], Coding::Local), w.clone()).unwrap();
        let v = eta_value(&local, &EtaIndex::new(m, one(0), vec![1]), None).unwrap();
        assert!((v - (p(2, 3) / p(1, 3)).ln()).abs() < 1e-12);
        let cont = ProbabilityVector::new(numbered_variables(&[3, 3], Coding::Continuation), w.clone()).unwrap();
        let v = eta_value(&cont, &EtaIndex::new(m, one(0), vec![1]), None).unwrap();
        assert!((v - ((p(2, 3) + p(3, 3)) / p(1, 3)).ln()).abs() < 1e-12);
    }

    #[test]
    fn top_level_cells_vanish() {
        let pv = product_3x3(Coding::Local);
        let idx = EtaIndex::new(VarSet::full(2), VarSet::full(2), vec![3, 1]);
        assert_eq!(eta_value(&pv, &idx, None).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_baseline_vector() {
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let pv = ProbabilityVector::new(numbered_variables(&[2, 2], Coding::Baseline), w).unwrap();
        let alloc = allocate_effects(&[one(0), one(1), VarSet::full(2)]).unwrap();
        let eta = eta_vector(&pv, &alloc).unwrap();
        let vals: Vec<f64> = eta.entries().iter().map(|e| e.1).collect();
        let want = [
            (0.7f64 / 0.3).ln(),
            (0.6f64 / 0.4).ln(),
            (0.1f64 * 0.4 / (0.2 * 0.3)).ln(),
        ];
        assert_eq!(vals.len(), 3);
        for (a, b) in vals.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn saturated_dimension() {
        let pv = ProbabilityVector::uniform(numbered_variables(&[2, 3, 4], Coding::Baseline)).unwrap();
        let alloc = allocate_effects(&[VarSet::full(3)]).unwrap();
        let eta = eta_vector(&pv, &alloc).unwrap();
        assert_eq!(eta.len(), 23);
        assert!(eta.entries().iter().all(|e| e.1.abs() < 1e-12));
    }

    #[test]
    fn baseline_from_local_three_levels() {
        let w = vec![0.05, 0.1, 0.15, 0.2, 0.1, 0.05, 0.1, 0.2, 0.05];
        let local = ProbabilityVector::new(numbered_variables(&[3, 3], Coding::Local), w.clone()).unwrap();
        let base = ProbabilityVector::new(numbered_variables(&[3, 3], Coding::Baseline), w).unwrap();
        let alloc = allocate_effects(&[one(0), one(1), VarSet::full(2)]).unwrap();
        let el = eta_vector(&local, &alloc).unwrap();
        let eb = eta_vector(&base, &alloc).unwrap();
        let conv = baseline_from_local(&el).unwrap();
        for ((_, a), (_, b)) in conv.entries().iter().zip(eb.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
        let first = |v: &EtaVector, c: usize| v.get(&EtaIndex::new(one(0), one(0), vec![c])).unwrap();
        assert!((first(&conv, 1) - (first(&el, 1) + first(&el, 2))).abs() < 1e-15);
    }

    #[test]
    fn baseline_from_local_rejects_other_codings() {
        let pv = product_3x3(Coding::Continuation);
        let alloc = allocate_effects(&[VarSet::full(2)]).unwrap();
        let eta = eta_vector(&pv, &alloc).unwrap();
        assert!(matches!(baseline_from_local(&eta), Err(EtaError::NotLocal(_))));
    }

    #[test]
    fn reverse_continuation_is_relabeled_continuation() {
        let w: Vec<f64> = (1..=9).map(f64::from).collect();
        let rc = ProbabilityVector::new(numbered_variables(&[3, 3], Coding::ReverseContinuation), w.clone()).unwrap();
        let flipped: Vec<f64> = (0..9).map(|k| w[(2 - k / 3) * 3 + (2 - k % 3)]).collect();
        let c = ProbabilityVector::new(numbered_variables(&[3, 3], Coding::Continuation), flipped).unwrap();
        let alloc = allocate_effects(&[VarSet::full(2)]).unwrap();
        let a = eta_vector(&rc, &alloc).unwrap();
        let b = eta_vector(&c, &alloc).unwrap();
        for ((_, x), (_, y)) in a.entries().iter().zip(b.entries()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn box_iteration_order() {
        let mut seen = Vec::new();
        for_each_in_box(&[(1, 2), (2, 3)], |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![1, 2], vec![1, 3], vec![2, 2], vec![2, 3]]);
        let mut n = 0;
        for_each_in_box(&[(2, 1)], |_| n += 1);
        assert_eq!(n, 0);
    }
}
