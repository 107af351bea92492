//! Linear constraint systems on marginal parameters encoding independence
//! statements, dispatched on the coding of the conditioning variables.
//!
//! For a context cell `i'` of `C` and an interaction effect `v` the generic
//! row is `sum_{c ⊆ C} (-1)^{|C \ c|} T(c) = 0`, where `T(c)` is the single
//! parameter at `i'_c` when every variable of `c` is baseline coded, and for
//! local-coded variables sums the parameter over levels `i'_j..I_j - 1`.
//! Threshold contexts over local or continuation variables instead zero
//! every parameter above the threshold.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde_json::json;
use thiserror::Error;

use crate::allocation::EffectAllocation;
use crate::eta::{for_each_in_box, sub_top_cells, EtaIndex, MarginalTable};
use crate::statement::{Context, CsStatement, StatementError};
use crate::table::{Coding, ProbabilityVector, VariableSpec};
use crate::varset::VarSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error(transparent)]
    Statement(#[from] StatementError),
    #[error("variable `{variable}` is {coding}-coded, which this form does not accept")]
    CodingMismatch { variable: String, coding: Coding },
    #[error("continuation-coded variable `{0}` cannot take an explicit context list; use a threshold")]
    ContinuationList(String),
    #[error("baseline-coded variable `{0}` cannot take a threshold context")]
    BaselineThreshold(String),
    #[error("variable `{0}`: `>=` needs local or continuation coding, `<=` needs reverse-continuation")]
    ThresholdDirection(String),
    #[error("marginal {0:?} is not part of the allocation")]
    MarginalAbsent(VarSet),
    #[error("threshold forms need a `>=` or `<=` context")]
    NotThreshold,
}

/// Which effects `v` enter the rows of a context-specific statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InteractionSets {
    /// `a ∪ b` with both parts nonempty.
    #[default]
    Proof,
    /// Nonempty subsets of `A` alone or of `B` alone.
    Statement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstraintOptions {
    pub interaction: InteractionSets,
}

/// `sum coef * eta = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub terms: Vec<(EtaIndex, i32)>,
}

impl LinearConstraint {
    /// Merges repeated indices, drops zero coefficients and top-level cells.
    pub fn new(terms: Vec<(EtaIndex, i32)>, variables: &[VariableSpec]) -> Self {
        let mut out: Vec<(EtaIndex, i32)> = Vec::with_capacity(terms.len());
        for (idx, coef) in terms {
            if idx.touches_top(variables) {
                continue;
            }
            match out.iter_mut().find(|(e, _)| *e == idx) {
                Some(t) => t.1 += coef,
                None => out.push((idx, coef)),
            }
        }
        out.retain(|t| t.1 != 0);
        LinearConstraint { terms: out }
    }

    /// Sorted terms with a positive leading coefficient.
    pub fn canonical(&self) -> LinearConstraint {
        let mut terms = self.terms.clone();
        terms.sort();
        if terms.first().is_some_and(|t| t.1 < 0) {
            terms.iter_mut().for_each(|t| t.1 = -t.1);
        }
        LinearConstraint { terms }
    }

    pub fn evaluate(&self, pv: &ProbabilityVector) -> f64 {
        self.terms
            .iter()
            .map(|(idx, c)| {
                let table = MarginalTable::new(pv, idx.marginal).expect("constraint marginal exists");
                let cond = vec![crate::eta::Conditioning::Top; idx.marginal.difference(idx.effect).len()];
                f64::from(*c) * table.eta(idx.effect, &idx.cell, &cond).expect("positive distribution")
            })
            .sum()
    }

    pub fn to_json(&self, variables: &[VariableSpec]) -> serde_json::Value {
        let names = |s: VarSet| -> Vec<&str> { s.iter().map(|j| variables[j].name.as_str()).collect() };
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|(idx, c)| {
                json!({
                    "eta": {"marginal": names(idx.marginal), "effect": names(idx.effect), "cell": idx.cell},
                    "coef": c,
                })
            })
            .collect();
        json!(terms)
    }
}

/// Deduplicated rows with the label of the statement that produced each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSystem {
    constraints: Vec<LinearConstraint>,
    origins: Vec<usize>,
    labels: Vec<String>,
    seen: HashSet<LinearConstraint>,
    raw_count: usize,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends rows from one source; rows equal up to sign to an existing row
    /// are skipped but still counted in [`raw_count`](Self::raw_count).
    pub fn extend(&mut self, label: impl Into<String>, rows: Vec<LinearConstraint>) {
        let origin = self.labels.len();
        self.labels.push(label.into());
        for row in rows {
            self.raw_count += 1;
            if row.terms.is_empty() {
                continue;
            }
            let key = row.canonical();
            if self.seen.insert(key) {
                self.constraints.push(row);
                self.origins.push(origin);
            }
        }
    }

    pub fn merge(&mut self, other: ConstraintSystem) {
        let base = self.labels.len();
        self.labels.extend(other.labels);
        self.raw_count += other.raw_count;
        for (row, origin) in other.constraints.into_iter().zip(other.origins) {
            if self.seen.insert(row.canonical()) {
                self.constraints.push(row);
                self.origins.push(base + origin);
            }
        }
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Rows generated before deduplication.
    pub fn raw_count(&self) -> usize {
        self.raw_count
    }

    pub fn origin(&self, k: usize) -> &str {
        &self.labels[self.origins[k]]
    }

    /// Distinct parameter indices used, in first-appearance order.
    pub fn parameters(&self) -> Vec<EtaIndex> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for row in &self.constraints {
            for (idx, _) in &row.terms {
                if seen.insert(idx.clone()) {
                    out.push(idx.clone());
                }
            }
        }
        out
    }

    /// Dense coefficient matrix over [`parameters`](Self::parameters).
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let params = self.parameters();
        let col: std::collections::HashMap<&EtaIndex, usize> =
            params.iter().enumerate().map(|(k, p)| (p, k)).collect();
        let mut m = DMatrix::zeros(self.constraints.len(), params.len());
        for (r, row) in self.constraints.iter().enumerate() {
            for (idx, c) in &row.terms {
                m[(r, col[idx])] += f64::from(*c);
            }
        }
        m
    }

    /// Rank of the coefficient matrix.
    pub fn rank(&self) -> usize {
        if self.constraints.is_empty() {
            return 0;
        }
        self.coefficient_matrix().rank(1e-9)
    }

    /// Residual of every row at `pv`.
    pub fn evaluate(&self, pv: &ProbabilityVector) -> Vec<f64> {
        self.constraints.iter().map(|c| c.evaluate(pv)).collect()
    }

    pub fn to_json(&self, variables: &[VariableSpec]) -> serde_json::Value {
        let rows: Vec<_> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| json!({"terms": c.to_json(variables), "origin": self.origin(k)}))
            .collect();
        json!(rows)
    }
}

/// Effects `v` built from `A` and `B`, ordered by size then members.
pub fn interaction_sets(a: VarSet, b: VarSet, which: InteractionSets) -> Vec<VarSet> {
    a.union(b)
        .nonempty_subsets_by_size()
        .into_iter()
        .filter(|v| {
            let (va, vb) = (v.intersection(a), v.intersection(b));
            match which {
                InteractionSets::Proof => !va.is_empty() && !vb.is_empty(),
                InteractionSets::Statement => va.is_empty() || vb.is_empty(),
            }
        })
        .collect()
}

fn merge_cells(v: VarSet, cell_v: &[usize], c: VarSet, cell_c: &[usize]) -> Vec<usize> {
    v.union(c)
        .iter()
        .map(|j| match v.rank_of(j) {
            Some(r) => cell_v[r],
            None => cell_c[c.rank_of(j).unwrap()],
        })
        .collect()
}

/// Rows `sum_{c ⊆ C} (-1)^{|C\c|} T(c) = 0`, one per sub-top cell of `v`,
/// for one context cell of `C` given in coded levels.
///
/// `C` variables must be baseline or local coded (binary variables of any coding
/// behave as local).
pub fn context_rows(
    variables: &[VariableSpec],
    marginal: VarSet,
    v: VarSet,
    cset: VarSet,
    context: &[usize],
) -> Result<Vec<LinearConstraint>, ConstraintError> {
    for j in cset.iter() {
        let spec = &variables[j];
        if spec.coding.is_continuation() && spec.cardinality > 2 {
            return Err(ConstraintError::ContinuationList(spec.name.clone()));
        }
    }
    let mut rows = Vec::new();
    for cell_v in sub_top_cells(variables, v) {
        let mut terms = Vec::new();
        for c in cset.subsets() {
            let sign = if cset.difference(c).len() % 2 == 0 { 1 } else { -1 };
            let ranges: Vec<(usize, usize)> = c
                .iter()
                .map(|j| {
                    let lo = context[cset.rank_of(j).unwrap()];
                    let top = variables[j].cardinality;
                    if variables[j].coding == Coding::Baseline {
                        if lo < top {
                            (lo, lo)
                        } else {
                            (1, 0)
                        }
                    } else {
                        (lo, top - 1)
                    }
                })
                .collect();
            for_each_in_box(&ranges, |cell_c| {
                let cell = merge_cells(v, &cell_v, c, cell_c);
                terms.push((EtaIndex::new(marginal, v.union(c), cell), sign));
            });
        }
        rows.push(LinearConstraint::new(terms, variables));
    }
    Ok(rows)
}

/// Single-parameter rows `eta_{v ∪ c}(i_v, i_c) = 0` for every `c ⊆ C` and every
/// sub-top `i_c` componentwise at or above `lower` (coded levels).
pub fn threshold_rows(
    variables: &[VariableSpec],
    marginal: VarSet,
    v: VarSet,
    cset: VarSet,
    lower: &[usize],
) -> Vec<LinearConstraint> {
    let mut rows = Vec::new();
    for c in cset.subsets() {
        let ranges: Vec<(usize, usize)> = c
            .iter()
            .map(|j| (lower[cset.rank_of(j).unwrap()], variables[j].cardinality - 1))
            .collect();
        for cell_v in sub_top_cells(variables, v) {
            for_each_in_box(&ranges, |cell_c| {
                let cell = merge_cells(v, &cell_v, c, cell_c);
                rows.push(LinearConstraint::new(
                    vec![(EtaIndex::new(marginal, v.union(c), cell), 1)],
                    variables,
                ));
            });
        }
    }
    rows
}

fn check_allocation(stmt: &CsStatement, alloc: Option<&EffectAllocation>) -> Result<(), ConstraintError> {
    if let Some(alloc) = alloc {
        let m = stmt.marginal();
        if !alloc.marginals().contains(&m) {
            return Err(ConstraintError::MarginalAbsent(m));
        }
    }
    Ok(())
}

/// Zeroes `eta_{a ∪ b ∪ c}` for all nonempty `a ⊆ A`, `b ⊆ B`, every `c ⊆ C`.
pub fn constraints_conditional(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    alloc: Option<&EffectAllocation>,
    label: &str,
) -> Result<ConstraintSystem, ConstraintError> {
    stmt.validate(variables)?;
    check_allocation(stmt, alloc)?;
    let m = stmt.marginal();
    let mut rows = Vec::new();
    for v in interaction_sets(stmt.a, stmt.b, InteractionSets::Proof) {
        for c in stmt.c.subsets() {
            let effect = v.union(c);
            for cell in sub_top_cells(variables, effect) {
                rows.push(LinearConstraint::new(vec![(EtaIndex::new(m, effect, cell), 1)], variables));
            }
        }
    }
    let mut sys = ConstraintSystem::new();
    sys.extend(label, rows);
    Ok(sys)
}

fn list_system(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    opts: ConstraintOptions,
    label: &str,
) -> Result<ConstraintSystem, ConstraintError> {
    let m = stmt.marginal();
    let contexts: Vec<Vec<usize>> = stmt
        .context_cells(variables)
        .into_iter()
        .map(|cell| {
            stmt.c
                .iter()
                .zip(cell)
                .map(|(j, l)| variables[j].original_to_coded(l))
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for v in interaction_sets(stmt.a, stmt.b, opts.interaction) {
        let per_context: Vec<Vec<LinearConstraint>> = contexts
            .iter()
            .map(|ctx| context_rows(variables, m, v, stmt.c, ctx))
            .collect::<Result<_, _>>()?;
        let n_cells = per_context.first().map_or(0, Vec::len);
        for k in 0..n_cells {
            for ctx_rows in &per_context {
                rows.push(ctx_rows[k].clone());
            }
        }
    }
    let mut sys = ConstraintSystem::new();
    sys.extend(label, rows);
    Ok(sys)
}

fn require_coding(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    ok: impl Fn(Coding) -> bool,
) -> Result<(), ConstraintError> {
    for j in stmt.c.iter() {
        let spec = &variables[j];
        if spec.cardinality > 2 && !ok(spec.coding) {
            return Err(ConstraintError::CodingMismatch {
                variable: spec.name.clone(),
                coding: spec.coding,
            });
        }
    }
    Ok(())
}

/// List or pattern context with baseline-coded conditioning variables.
pub fn constraints_baseline(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    alloc: Option<&EffectAllocation>,
    opts: ConstraintOptions,
    label: &str,
) -> Result<ConstraintSystem, ConstraintError> {
    stmt.validate(variables)?;
    check_allocation(stmt, alloc)?;
    require_coding(stmt, variables, |c| c == Coding::Baseline)?;
    list_system(stmt, variables, opts, label)
}

/// List or pattern context with local-coded conditioning variables.
pub fn constraints_local(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    alloc: Option<&EffectAllocation>,
    opts: ConstraintOptions,
    label: &str,
) -> Result<ConstraintSystem, ConstraintError> {
    stmt.validate(variables)?;
    check_allocation(stmt, alloc)?;
    require_coding(stmt, variables, |c| c == Coding::Local)?;
    list_system(stmt, variables, opts, label)
}

/// Threshold context. `>=` needs local or continuation coding; `<=` needs
/// reverse-continuation coding and is rewritten as `>=` on the relabeled levels.
pub fn constraints_threshold(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    alloc: Option<&EffectAllocation>,
    opts: ConstraintOptions,
    label: &str,
) -> Result<ConstraintSystem, ConstraintError> {
    stmt.validate(variables)?;
    check_allocation(stmt, alloc)?;
    let (levels, leq) = match &stmt.context {
        Context::Geq(l) => (l, false),
        Context::Leq(l) => (l, true),
        _ => return Err(ConstraintError::NotThreshold),
    };
    let mut lower = Vec::with_capacity(levels.len());
    for (j, &l) in stmt.c.iter().zip(levels) {
        let spec = &variables[j];
        let ok = match spec.coding {
            Coding::Baseline if spec.cardinality > 2 => {
                return Err(ConstraintError::BaselineThreshold(spec.name.clone()))
            }
            Coding::ReverseContinuation => leq,
            _ => !leq || spec.cardinality == 2,
        };
        if !ok {
            return Err(ConstraintError::ThresholdDirection(spec.name.clone()));
        }
        lower.push(if leq { spec.cardinality + 1 - l } else { l });
    }
    let m = stmt.marginal();
    let mut rows = Vec::new();
    for v in interaction_sets(stmt.a, stmt.b, opts.interaction) {
        rows.extend(threshold_rows(variables, m, v, stmt.c, &lower));
    }
    let mut sys = ConstraintSystem::new();
    sys.extend(label, rows);
    Ok(sys)
}

/// Dispatches on the context form and on the codings of the conditioning set.
pub fn constraints_for(
    stmt: &CsStatement,
    variables: &[VariableSpec],
    alloc: Option<&EffectAllocation>,
    opts: ConstraintOptions,
) -> Result<ConstraintSystem, ConstraintError> {
    let label = stmt.display(variables).to_string();
    match stmt.context {
        Context::All => constraints_conditional(stmt, variables, alloc, &label),
        Context::Geq(_) | Context::Leq(_) => constraints_threshold(stmt, variables, alloc, opts, &label),
        Context::Cells(_) | Context::Pattern(_) | Context::Patterns(_) => {
            stmt.validate(variables)?;
            check_allocation(stmt, alloc)?;
            list_system(stmt, variables, opts, &label)
        }
    }
}

/// Row count `(prod_{A ∪ B} I_j - 1) * |K|` for list and pattern contexts.
pub fn expected_constraint_count(stmt: &CsStatement, variables: &[VariableSpec]) -> usize {
    let cells: usize = stmt.a.union(stmt.b).iter().map(|j| variables[j].cardinality).product();
    (cells - 1) * stmt.context_cells(variables).len()
}

/// Rows the list generator actually emits before deduplication:
/// `(prod_A I_j - 1) * (prod_B I_j - 1) * |K|`.
pub fn dependence_constraint_count(stmt: &CsStatement, variables: &[VariableSpec]) -> usize {
    let side = |s: VarSet| -> usize { s.iter().map(|j| variables[j].cardinality).product::<usize>() - 1 };
    side(stmt.a) * side(stmt.b) * stmt.context_cells(variables).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statement::parse_statement;
    use crate::table::numbered_variables;

    fn set(v: &[usize]) -> VarSet {
        VarSet::from_indices(v.iter().map(|x| x - 1))
    }

    fn idx(m: &[usize], e: &[usize], cell: &[usize]) -> EtaIndex {
        EtaIndex::new(set(m), set(e), cell.to_vec())
    }

    #[test]
    fn interaction_set_enumeration() {
        assert_eq!(interaction_sets(set(&[1]), set(&[2]), InteractionSets::Proof), vec![set(&[1, 2])]);
        assert_eq!(
            interaction_sets(set(&[1]), set(&[2, 3]), InteractionSets::Proof),
            vec![set(&[1, 2]), set(&[1, 3]), set(&[1, 2, 3])]
        );
        assert_eq!(interaction_sets(set(&[1, 2]), set(&[3, 4]), InteractionSets::Proof).len(), 9);
        assert_eq!(
            interaction_sets(set(&[1]), set(&[2, 3]), InteractionSets::Statement),
            vec![set(&[1]), set(&[2]), set(&[3]), set(&[2, 3])]
        );
    }

    #[test]
    fn four_way_baseline_first_context() {
        let vars = numbered_variables(&[3, 3, 3, 3], Coding::Baseline);
        let s = parse_statement("CS: {1} _||_ {2} | {3,4} = (1,1)", &vars).unwrap();
        let sys = constraints_baseline(&s, &vars, None, ConstraintOptions::default(), "x").unwrap();
        let m = [1, 2, 3, 4];
        let want = LinearConstraint {
            terms: vec![
                (idx(&m, &[1, 2], &[1, 1]), 1),
                (idx(&m, &[1, 2, 3], &[1, 1, 1]), -1),
                (idx(&m, &[1, 2, 4], &[1, 1, 1]), -1),
                (idx(&m, &[1, 2, 3, 4], &[1, 1, 1, 1]), 1),
            ],
        };
        assert_eq!(sys.constraints()[0].canonical(), want.canonical());
        assert_eq!(sys.len(), 4);
    }

    #[test]
    fn four_way_baseline_top_context() {
        let vars = numbered_variables(&[3, 3, 3, 3], Coding::Baseline);
        let s = parse_statement("CS: {1} _||_ {2} | {3,4} = (1,3)", &vars).unwrap();
        let sys = constraints_baseline(&s, &vars, None, ConstraintOptions::default(), "x").unwrap();
        let m = [1, 2, 3, 4];
        assert_eq!(sys.len(), 4);
        for (row, cell) in sys.constraints().iter().zip([[1, 1], [1, 2], [2, 1], [2, 2]]) {
            let want = LinearConstraint {
                terms: vec![
                    (idx(&m, &[1, 2], &cell), 1),
                    (idx(&m, &[1, 2, 3], &[cell[0], cell[1], 1]), -1),
                ],
            };
            assert_eq!(row.canonical(), want.canonical());
        }
    }

    #[test]
    fn local_sums_upper_levels() {
        let vars = numbered_variables(&[2, 2, 4], Coding::Local);
        let s = parse_statement("CS: {1} _||_ {2} | {3} = (2)", &vars).unwrap();
        let sys = constraints_local(&s, &vars, None, ConstraintOptions::default(), "x").unwrap();
        let m = [1, 2, 3];
        let want = LinearConstraint {
            terms: vec![
                (idx(&m, &[1, 2], &[1, 1]), -1),
                (idx(&m, &[1, 2, 3], &[1, 1, 2]), 1),
                (idx(&m, &[1, 2, 3], &[1, 1, 3]), 1),
            ],
        };
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.constraints()[0].canonical(), want.canonical());
        let s = parse_statement("CS: {1} _||_ {2} | {3} = (4)", &vars).unwrap();
        let sys = constraints_local(&s, &vars, None, ConstraintOptions::default(), "x").unwrap();
        assert_eq!(sys.constraints()[0].terms, vec![(idx(&m, &[1, 2], &[1, 1]), -1)]);
    }

    #[test]
    fn threshold_local_and_continuation() {
        for coding in [Coding::Local, Coding::Continuation] {
            let vars = numbered_variables(&[2, 2, 4], coding);
            let s = parse_statement("CS: {1} _||_ {2} | {3} >= (2)", &vars).unwrap();
            let sys = constraints_threshold(&s, &vars, None, ConstraintOptions::default(), "x").unwrap();
            let got: Vec<EtaIndex> = sys.constraints().iter().map(|r| r.terms[0].0.clone()).collect();
            let m = [1, 2, 3];
            assert_eq!(
                got,
                vec![idx(&m, &[1, 2], &[1, 1]), idx(&m, &[1, 2, 3], &[1, 1, 2]), idx(&m, &[1, 2, 3], &[1, 1, 3])]
            );
        }
    }

    #[test]
    fn threshold_mixed_coding_includes_printed_families() {
        let mut vars = numbered_variables(&[2, 2, 4, 4], Coding::Baseline);
        vars[2].coding = Coding::Local;
        vars[3].coding = Coding::Continuation;
        let s = parse_statement("CS: {1} _||_ {2} | {3,4} >= (2,2)", &vars).unwrap();
        let sys = constraints_threshold(&s, &vars, None, ConstraintOptions::default(), "x").unwrap();
        let got: HashSet<EtaIndex> = sys.constraints().iter().map(|r| r.terms[0].0.clone()).collect();
        let m = [1, 2, 3, 4];
        for (e, c) in [
            (&[1, 2][..], &[1, 1][..]),
            (&[1, 2, 3], &[1, 1, 2]),
            (&[1, 2, 3], &[1, 1, 3]),
            (&[1, 2, 4], &[1, 1, 2]),
            (&[1, 2, 4], &[1, 1, 3]),
            (&[1, 2, 3, 4], &[1, 1, 2, 2]),
            (&[1, 2, 3, 4], &[1, 1, 3, 3]),
            (&[1, 2, 3, 4], &[1, 1, 2, 3]),
            (&[1, 2, 3, 4], &[1, 1, 3, 2]),
        ] {
            assert!(got.contains(&idx(&m, e, c)));
        }
        assert_eq!(sys.len(), 9);
    }

    #[test]
    fn threshold_errors() {
        let vars = numbered_variables(&[2, 2, 4], Coding::Baseline);
        let s = parse_statement("CS: {1} _||_ {2} | {3} >= (2)", &vars).unwrap();
        assert!(matches!(
            constraints_threshold(&s, &vars, None, ConstraintOptions::default(), "x"),
            Err(ConstraintError::BaselineThreshold(_))
        ));
        let vars = numbered_variables(&[2, 2, 4], Coding::Local);
        let s = parse_statement("CS: {1} _||_ {2} | {3} <= (2)", &vars).unwrap();
        assert!(matches!(
            constraints_threshold(&s, &vars, None, ConstraintOptions::default(), "x"),
            Err(ConstraintError::ThresholdDirection(_))
        ));
    }

    #[test]
    fn leq_matches_geq_after_reversal() {
        let rc = numbered_variables(&[2, 2, 4], Coding::ReverseContinuation);
        let c = numbered_variables(&[2, 2, 4], Coding::Continuation);
        let s = parse_statement("CS: {1} _||_ {2} | {3} <= (3)", &rc).unwrap();
        let t = parse_statement("CS: {1} _||_ {2} | {3} >= (2)", &c).unwrap();
        let a = constraints_threshold(&s, &rc, None, ConstraintOptions::default(), "x").unwrap();
        let b = constraints_threshold(&t, &c, None, ConstraintOptions::default(), "x").unwrap();
        assert_eq!(a.constraints(), b.constraints());
    }

    #[test]
    fn continuation_list_is_rejected() {
        let vars = numbered_variables(&[2, 2, 4], Coding::Continuation);
        let s = parse_statement("CS: {1} _||_ {2} | {3} = (2)", &vars).unwrap();
        assert!(matches!(
            constraints_for(&s, &vars, None, ConstraintOptions::default()),
            Err(ConstraintError::ContinuationList(_))
        ));
    }

    #[test]
    fn conditional_zeroes_interactions() {
        let vars = numbered_variables(&[2, 2, 2], Coding::Baseline);
        let s = parse_statement("CI: {1} _||_ {2} | {3}", &vars).unwrap();
        let sys = constraints_conditional(&s, &vars, None, "x").unwrap();
        assert_eq!(sys.len(), 2);
        let effects: Vec<VarSet> = sys.constraints().iter().map(|r| r.terms[0].0.effect).collect();
        assert_eq!(effects, vec![set(&[1, 2]), set(&[1, 2, 3])]);
    }

    #[test]
    fn full_context_matches_conditional_rank() {
        for coding in [Coding::Baseline, Coding::Local] {
            let vars = numbered_variables(&[2, 3, 3], coding);
            let cs = parse_statement("CS: {1} _||_ {2} | {3} = (*)", &vars).unwrap();
            let ci = parse_statement("CI: {1} _||_ {2} | {3}", &vars).unwrap();
            let mut a = constraints_for(&cs, &vars, None, ConstraintOptions::default()).unwrap();
            let b = constraints_for(&ci, &vars, None, ConstraintOptions::default()).unwrap();
            let (ra, rb) = (a.rank(), b.rank());
            a.merge(b);
            assert_eq!(ra, rb);
            assert_eq!(a.rank(), ra);
        }
    }

    #[test]
    fn missing_marginal_in_allocation() {
        let vars = numbered_variables(&[2, 2, 2], Coding::Baseline);
        let alloc = crate::allocation::allocate_effects(&[set(&[1, 2]), set(&[1, 2, 3])]).unwrap();
        let s = parse_statement("CI: {1} _||_ {3} | {}", &vars).unwrap();
        assert!(matches!(
            constraints_for(&s, &vars, Some(&alloc), ConstraintOptions::default()),
            Err(ConstraintError::MarginalAbsent(_))
        ));
    }

    #[test]
    fn count_formulas() {
        let vars = numbered_variables(&[2, 3, 4], Coding::Baseline);
        let s = parse_statement("CS: {1} _||_ {2} | {3} = {(1),(2)}", &vars).unwrap();
        assert_eq!(expected_constraint_count(&s, &vars), 10);
        assert_eq!(dependence_constraint_count(&s, &vars), 4);
        let sys = constraints_for(&s, &vars, None, ConstraintOptions::default()).unwrap();
        assert_eq!(sys.raw_count(), 4);
        let vars = numbered_variables(&[2, 2, 4], Coding::Baseline);
        let s = parse_statement("CS: {1} _||_ {2} | {3} = (*)", &vars).unwrap();
        assert_eq!(expected_constraint_count(&s, &vars), 12);
        let s = parse_statement("CS: {1} _||_ {2} | {3} = (2)", &vars).unwrap();
        assert_eq!(expected_constraint_count(&s, &vars), 3);
    }

    #[test]
    fn dedup_up_to_sign() {
        let vars = numbered_variables(&[2, 2], Coding::Baseline);
        let r = LinearConstraint::new(vec![(idx(&[1, 2], &[1, 2], &[1, 1]), 1)], &vars);
        let mut neg = r.clone();
        neg.terms[0].1 = -1;
        let mut sys = ConstraintSystem::new();
        sys.extend("a", vec![r, neg]);
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.raw_count(), 2);
    }
}
