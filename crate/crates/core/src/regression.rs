//! Regression parameters of a chain graph and its constraint system.
//!
//! For a component `T_h` with parent components `P = pa_D(T_h)` and a response
//! set `A ⊆ T_h`, the conditional logits of `A` given `P` decompose as
//!
//! ```text
//! eta_A(i_A | i_P) = sum_{t ⊆ P} beta^A_t(i_t)
//! ```
//!
//! with `beta^A_t` vanishing whenever a coordinate of `i_t` is at the top
//! level. With baseline-coded covariates
//! `beta^A_t(i_t) = (-1)^{|t|} eta^{P ∪ A}_{t ∪ A}(i_t, i_A)`; local-coded
//! covariates sum the right-hand side over all levels from `i_j` to `I_j - 1`.
//! Relations between a component and earlier, non-parent components are
//! carried by the mixed parameters `eta^{T_h ∪ pre}_{A ∪ B}` where `B` meets
//! the earlier components outside `P`.

use std::collections::{HashMap, HashSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::allocation::{allocate_effects, AllocationError, EffectAllocation};
use crate::constraints::{context_rows, ConstraintError, ConstraintSystem, LinearConstraint};
use crate::eta::{allocation_indices, for_each_in_box, sub_top_cells, EtaError, EtaIndex, EtaVector};
use crate::graph::{MarkovError, Stratum, StratifiedChainGraph};
use crate::table::{Coding, VariableSpec};
use crate::varset::VarSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("graph vertices {graph:?} do not match the table variables {table:?}")]
    VertexMismatch { graph: Vec<String>, table: Vec<String> },
    #[error("covariate `{variable}` is {coding}-coded; regression parameters need baseline or local coding")]
    CovariateCoding { variable: String, coding: String },
    #[error("parameter vector does not use the graph's marginal sets")]
    AllocationMismatch,
    #[error("`{0}` is not a response set of any component")]
    UnknownResponse(String),
    #[error(transparent)]
    Graph(#[from] MarkovError),
    #[error(transparent)]
    Eta(#[from] EtaError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

/// `beta^A_t` over all sub-top cells of `t ∪ A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFamily {
    pub response: VarSet,
    pub covariates: VarSet,
    /// Marginal whose parameters define the family.
    pub marginal: VarSet,
    /// Cells over `t ∪ A` in ascending variable order.
    pub values: Vec<(Vec<usize>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRegression {
    pub component: VarSet,
    pub parents: VarSet,
    pub families: Vec<BetaFamily>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSystem {
    pub variables: Vec<VariableSpec>,
    pub allocation: EffectAllocation,
    pub components: Vec<ComponentRegression>,
    pub mixed: Vec<(EtaIndex, f64)>,
}

fn check_vertices(graph: &StratifiedChainGraph, variables: &[VariableSpec]) -> Result<(), RegressionError> {
    let table: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    if graph.names() != table.as_slice() {
        return Err(RegressionError::VertexMismatch {
            graph: graph.names().to_vec(),
            table,
        });
    }
    Ok(())
}

fn check_covariates(variables: &[VariableSpec], covariates: VarSet) -> Result<(), RegressionError> {
    for j in covariates.iter() {
        let v = &variables[j];
        if v.cardinality > 2 && !matches!(v.coding, Coding::Baseline | Coding::Local) {
            return Err(RegressionError::CovariateCoding {
                variable: v.name.clone(),
                coding: v.coding.as_str().to_string(),
            });
        }
    }
    Ok(())
}

fn cell_of(set: VarSet, sub: VarSet, cell: &[usize]) -> Vec<usize> {
    sub.iter().map(|j| cell[set.rank_of(j).unwrap()]).collect()
}

fn join_cells(a: VarSet, cell_a: &[usize], b: VarSet, cell_b: &[usize]) -> Vec<usize> {
    a.union(b)
        .iter()
        .map(|j| match a.rank_of(j) {
            Some(r) => cell_a[r],
            None => cell_b[b.rank_of(j).unwrap()],
        })
        .collect()
}

/// Level range summed over for covariate `j` at level `i`.
fn cumulative_range(spec: &VariableSpec, i: usize) -> (usize, usize) {
    if spec.coding == Coding::Local {
        (i, spec.cardinality - 1)
    } else {
        (i, i)
    }
}

/// Marginal holding the parameters of response set `a` in component `h`.
fn response_marginal(alloc: &EffectAllocation, parents: VarSet, a: VarSet) -> Option<VarSet> {
    let want = parents.union(a);
    alloc.marginals().iter().copied().find(|m| want.is_subset(*m))
}

/// Mixed parameter indices: for each component, `eta^{T_h ∪ pre}_{A ∪ B}`
/// with `A ⊆ T_h` and `B ⊆ pre` nonempty, `B` meeting `pre \ pa_D(T_h)`,
/// where `pre` is the union of the earlier components.
pub fn mixed_eta_indices(graph: &StratifiedChainGraph, variables: &[VariableSpec]) -> Vec<EtaIndex> {
    let mut out = Vec::new();
    for (h, t) in graph.chain_components().into_iter().enumerate() {
        let pre = graph.predecessors(h);
        let outside = pre.difference(graph.parent_components(h));
        if outside.is_empty() {
            continue;
        }
        let m = pre.union(t);
        for effect in m.nonempty_subsets_by_size() {
            if effect.intersection(t).is_empty() || effect.intersection(outside).is_empty() {
                continue;
            }
            for cell in sub_top_cells(variables, effect) {
                out.push(EtaIndex::new(m, effect, cell));
            }
        }
    }
    out
}

/// Regression parameters and mixed parameters read off a parameter vector
/// allocated on the graph's marginal sets.
pub fn beta_from_eta(eta: &EtaVector, graph: &StratifiedChainGraph) -> Result<RegressionSystem, RegressionError> {
    let variables = &eta.variables;
    check_vertices(graph, variables)?;
    if eta.allocation.marginals() != graph.marginal_sets().as_slice() {
        return Err(RegressionError::AllocationMismatch);
    }
    let lookup = |idx: &EtaIndex| eta.get(idx).ok_or(RegressionError::AllocationMismatch);
    let mut components = Vec::new();
    for (h, t) in graph.chain_components().into_iter().enumerate() {
        let parents = graph.parent_components(h);
        check_covariates(variables, parents)?;
        let mut families = Vec::new();
        for a in t.nonempty_subsets_by_size() {
            let m = response_marginal(&eta.allocation, parents, a).ok_or(RegressionError::AllocationMismatch)?;
            for tset in parents.subsets() {
                let effect = tset.union(a);
                let sign = if tset.len() % 2 == 0 { 1.0 } else { -1.0 };
                let mut values = Vec::new();
                for cell in sub_top_cells(variables, effect) {
                    let cell_a = cell_of(effect, a, &cell);
                    let ranges: Vec<(usize, usize)> = tset
                        .iter()
                        .map(|j| cumulative_range(&variables[j], cell[effect.rank_of(j).unwrap()]))
                        .collect();
                    let mut sum = 0.0;
                    let mut err = None;
                    for_each_in_box(&ranges, |cell_t| {
                        let idx = EtaIndex::new(m, effect, join_cells(a, &cell_a, tset, cell_t));
                        match lookup(&idx) {
                            Ok(v) => sum += v,
                            Err(e) => err = Some(e),
                        }
                    });
                    if let Some(e) = err {
                        return Err(e);
                    }
                    values.push((cell, sign * sum));
                }
                families.push(BetaFamily {
                    response: a,
                    covariates: tset,
                    marginal: m,
                    values,
                });
            }
        }
        components.push(ComponentRegression {
            component: t,
            parents,
            families,
        });
    }
    let mixed = mixed_eta_indices(graph, variables)
        .into_iter()
        .map(|idx| lookup(&idx).map(|v| (idx, v)))
        .collect::<Result<_, _>>()?;
    Ok(RegressionSystem {
        variables: variables.clone(),
        allocation: eta.allocation.clone(),
        components,
        mixed,
    })
}

impl RegressionSystem {
    fn component_of(&self, a: VarSet) -> Result<&ComponentRegression, RegressionError> {
        self.components
            .iter()
            .find(|c| !a.is_empty() && a.is_subset(c.component))
            .ok_or_else(|| RegressionError::UnknownResponse(format!("{a:?}")))
    }

    fn beta(&self, family: &BetaFamily, cell: &[usize]) -> f64 {
        family
            .values
            .iter()
            .find(|(c, _)| c == cell)
            .map_or(0.0, |(_, v)| *v)
    }

    /// `sum_{t ⊆ pa_D} beta^A_t(i_t)`: the conditional logit of `A` at the
    /// covariate cell `context` (levels over `pa_D` in ascending order).
    pub fn eta_conditional(&self, a: VarSet, cell_a: &[usize], context: &[usize]) -> Result<f64, RegressionError> {
        let comp = self.component_of(a)?;
        let mut sum = 0.0;
        for fam in comp.families.iter().filter(|f| f.response == a) {
            let cell_t = cell_of(comp.parents, fam.covariates, context);
            if fam
                .covariates
                .iter()
                .zip(&cell_t)
                .any(|(j, &l)| l >= self.variables[j].cardinality)
            {
                continue;
            }
            let full = join_cells(a, cell_a, fam.covariates, &cell_t);
            sum += self.beta(fam, &full);
        }
        Ok(sum)
    }

    /// Rebuilds the parameter vector the system was read from.
    pub fn to_eta(&self) -> Result<EtaVector, RegressionError> {
        let mut values: HashMap<EtaIndex, f64> = HashMap::new();
        for comp in &self.components {
            for fam in &comp.families {
                let a = fam.response;
                let tset = fam.covariates;
                let effect = tset.union(a);
                let local: Vec<usize> = tset
                    .iter()
                    .filter(|&j| self.variables[j].coding == Coding::Local)
                    .collect();
                let sign = if tset.len() % 2 == 0 { 1.0 } else { -1.0 };
                for (cell, _) in &fam.values {
                    let mut diff = 0.0;
                    for s in 0..(1u32 << local.len()) {
                        let mut shifted = cell.clone();
                        for (k, &j) in local.iter().enumerate() {
                            if s >> k & 1 == 1 {
                                shifted[effect.rank_of(j).unwrap()] += 1;
                            }
                        }
                        let term = if shifted
                            .iter()
                            .zip(effect.iter())
                            .any(|(&l, j)| l >= self.variables[j].cardinality)
                        {
                            0.0
                        } else {
                            self.beta(fam, &shifted)
                        };
                        diff += if s.count_ones() % 2 == 0 { term } else { -term };
                    }
                    values.insert(EtaIndex::new(fam.marginal, effect, cell.clone()), sign * diff);
                }
            }
        }
        for (idx, v) in &self.mixed {
            values.insert(idx.clone(), *v);
        }
        let entries = allocation_indices(&self.variables, &self.allocation)
            .into_iter()
            .map(|idx| {
                let v = values.get(&idx).copied().ok_or(RegressionError::AllocationMismatch)?;
                Ok((idx, v))
            })
            .collect::<Result<Vec<_>, RegressionError>>()?;
        Ok(EtaVector::from_entries(self.variables.clone(), self.allocation.clone(), entries))
    }

    /// Number of free values: every beta plus every mixed parameter.
    pub fn dimension(&self) -> usize {
        self.components
            .iter()
            .flat_map(|c| &c.families)
            .map(|f| f.values.len())
            .sum::<usize>()
            + self.mixed.len()
    }

    fn names(&self, set: VarSet) -> Vec<String> {
        set.iter().map(|j| self.variables[j].name.clone()).collect()
    }

    /// `response_set,covariate_subset,cell,beta`, one line per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("response_set,covariate_subset,cell,beta\n");
        for comp in &self.components {
            for fam in &comp.families {
                for (cell, v) in &fam.values {
                    let levels: Vec<String> = cell.iter().map(|l| l.to_string()).collect();
                    out += &format!(
                        "\"{}\",\"{}\",\"({})\",{v}\n",
                        self.names(fam.response).join(","),
                        self.names(fam.covariates).join(","),
                        levels.join(",")
                    );
                }
            }
        }
        out
    }

    /// Conditional logits of each response set at every covariate cell: one
    /// row per context, one column per response cell.
    pub fn context_tables(&self) -> Vec<Value> {
        let mut tables = Vec::new();
        for comp in &self.components {
            let cards: Vec<(usize, usize)> = comp
                .parents
                .iter()
                .map(|j| (1, self.variables[j].cardinality))
                .collect();
            let mut responses: Vec<VarSet> = comp.families.iter().map(|f| f.response).collect();
            responses.dedup();
            for a in responses {
                let columns = sub_top_cells(&self.variables, a);
                let mut rows = Vec::new();
                for_each_in_box(&cards, |ctx| {
                    let vals: Vec<f64> = columns
                        .iter()
                        .map(|c| self.eta_conditional(a, c, ctx).unwrap_or(f64::NAN))
                        .collect();
                    rows.push(json!({ "context": ctx, "eta": vals }));
                });
                tables.push(json!({
                    "response": self.names(a),
                    "covariates": self.names(comp.parents),
                    "columns": columns,
                    "rows": rows,
                }));
            }
        }
        tables
    }

    pub fn to_json(&self) -> Value {
        let families: Vec<Value> = self
            .components
            .iter()
            .flat_map(|c| &c.families)
            .map(|f| {
                json!({
                    "response": self.names(f.response),
                    "covariates": self.names(f.covariates),
                    "marginal": self.names(f.marginal),
                    "values": f.values.iter().map(|(c, v)| json!({"cell": c, "beta": v})).collect::<Vec<_>>(),
                })
            })
            .collect();
        let mixed: Vec<Value> = self
            .mixed
            .iter()
            .map(|(idx, v)| {
                json!({
                    "marginal": self.names(idx.marginal),
                    "effect": self.names(idx.effect),
                    "cell": idx.cell,
                    "value": v,
                })
            })
            .collect();
        json!({
            "schema": "scgm-report/1",
            "beta": families,
            "mixed": mixed,
            "conditional": self.context_tables(),
        })
    }
}

/// Cells over `over` (stored levels) that agree with some stratum pattern.
fn stratum_cells(stratum: &Stratum, over: VarSet, variables: &[VariableSpec]) -> HashSet<Vec<usize>> {
    let ranges: Vec<(usize, usize)> = over.iter().map(|j| (1, variables[j].cardinality)).collect();
    let given = stratum.given.to_vec();
    let mut out = HashSet::new();
    for_each_in_box(&ranges, |cell| {
        let hit = stratum.patterns.iter().any(|p| {
            given.iter().zip(p).all(|(&g, l)| match (l, over.rank_of(g)) {
                (Some(l), Some(r)) => cell[r] == *l,
                _ => true,
            })
        });
        if hit {
            out.insert(cell.to_vec());
        }
    });
    out
}

fn connected(set: VarSet, adjacent: impl Fn(usize, usize) -> bool) -> bool {
    let Some(first) = set.iter().next() else {
        return true;
    };
    let mut seen = VarSet::singleton(first);
    let mut stack = vec![first];
    while let Some(u) = stack.pop() {
        for w in set.difference(seen).iter() {
            if adjacent(u, w) {
                seen = seen.with(w);
                stack.push(w);
            }
        }
    }
    seen == set
}

fn zero_rows(variables: &[VariableSpec], marginal: VarSet, effect: VarSet) -> Vec<LinearConstraint> {
    sub_top_cells(variables, effect)
        .into_iter()
        .map(|cell| LinearConstraint::new(vec![(EtaIndex::new(marginal, effect, cell), 1)], variables))
        .collect()
}

fn coded(variables: &[VariableSpec], set: VarSet, cell: &[usize]) -> Vec<usize> {
    set.iter()
        .zip(cell)
        .map(|(j, &l)| variables[j].original_to_coded(l))
        .collect()
}

/// Constraint system of a stratified chain graph of type IV.
///
/// - mixed parameters vanish (component against earlier non-parent components);
/// - `eta^{P ∪ L}_{L ∪ t} = 0` for every disconnected `L ⊆ T_h` and `t ⊆ P`;
/// - `eta^{P ∪ L}_{L ∪ t} = 0` for connected `L` and `t ⊄ pa_G(L)`;
/// - undirected strata: `eta^{P ∪ L}_L(i_L | i'_P) = 0` at every parent cell
///   where `L` falls apart once the strata covering that cell are removed;
/// - directed strata `(γ, δ)`: `eta^{P ∪ γ}_{γδ}(i_γ, i_δ | i'_{P \ δ}) = 0`
///   at every context cell.
///
/// Strata count as present links for the first three families.
pub fn scgm_constraints(
    graph: &StratifiedChainGraph,
    variables: &[VariableSpec],
) -> Result<ConstraintSystem, RegressionError> {
    check_vertices(graph, variables)?;
    let issues = graph.validate();
    if !issues.is_empty() {
        return Err(MarkovError::Invalid(issues).into());
    }
    let name = |s: VarSet| graph.set_label(s);
    let mut sys = ConstraintSystem::new();
    let mixed: Vec<LinearConstraint> = mixed_eta_indices(graph, variables)
        .into_iter()
        .map(|idx| LinearConstraint::new(vec![(idx, 1)], variables))
        .collect();
    sys.extend("component vs earlier non-parents", mixed);
    let comps = graph.chain_components();
    let oriented = graph.oriented_strata();
    for (h, &t) in comps.iter().enumerate() {
        let parents = graph.parent_components(h);
        let inner: Vec<&Stratum> = oriented
            .iter()
            .zip(graph.strata())
            .filter(|((g, d), _)| t.contains(*g) && t.contains(*d))
            .map(|(_, s)| s)
            .collect();
        for l in t.nonempty_subsets_by_size() {
            let m = parents.union(l);
            let adjacent = |u: usize, w: usize| graph.neighbours(u).contains(w);
            if l.len() >= 2 && !connected(l, adjacent) {
                let mut rows = Vec::new();
                for tset in parents.subsets() {
                    rows.extend(zero_rows(variables, m, l.union(tset)));
                }
                sys.extend(format!("{} disconnected", name(l)), rows);
                continue;
            }
            let pa_l = graph.parents_of_set(l);
            let mut rows = Vec::new();
            for tset in parents.subsets().filter(|s| !s.is_subset(pa_l)) {
                rows.extend(zero_rows(variables, m, l.union(tset)));
            }
            sys.extend(format!("{} | non-parents", name(l)), rows);
            let touching: Vec<&Stratum> = inner
                .iter()
                .copied()
                .filter(|s| l.contains(s.pair.0) && l.contains(s.pair.1))
                .collect();
            if l.len() < 2 || touching.is_empty() {
                continue;
            }
            let covered: Vec<HashSet<Vec<usize>>> =
                touching.iter().map(|s| stratum_cells(s, parents, variables)).collect();
            let ranges: Vec<(usize, usize)> = parents.iter().map(|j| (1, variables[j].cardinality)).collect();
            let mut contexts = Vec::new();
            for_each_in_box(&ranges, |cell| {
                let removed: Vec<(usize, usize)> = touching
                    .iter()
                    .zip(&covered)
                    .filter(|(_, c)| c.contains(cell))
                    .map(|(s, _)| s.pair)
                    .collect();
                let split = !connected(l, |u, w| {
                    graph.neighbours(u).contains(w)
                        && !removed.iter().any(|&(a, b)| (a, b) == (u, w) || (a, b) == (w, u))
                });
                if split {
                    contexts.push(cell.to_vec());
                }
            });
            if !contexts.is_empty() {
                check_covariates(variables, parents)?;
            }
            let mut rows = Vec::new();
            for cell in contexts {
                rows.extend(context_rows(variables, m, l, parents, &coded(variables, parents, &cell))?);
            }
            sys.extend(format!("{} stratum", name(l)), rows);
        }
        for (stratum, &(g, d)) in graph.strata().iter().zip(&oriented) {
            if !t.contains(g) || t.contains(d) {
                continue;
            }
            let cset = parents.without(d);
            check_covariates(variables, cset)?;
            let m = parents.with(g);
            let v = VarSet::from_indices([g, d]);
            let mut rows = Vec::new();
            let mut cells: Vec<Vec<usize>> = stratum_cells(stratum, cset, variables).into_iter().collect();
            cells.sort();
            for cell in cells {
                rows.extend(context_rows(variables, m, v, cset, &coded(variables, cset, &cell))?);
            }
            sys.extend(format!("{} stratum on {}", name(VarSet::singleton(g)), name(VarSet::singleton(d))), rows);
        }
    }
    Ok(sys)
}

/// Effect allocation on the graph's marginal sets.
pub fn graph_allocation(graph: &StratifiedChainGraph) -> Result<EffectAllocation, RegressionError> {
    Ok(allocate_effects(&graph.marginal_sets())?)
}
