//! Stratified chain graphs: structure, validation and queries.
//!
//! Vertices are indexed `0..n`. Strata mark edges or arcs that are missing
//! only in part of the conditioning space, so for adjacency, parents and
//! component ordering a stratum counts as a present link.

mod markov;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::varset::{VarSet, MAX_VARS};

pub use markov::{IndependenceStatement, MarkovError, MarkovRule, StatementKind};
pub use parse::GraphParseError;

/// Partial edge or arc: `γ ⊥ δ` in the listed contexts of `given`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub pair: (usize, usize),
    pub given: VarSet,
    /// One pattern per entry, levels in ascending vertex order of `given`,
    /// `None` standing for every level.
    pub patterns: Vec<Vec<Option<usize>>>,
}

impl Stratum {
    /// Vertices of `given` fixed to a level in at least one pattern.
    pub fn fixed_vertices(&self) -> VarSet {
        let order = self.given.to_vec();
        let mut out = VarSet::EMPTY;
        for p in &self.patterns {
            for (&v, l) in order.iter().zip(p) {
                if l.is_some() {
                    out = out.with(v);
                }
            }
        }
        out
    }

    /// True when some pattern leaves every vertex free, so the stratum covers
    /// the whole conditioning space.
    pub fn is_unrestricted(&self) -> bool {
        self.patterns.iter().any(|p| p.iter().all(Option::is_none))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphIssue {
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("`{0}` and `{1}` are linked more than once")]
    ConflictingLinks(String, String),
    #[error("undirected edge {0} -- {1} joins different components")]
    EdgeAcrossComponents(String, String),
    #[error("arc {0} -> {1} lies inside one component")]
    ArcWithinComponent(String, String),
    #[error("vertex `{0}` belongs to no component")]
    VertexWithoutComponent(String),
    #[error("vertex `{0}` belongs to several components")]
    VertexInSeveralComponents(String),
    #[error("directed or semi-directed cycle through components {0:?}")]
    Cycle(Vec<String>),
    #[error("stratum on ({0},{1}) sits on a present edge or arc")]
    StratumOnPresentLink(String, String),
    #[error("more than one stratum on ({0},{1})")]
    DuplicateStratum(String, String),
    #[error("stratum on ({0},{1}): context patterns do not match the conditioning set")]
    StratumContextShape(String, String),
    #[error("stratum on ({0},{1}): conditioning vertex `{2}` is not in a parent component")]
    StratumGivenOutsideParents(String, String, String),
    #[error("stratum on ({0},{1}): vertex `{2}` has a fixed level but is not adjacent to or a parent of both")]
    Inadmissible(String, String, String),
}

/// Chain graph with optional strata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedChainGraph {
    names: Vec<String>,
    declared: Option<Vec<(String, VarSet)>>,
    edges: BTreeSet<(usize, usize)>,
    arcs: BTreeSet<(usize, usize)>,
    strata: Vec<Stratum>,
}

/// Ordered chain components with derived lookups.
#[derive(Debug, Clone)]
struct Layout {
    components: Vec<VarSet>,
    labels: Vec<String>,
    component_of: Vec<usize>,
    /// Strata pairs oriented as (γ, δ); for directed strata δ is the tail.
    oriented: Vec<(usize, usize)>,
    cyclic: Vec<usize>,
}

impl StratifiedChainGraph {
    pub fn new(names: Vec<String>) -> Self {
        assert!(names.len() <= MAX_VARS, "at most {MAX_VARS} vertices");
        StratifiedChainGraph {
            names,
            declared: None,
            edges: BTreeSet::new(),
            arcs: BTreeSet::new(),
            strata: Vec::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn all_vertices(&self) -> VarSet {
        VarSet::full(self.names.len())
    }

    pub fn declare_component(&mut self, label: &str, members: VarSet) {
        self.declared
            .get_or_insert_with(Vec::new)
            .push((label.to_string(), members));
    }

    pub fn declared_components(&self) -> Option<&[(String, VarSet)]> {
        self.declared.as_deref()
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        self.edges.insert((u.min(v), u.max(v)));
    }

    pub fn add_arc(&mut self, from: usize, to: usize) {
        self.arcs.insert((from, to));
    }

    pub fn add_stratum(&mut self, stratum: Stratum) {
        self.strata.push(stratum);
    }

    /// Removes the edge or arc joining `u` and `v`; false when absent.
    pub fn remove_link(&mut self, u: usize, v: usize) -> bool {
        let edge = self.edges.remove(&(u.min(v), u.max(v)));
        let arc = self.arcs.remove(&(u, v)) | self.arcs.remove(&(v, u));
        edge || arc
    }

    /// Edges then arcs, each as stored.
    pub fn links(&self) -> Vec<(usize, usize)> {
        self.edges.iter().chain(&self.arcs).copied().collect()
    }

    /// Declares the current chain components so that later link removals
    /// cannot split them.
    pub fn fix_components(&mut self) {
        if self.declared.is_none() {
            let labels = self.component_labels();
            for (label, members) in labels.iter().zip(self.chain_components()) {
                self.declare_component(label, members);
            }
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs.iter().copied()
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    /// Copy with every stratum dropped (the partial links become absent).
    pub fn without_strata(&self) -> Self {
        StratifiedChainGraph {
            strata: Vec::new(),
            ..self.clone()
        }
    }

    pub fn set_label(&self, set: VarSet) -> String {
        let names: Vec<&str> = set.iter().map(|j| self.names[j].as_str()).collect();
        if names.iter().all(|n| n.chars().count() == 1) {
            names.concat()
        } else {
            names.join(",")
        }
    }

    /// Renumbers vertices to follow `order` (names), which must be a
    /// permutation of the vertex names.
    pub fn reordered(&self, order: &[String]) -> Option<Self> {
        if order.len() != self.names.len() {
            return None;
        }
        let map: Vec<usize> = self
            .names
            .iter()
            .map(|n| order.iter().position(|o| o == n))
            .collect::<Option<_>>()?;
        let mset = |s: VarSet| VarSet::from_indices(s.iter().map(|j| map[j]));
        let mut g = StratifiedChainGraph::new(order.to_vec());
        g.declared = self
            .declared
            .as_ref()
            .map(|d| d.iter().map(|(l, s)| (l.clone(), mset(*s))).collect());
        for &(u, v) in &self.edges {
            g.add_edge(map[u], map[v]);
        }
        for &(u, v) in &self.arcs {
            g.add_arc(map[u], map[v]);
        }
        for s in &self.strata {
            let old = s.given.to_vec();
            let new_given = mset(s.given);
            let new_order = new_given.to_vec();
            let patterns = s
                .patterns
                .iter()
                .map(|p| {
                    new_order
                        .iter()
                        .map(|&nv| p[old.iter().position(|&ov| map[ov] == nv).unwrap()])
                        .collect()
                })
                .collect();
            g.add_stratum(Stratum {
                pair: (map[s.pair.0], map[s.pair.1]),
                given: new_given,
                patterns,
            });
        }
        Some(g)
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    fn linked(&self, u: usize, v: usize) -> bool {
        self.has_edge(u, v) || self.arcs.contains(&(u, v)) || self.arcs.contains(&(v, u))
    }

    fn layout(&self) -> Layout {
        let n = self.names.len();
        let (mut components, labels) = match &self.declared {
            Some(d) => {
                let mut comps: Vec<VarSet> = d.iter().map(|(_, s)| *s).collect();
                let mut labels: Vec<String> = d.iter().map(|(l, _)| l.clone()).collect();
                let covered = comps.iter().fold(VarSet::EMPTY, |a, &s| a.union(s));
                for v in self.all_vertices().difference(covered).iter() {
                    comps.push(VarSet::singleton(v));
                    labels.push(format!("{{{}}}", self.names[v]));
                }
                (comps, labels)
            }
            None => {
                let mut seen = VarSet::EMPTY;
                let mut comps = Vec::new();
                for v in 0..n {
                    if seen.contains(v) {
                        continue;
                    }
                    let mut comp = VarSet::singleton(v);
                    let mut frontier = vec![v];
                    while let Some(u) = frontier.pop() {
                        for &(a, b) in &self.edges {
                            let w = if a == u { b } else if b == u { a } else { continue };
                            if !comp.contains(w) {
                                comp = comp.with(w);
                                frontier.push(w);
                            }
                        }
                    }
                    seen = seen.union(comp);
                    comps.push(comp);
                }
                let labels = (1..=comps.len()).map(|k| format!("T{k}")).collect();
                (comps, labels)
            }
        };
        let mut component_of = vec![usize::MAX; n];
        for (k, c) in components.iter().enumerate() {
            for v in c.iter() {
                if component_of[v] == usize::MAX {
                    component_of[v] = k;
                }
            }
        }
        let genuine: Vec<(usize, usize)> = self.arcs.iter().copied().collect();
        let (first, _) = topo_order(components.len(), &genuine, &component_of);
        let pos = inverse(&first);
        let oriented: Vec<(usize, usize)> = self
            .strata
            .iter()
            .map(|s| {
                let (a, b) = s.pair;
                if pos[component_of[a]] >= pos[component_of[b]] {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        let mut all = genuine;
        for &(g, d) in &oriented {
            if component_of[g] != component_of[d] {
                all.push((d, g));
            }
        }
        let (order, cyclic) = topo_order(components.len(), &all, &component_of);
        let pos = inverse(&order);
        let cyclic_new: Vec<usize> = cyclic.iter().map(|&k| pos[k]).collect();
        components = order.iter().map(|&k| components[k]).collect();
        let labels: Vec<String> = order.iter().map(|&k| labels[k].clone()).collect();
        for c in component_of.iter_mut() {
            *c = pos[*c];
        }
        Layout {
            components,
            labels,
            component_of,
            oriented,
            cyclic: cyclic_new,
        }
    }

    /// Chain components in an order compatible with the arcs.
    pub fn chain_components(&self) -> Vec<VarSet> {
        self.layout().components
    }

    pub fn component_labels(&self) -> Vec<String> {
        self.layout().labels
    }

    /// Index (in `chain_components` order) of the component holding `v`.
    pub fn component_of(&self, v: usize) -> usize {
        self.layout().component_of[v]
    }

    /// Strata pairs as `(γ, δ)`: for a directed stratum `δ` lies in an
    /// earlier component.
    pub fn oriented_strata(&self) -> Vec<(usize, usize)> {
        self.layout().oriented
    }

    /// Parents of `v`, including tails of directed strata.
    pub fn parents(&self, v: usize) -> VarSet {
        let mut out = VarSet::from_indices(self.arcs.iter().filter(|a| a.1 == v).map(|a| a.0));
        let lay = self.layout();
        for &(g, d) in &lay.oriented {
            if g == v && lay.component_of[g] != lay.component_of[d] {
                out = out.with(d);
            }
        }
        out
    }

    /// `pa_G(A)`: union of the parents of the members of `A`.
    pub fn parents_of_set(&self, a: VarSet) -> VarSet {
        a.iter().fold(VarSet::EMPTY, |acc, v| acc.union(self.parents(v)))
    }

    /// Undirected neighbours of `v`, including undirected strata.
    pub fn neighbours(&self, v: usize) -> VarSet {
        let mut out = VarSet::EMPTY;
        for &(a, b) in &self.edges {
            if a == v {
                out = out.with(b);
            } else if b == v {
                out = out.with(a);
            }
        }
        let lay = self.layout();
        for &(g, d) in &lay.oriented {
            if lay.component_of[g] == lay.component_of[d] {
                if g == v {
                    out = out.with(d);
                } else if d == v {
                    out = out.with(g);
                }
            }
        }
        out
    }

    /// `Nb(A)`: `A` together with its undirected neighbours.
    pub fn neighbourhood(&self, a: VarSet) -> VarSet {
        a.iter().fold(a, |acc, v| acc.union(self.neighbours(v)))
    }

    /// `pa_D(T_h)`: union of the components holding a parent of `T_h`.
    pub fn parent_components(&self, h: usize) -> VarSet {
        let lay = self.layout();
        let pa = self.parents_of_set(lay.components[h]);
        let mut out = VarSet::EMPTY;
        for v in pa.iter() {
            out = out.union(lay.components[lay.component_of[v]]);
        }
        out
    }

    /// `nd(T_h)`: union of the components not reachable from `T_h` along arcs.
    pub fn non_descendants(&self, h: usize) -> VarSet {
        let lay = self.layout();
        let k = lay.components.len();
        let mut reach = vec![false; k];
        reach[h] = true;
        let mut stack = vec![h];
        while let Some(c) = stack.pop() {
            for (j, comp) in lay.components.iter().enumerate() {
                if !reach[j] && !self.parents_of_set(*comp).intersection(lay.components[c]).is_empty() {
                    reach[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..k)
            .filter(|&j| !reach[j])
            .fold(VarSet::EMPTY, |a, j| a.union(lay.components[j]))
    }

    /// Union of the components ordered before `T_h`.
    pub fn predecessors(&self, h: usize) -> VarSet {
        self.layout().components[..h]
            .iter()
            .fold(VarSet::EMPTY, |a, &c| a.union(c))
    }

    /// True when every fixed conditioning vertex of the stratum is adjacent
    /// to, or a parent of, both members of its pair.
    pub fn is_admissible(&self, stratum: &Stratum) -> bool {
        self.inadmissible_vertices(stratum).is_empty()
    }

    fn inadmissible_vertices(&self, stratum: &Stratum) -> VarSet {
        let (g, d) = stratum.pair;
        let near = |c: usize, x: usize| self.neighbours(x).contains(c) || self.parents(x).contains(c);
        VarSet::from_indices(
            stratum
                .fixed_vertices()
                .iter()
                .filter(|&c| !(near(c, g) && near(c, d))),
        )
    }

    /// Every structural problem of the graph; empty when valid.
    pub fn validate(&self) -> Vec<GraphIssue> {
        let mut issues = Vec::new();
        let name = |v: usize| self.names[v].clone();
        for &(u, v) in self.edges.iter().chain(&self.arcs) {
            if u == v {
                issues.push(GraphIssue::SelfLoop(name(u)));
            }
        }
        for &(u, v) in &self.arcs {
            if u < v && self.arcs.contains(&(v, u)) || self.has_edge(u, v) {
                issues.push(GraphIssue::ConflictingLinks(name(u), name(v)));
            }
        }
        if let Some(decl) = &self.declared {
            for v in 0..self.names.len() {
                match decl.iter().filter(|(_, s)| s.contains(v)).count() {
                    0 => issues.push(GraphIssue::VertexWithoutComponent(name(v))),
                    1 => {}
                    _ => issues.push(GraphIssue::VertexInSeveralComponents(name(v))),
                }
            }
        }
        let lay = self.layout();
        for &(u, v) in &self.edges {
            if lay.component_of[u] != lay.component_of[v] {
                issues.push(GraphIssue::EdgeAcrossComponents(name(u), name(v)));
            }
        }
        for &(u, v) in &self.arcs {
            if u != v && lay.component_of[u] == lay.component_of[v] {
                issues.push(GraphIssue::ArcWithinComponent(name(u), name(v)));
            }
        }
        if !lay.cyclic.is_empty() {
            issues.push(GraphIssue::Cycle(
                lay.cyclic.iter().map(|&k| lay.labels[k].clone()).collect(),
            ));
        }
        let mut seen_pairs = BTreeSet::new();
        for (s, &(g, d)) in self.strata.iter().zip(&lay.oriented) {
            let (pn, qn) = (name(s.pair.0), name(s.pair.1));
            if !seen_pairs.insert((g.min(d), g.max(d))) {
                issues.push(GraphIssue::DuplicateStratum(pn.clone(), qn.clone()));
            }
            if self.linked(g, d) {
                issues.push(GraphIssue::StratumOnPresentLink(pn.clone(), qn.clone()));
            }
            let width = s.given.len();
            if s.patterns.is_empty()
                || s.patterns.iter().any(|p| p.len() != width || p.contains(&Some(0)))
                || s.given.contains(g)
                || s.given.contains(d)
            {
                issues.push(GraphIssue::StratumContextShape(pn.clone(), qn.clone()));
            }
            let h = lay.component_of[g];
            let allowed = self.parent_components(h).without(d);
            for c in s.given.difference(allowed).iter() {
                issues.push(GraphIssue::StratumGivenOutsideParents(pn.clone(), qn.clone(), name(c)));
            }
            for c in self.inadmissible_vertices(s).iter() {
                issues.push(GraphIssue::Inadmissible(pn.clone(), qn.clone(), name(c)));
            }
        }
        issues
    }

    /// True when every two vertices of `set` are adjacent.
    pub fn is_complete(&self, set: VarSet) -> bool {
        set.iter().all(|v| set.without(v).is_subset(self.neighbours(v)))
    }

    /// Response sets `A ⊆ T_h` that get their own marginal `pa_D(T_h) ∪ A`:
    /// all nonempty subsets, except for a complete component without parents,
    /// which only needs `T_h` itself.
    pub fn response_sets(&self, h: usize) -> Vec<VarSet> {
        let t = self.chain_components()[h];
        if self.parent_components(h).is_empty() && self.is_complete(t) {
            vec![t]
        } else {
            t.nonempty_subsets_by_size()
        }
    }

    /// Hierarchical marginal sets for the graph: every `pa_D(T_h) ∪ A` for
    /// the response sets `A` of each component, and for every component the
    /// union of `T_h` with all earlier components. Ordered so that no
    /// marginal is contained in an earlier one.
    pub fn marginal_sets(&self) -> Vec<VarSet> {
        let comps = self.chain_components();
        let mut raw = Vec::new();
        for (h, &t) in comps.iter().enumerate() {
            let pa = self.parent_components(h);
            for a in self.response_sets(h) {
                raw.push(pa.union(a));
            }
            raw.push(self.predecessors(h).union(t));
        }
        order_marginals(raw)
    }
}

/// Deduplicates and orders marginals so that `j < i` implies `M_i ⊄ M_j`,
/// keeping the given order wherever it is already compatible.
pub fn order_marginals(raw: Vec<VarSet>) -> Vec<VarSet> {
    let mut pending: Vec<VarSet> = Vec::new();
    for m in raw {
        if !pending.contains(&m) {
            pending.push(m);
        }
    }
    let mut out = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let k = (0..pending.len())
            .find(|&k| {
                !pending
                    .iter()
                    .any(|&o| o != pending[k] && o.is_subset(pending[k]))
            })
            .expect("strict inclusion is acyclic");
        out.push(pending.remove(k));
    }
    out
}

fn inverse(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (i, &k) in order.iter().enumerate() {
        pos[k] = i;
    }
    pos
}

/// Kahn ordering of components under the given arcs, smallest index first.
/// Components left over (on or behind a cycle) are appended in index order
/// and also returned separately.
fn topo_order(k: usize, arcs: &[(usize, usize)], component_of: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut succ = vec![BTreeSet::new(); k];
    for &(u, v) in arcs {
        let (cu, cv) = (component_of[u], component_of[v]);
        if cu != cv {
            succ[cu].insert(cv);
        }
    }
    let mut indeg = vec![0usize; k];
    for s in &succ {
        for &t in s {
            indeg[t] += 1;
        }
    }
    let mut done = vec![false; k];
    let mut order = Vec::with_capacity(k);
    while let Some(c) = (0..k).find(|&c| !done[c] && indeg[c] == 0) {
        done[c] = true;
        order.push(c);
        for &t in &succ[c] {
            indeg[t] -= 1;
        }
    }
    let rest: Vec<usize> = (0..k).filter(|&c| !done[c]).collect();
    order.extend(&rest);
    (order, rest)
}

impl fmt::Display for StratifiedChainGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&parse::to_text(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_blocks() -> StratifiedChainGraph {
        StratifiedChainGraph::from_text(
            "component T1 = {1,2}\ncomponent T2 = {3,4,5}\nedge 1 -- 2\nedge 3 -- 5\nedge 4 -- 5\narc 1 -> 3\narc 1 -> 4\narc 2 -> 4\n",
        )
        .unwrap()
    }

    fn set(g: &StratifiedChainGraph, names: &str) -> VarSet {
        VarSet::from_indices(names.chars().map(|c| g.vertex(&c.to_string()).unwrap()))
    }

    #[test]
    fn components_and_parents() {
        let g = two_blocks();
        assert!(g.validate().is_empty());
        assert_eq!(g.chain_components(), vec![set(&g, "12"), set(&g, "345")]);
        assert_eq!(g.parent_components(1), set(&g, "12"));
        assert_eq!(g.parent_components(0), VarSet::EMPTY);
        assert_eq!(g.non_descendants(1), set(&g, "12"));
        assert_eq!(g.parents(g.vertex("4").unwrap()), set(&g, "12"));
        assert_eq!(g.neighbourhood(set(&g, "3")), set(&g, "35"));
    }

    #[test]
    fn semi_directed_cycle_is_reported() {
        let g = StratifiedChainGraph::from_text("arc 1 -> 2\nedge 2 -- 3\narc 3 -> 1\n").unwrap();
        assert!(g.validate().iter().any(|i| matches!(i, GraphIssue::Cycle(_))));
    }

    #[test]
    fn declared_membership_is_checked() {
        let g = StratifiedChainGraph::from_text("component T1 = {1,2}\narc 1 -> 2\n").unwrap();
        assert_eq!(
            g.validate(),
            vec![GraphIssue::ArcWithinComponent("1".into(), "2".into())]
        );
        let g = StratifiedChainGraph::from_text("component T1 = {1}\ncomponent T2 = {2}\nedge 1 -- 2\n").unwrap();
        assert!(matches!(g.validate()[0], GraphIssue::EdgeAcrossComponents(..)));
    }

    #[test]
    fn stratum_on_present_edge_is_rejected() {
        let g = StratifiedChainGraph::from_text(
            "component T1 = {1,2}\ncomponent T2 = {3,4}\nedge 1 -- 2\nedge 3 -- 4\narc 1 -> 3\narc 1 -> 4\nstratum (3,4) | {1} = (1)\n",
        )
        .unwrap();
        assert!(g.validate().contains(&GraphIssue::StratumOnPresentLink("3".into(), "4".into())));
    }

    #[test]
    fn two_blocks_marginals() {
        let g = two_blocks();
        let labels: Vec<String> = g.marginal_sets().iter().map(|&m| g.set_label(m)).collect();
        assert_eq!(labels, ["12", "123", "124", "125", "1234", "1235", "1245", "12345"]);
    }

    #[test]
    fn marginal_order_fixes_inclusions() {
        let m = |s: &[usize]| VarSet::from_indices(s.iter().copied());
        let out = order_marginals(vec![m(&[0, 1, 2]), m(&[0]), m(&[0, 1]), m(&[0])]);
        assert_eq!(out, vec![m(&[0]), m(&[0, 1]), m(&[0, 1, 2])]);
    }
}
