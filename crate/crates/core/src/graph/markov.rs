//! Independence statements implied by a (stratified) chain graph of type IV.
//!
//! Per component `T_h`, in component order:
//! - `T_h ⊥ nd(T_h) \ pa_D(T_h) | pa_D(T_h)`
//! - for each `γ ∈ T_h`: `γ ⊥ T_h \ Nb(γ) | pa_D(T_h)`
//! - for each `γ ∈ T_h`: `γ ⊥ pa_D(T_h) \ pa_G(γ) | pa_G(γ)`
//! - for each stratum `(γ, δ)` inside `T_h`: `γ ⊥ δ | pa_D(T_h) = K`
//! - for each stratum `(γ, δ)` with `δ` in an earlier component:
//!   `γ ⊥ δ | (pa_G(γ) \ δ) ∪ C = K`
//!
//! Single-vertex statements are emitted instead of one per connected subset;
//! statements with an empty side are dropped and duplicates removed.

use serde_json::{json, Value};
use thiserror::Error;

use super::{GraphIssue, Stratum, StratifiedChainGraph};
use crate::statement::{Context, CsStatement};
use crate::varset::VarSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MarkovRule {
    /// Component against its non-descendants.
    Component,
    /// Vertex against the non-neighbours in its component.
    Neighbourhood,
    /// Vertex against the non-parents among the parent components.
    Parents,
    /// Stratum between two vertices of one component.
    UndirectedStratum,
    /// Stratum on a missing arc.
    DirectedStratum,
}

impl MarkovRule {
    pub fn as_str(self) -> &'static str {
        match self {
            MarkovRule::Component => "component",
            MarkovRule::Neighbourhood => "neighbourhood",
            MarkovRule::Parents => "parents",
            MarkovRule::UndirectedStratum => "undirected-stratum",
            MarkovRule::DirectedStratum => "directed-stratum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Marginal,
    Conditional,
    ContextSpecific,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependenceStatement {
    pub rule: MarkovRule,
    pub statement: CsStatement,
}

impl IndependenceStatement {
    pub fn kind(&self) -> StatementKind {
        match (&self.statement.context, self.statement.c.is_empty()) {
            (Context::All, true) => StatementKind::Marginal,
            (Context::All, false) => StatementKind::Conditional,
            _ => StatementKind::ContextSpecific,
        }
    }

    pub fn text(&self, graph: &StratifiedChainGraph) -> String {
        self.statement.display_names(graph.names()).to_string()
    }

    pub fn to_json(&self, graph: &StratifiedChainGraph) -> Value {
        let names = |s: VarSet| s.iter().map(|j| graph.names()[j].clone()).collect::<Vec<_>>();
        let s = &self.statement;
        let context = match &s.context {
            Context::All => Value::Null,
            Context::Cells(cells) => json!(cells),
            Context::Pattern(p) => json!([p]),
            Context::Patterns(ps) => json!(ps),
            Context::Geq(l) | Context::Leq(l) => json!([l]),
        };
        json!({
            "rule": self.rule.as_str(),
            "kind": match self.kind() {
                StatementKind::Marginal => "marginal",
                StatementKind::Conditional => "conditional",
                StatementKind::ContextSpecific => "context-specific",
            },
            "lhs": names(s.a),
            "rhs": names(s.b),
            "given": names(s.c),
            "context": context,
            "text": self.text(graph),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkovError {
    #[error("graph has strata; use the stratified Markov properties")]
    StrataPresent,
    #[error("invalid graph: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<GraphIssue>),
}

/// Key identifying a statement up to swapping its two sides.
fn side_key(s: &CsStatement) -> (Vec<usize>, Vec<usize>, VarSet, Context) {
    let (a, b) = (s.a.to_vec(), s.b.to_vec());
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (lo, hi, s.c, s.context.clone())
}

fn push_unique(out: &mut Vec<IndependenceStatement>, rule: MarkovRule, statement: CsStatement) {
    if statement.a.is_empty() || statement.b.is_empty() {
        return;
    }
    let key = side_key(&statement);
    if out.iter().all(|o| side_key(&o.statement) != key) {
        out.push(IndependenceStatement { rule, statement });
    }
}

/// Stratum context lifted from `C` to the conditioning set `s ⊇ C`.
fn lift_context(stratum: &Stratum, s: VarSet) -> Context {
    if stratum.is_unrestricted() {
        return Context::All;
    }
    let given = stratum.given.to_vec();
    let lifted: Vec<Vec<Option<usize>>> = stratum
        .patterns
        .iter()
        .map(|p| {
            s.iter()
                .map(|v| given.iter().position(|&g| g == v).and_then(|k| p[k]))
                .collect()
        })
        .collect();
    if lifted.iter().flatten().all(Option::is_some) {
        Context::Cells(lifted.into_iter().map(|p| p.into_iter().flatten().collect()).collect())
    } else if lifted.len() == 1 {
        Context::Pattern(lifted.into_iter().next().unwrap())
    } else {
        Context::Patterns(lifted)
    }
}

impl StratifiedChainGraph {
    fn unstratified_statements(&self, out: &mut Vec<IndependenceStatement>) {
        for (h, t) in self.chain_components().into_iter().enumerate() {
            self.component_statements(h, t, out);
        }
    }

    fn component_statements(&self, h: usize, t: VarSet, out: &mut Vec<IndependenceStatement>) {
        let pa_d = self.parent_components(h);
        let nd = self.non_descendants(h);
        push_unique(out, MarkovRule::Component, CsStatement::conditional(t, nd.difference(pa_d), pa_d));
        for g in t.iter() {
            let rest = t.difference(self.neighbourhood(VarSet::singleton(g)));
            push_unique(out, MarkovRule::Neighbourhood, CsStatement::conditional(VarSet::singleton(g), rest, pa_d));
        }
        for g in t.iter() {
            let pa = self.parents(g);
            push_unique(
                out,
                MarkovRule::Parents,
                CsStatement::conditional(VarSet::singleton(g), pa_d.difference(pa), pa),
            );
        }
    }

    /// Statements of the type-IV Markov property of a graph without strata.
    pub fn markov_type_iv(&self) -> Result<Vec<IndependenceStatement>, MarkovError> {
        if !self.strata().is_empty() {
            return Err(MarkovError::StrataPresent);
        }
        let issues = self.validate();
        if !issues.is_empty() {
            return Err(MarkovError::Invalid(issues));
        }
        let mut out = Vec::new();
        self.unstratified_statements(&mut out);
        Ok(out)
    }

    /// Type-IV statements with stratum links treated as present, followed by
    /// the context-specific statement of each stratum.
    pub fn stratified_markov(&self) -> Result<Vec<IndependenceStatement>, MarkovError> {
        let issues = self.validate();
        if !issues.is_empty() {
            return Err(MarkovError::Invalid(issues));
        }
        let mut out = Vec::new();
        let comps = self.chain_components();
        for (h, &t) in comps.iter().enumerate() {
            self.component_statements(h, t, &mut out);
            for (stratum, (g, d)) in self.strata().iter().zip(self.oriented_strata()) {
                if !t.contains(g) {
                    continue;
                }
                let one = VarSet::singleton(g);
                let other = VarSet::singleton(d);
                let (rule, given) = if t.contains(d) {
                    (MarkovRule::UndirectedStratum, self.parent_components(h))
                } else {
                    (
                        MarkovRule::DirectedStratum,
                        self.parents(g).without(d).union(stratum.given),
                    )
                };
                let context = lift_context(stratum, given);
                push_unique(&mut out, rule, CsStatement::new(one, other, given, context));
            }
        }
        Ok(out)
    }
}
