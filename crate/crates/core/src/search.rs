//! Three-step model search over chain graphs and their strata.
//!
//! 1. Fit every model with a single link of the skeleton removed.
//! 2. Drop all links whose removal was not rejected, then try adding each of
//!    them back one at a time and select by the criterion.
//! 3. For links whose removal was rejected, try strata that remove the link
//!    only in some contexts of an admissible conditioning vertex, greedily.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::fit::{fit_constrained, FitError, FitOptions, FitResult, AIC_FORMULA, BIC_FORMULA};
use crate::graph::{GraphIssue, StratifiedChainGraph, Stratum};
use crate::regression::{scgm_constraints, RegressionError};
use crate::table::{ContingencyTable, ProbabilityVector, VariableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    /// Largest `G2 - 2 (n_cells - df)` among models with `p > alpha`.
    #[default]
    PaperMaxAic,
    /// Smallest AIC among models with `p > alpha`.
    MinAic,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::PaperMaxAic => "paper-max-aic",
            Criterion::MinAic => "min-aic",
        }
    }

    fn prefers(self, a: f64, b: f64) -> bool {
        match self {
            Criterion::PaperMaxAic => a > b,
            Criterion::MinAic => a < b,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-max-aic" => Ok(Criterion::PaperMaxAic),
            "min-aic" => Ok(Criterion::MinAic),
            _ => Err(format!("unknown criterion {s:?} (expected paper-max-aic or min-aic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub criterion: Criterion,
    pub alpha: f64,
    pub fit: FitOptions,
    /// Rounds of the greedy stratum step.
    pub max_relaxations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            criterion: Criterion::default(),
            alpha: 0.05,
            fit: FitOptions::default(),
            max_relaxations: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("skeleton is not a valid chain graph: {0:?}")]
    Graph(Vec<GraphIssue>),
    #[error("the skeleton must not carry strata")]
    StrataInSkeleton,
    #[error("the skeleton has no links to test")]
    EmptySkeleton,
    #[error("table variables do not match the graph vertices")]
    VertexMismatch,
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub g2: f64,
    pub df: usize,
    pub p_value: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl From<&FitResult> for FitSummary {
    fn from(r: &FitResult) -> Self {
        FitSummary {
            g2: r.g2,
            df: r.df,
            p_value: r.p_value,
            aic: r.aic,
            bic: r.bic,
            converged: r.converged,
            iterations: r.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub graph: StratifiedChainGraph,
    pub statements: Vec<String>,
    pub fit: Result<FitSummary, String>,
}

impl Candidate {
    fn to_json(&self) -> Value {
        let fit = match &self.fit {
            Ok(s) => json!({
                "G2": s.g2, "df": s.df, "p_value": s.p_value, "AIC": s.aic, "BIC": s.bic,
                "converged": s.converged, "iterations": s.iterations,
            }),
            Err(e) => json!({ "error": e }),
        };
        json!({ "label": self.label, "statements": self.statements, "fit": fit })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub name: String,
    pub candidates: Vec<Candidate>,
    pub selected: Option<usize>,
    pub decision: String,
}

impl SearchStep {
    /// One row per candidate: label, G2, df, p, AIC, BIC.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,G2,df,p_value,AIC,BIC,selected\n");
        for (k, c) in self.candidates.iter().enumerate() {
            let mark = u8::from(self.selected == Some(k));
            match &c.fit {
                Ok(s) => out.push_str(&format!(
                    "\"{}\",{:.4},{},{:.6},{:.4},{:.4},{mark}\n",
                    c.label, s.g2, s.df, s.p_value, s.aic, s.bic
                )),
                Err(_) => out.push_str(&format!("\"{}\",,,,,,{mark}\n", c.label)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub criterion: Criterion,
    pub alpha: f64,
    pub steps: Vec<SearchStep>,
    pub selected: StratifiedChainGraph,
    /// Links dropped from the reduced model, as vertex pairs.
    pub removed: Vec<(usize, usize)>,
    /// Links whose single removal was rejected.
    pub rejected: Vec<(usize, usize)>,
}

impl SearchTrace {
    /// Statements of the selected model.
    pub fn selected_statements(&self) -> BTreeSet<String> {
        statement_texts(&self.selected).into_iter().collect()
    }

    pub fn to_json(&self) -> Value {
        let pair = |g: &StratifiedChainGraph, &(u, v): &(usize, usize)| json!([g.names()[u], g.names()[v]]);
        let g = &self.selected;
        json!({
            "schema": "scgm-search/1",
            "criterion": self.criterion.as_str(),
            "alpha": self.alpha,
            "formulas": { "AIC": AIC_FORMULA, "BIC": BIC_FORMULA },
            "removed_links": self.removed.iter().map(|p| pair(g, p)).collect::<Vec<_>>(),
            "rejected_links": self.rejected.iter().map(|p| pair(g, p)).collect::<Vec<_>>(),
            "steps": self.steps.iter().map(|s| json!({
                "name": s.name,
                "selected": s.selected,
                "decision": s.decision,
                "candidates": s.candidates.iter().map(Candidate::to_json).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "selected_graph": g.to_json(),
            "selected_statements": self.selected_statements(),
        })
    }
}

fn statement_texts(g: &StratifiedChainGraph) -> Vec<String> {
    g.stratified_markov()
        .map(|s| s.iter().map(|st| st.text(g)).collect())
        .unwrap_or_default()
}

fn link_label(g: &StratifiedChainGraph, (u, v): (usize, usize)) -> String {
    let n = g.names();
    if g.component_of(u) == g.component_of(v) {
        format!("{} -- {}", n[u], n[v])
    } else {
        format!("{} -> {}", n[u], n[v])
    }
}

fn stratum_label(g: &StratifiedChainGraph, s: &Stratum) -> String {
    let n = g.names();
    let given: Vec<&str> = s.given.iter().map(|j| n[j].as_str()).collect();
    let patterns: Vec<String> = s
        .patterns
        .iter()
        .map(|p| {
            let cells: Vec<String> = p.iter().map(|l| l.map_or("*".to_string(), |x| x.to_string())).collect();
            format!("({})", cells.join(","))
        })
        .collect();
    format!(
        "({},{}) | {{{}}} = {{{}}}",
        n[s.pair.0],
        n[s.pair.1],
        given.join(","),
        patterns.join(",")
    )
}

fn fit_graph(table: &ContingencyTable, g: &StratifiedChainGraph, opts: &FitOptions) -> Result<FitResult, String> {
    let sys = scgm_constraints(g, table.variables()).map_err(|e| e.to_string())?;
    fit_constrained(table, &sys, opts).map_err(|e| e.to_string())
}

fn evaluate(table: &ContingencyTable, models: Vec<(String, StratifiedChainGraph)>, opts: &FitOptions) -> Vec<Candidate> {
    models
        .into_par_iter()
        .map(|(label, graph)| {
            let fit = fit_graph(table, &graph, opts).map(|r| FitSummary::from(&r));
            let statements = statement_texts(&graph);
            Candidate {
                label,
                graph,
                statements,
                fit,
            }
        })
        .collect()
}

/// Index of the preferred candidate: those with `p > alpha` first, then all
/// fitted ones; ties go to the earliest.
fn select(candidates: &[Candidate], criterion: Criterion, alpha: f64) -> Option<usize> {
    let pick = |eligible: &dyn Fn(&FitSummary) -> bool| {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in candidates.iter().enumerate() {
            if let Ok(s) = &c.fit {
                if eligible(s) && best.is_none_or(|(_, a)| criterion.prefers(s.aic, a)) {
                    best = Some((k, s.aic));
                }
            }
        }
        best.map(|b| b.0)
    };
    pick(&|s| s.p_value > alpha).or_else(|| pick(&|_| true))
}

/// Strata that remove `link` of `g` only where one admissible parent vertex
/// takes a single level, or a run of levels starting at either end.
pub fn stratum_options(g: &StratifiedChainGraph, link: (usize, usize), variables: &[VariableSpec]) -> Vec<Stratum> {
    let (u, v) = link;
    let (gamma, delta) = if g.component_of(u) >= g.component_of(v) { (u, v) } else { (v, u) };
    let mut without = g.clone();
    without.remove_link(u, v);
    let h = g.component_of(gamma);
    let directed = g.component_of(delta) != h;
    let given = if directed {
        g.parent_components(h).without(delta)
    } else {
        g.parent_components(h)
    };
    let near = |c: usize, x: usize| without.neighbours(x).contains(c) || without.parents(x).contains(c);
    let mut out = Vec::new();
    for j in given.iter().filter(|&j| near(j, gamma) && near(j, delta)) {
        let card = variables[j].cardinality;
        let mut level_sets: Vec<Vec<usize>> = (1..=card).map(|l| vec![l]).collect();
        for l in 2..card {
            level_sets.push((1..=l).collect());
            level_sets.push((card + 1 - l..=card).collect());
        }
        let rank = given.rank_of(j).expect("member of the conditioning set");
        for levels in level_sets {
            let patterns = levels
                .iter()
                .map(|&l| {
                    let mut p = vec![None; given.len()];
                    p[rank] = Some(l);
                    p
                })
                .collect();
            out.push(Stratum {
                pair: (gamma, delta),
                given,
                patterns,
            });
        }
    }
    out
}

fn check_inputs(table: &ContingencyTable, skeleton: &StratifiedChainGraph) -> Result<(), SearchError> {
    if !skeleton.strata().is_empty() {
        return Err(SearchError::StrataInSkeleton);
    }
    let issues = skeleton.validate();
    if !issues.is_empty() {
        return Err(SearchError::Graph(issues));
    }
    if skeleton.links().is_empty() {
        return Err(SearchError::EmptySkeleton);
    }
    let names: Vec<&str> = table.variables().iter().map(|v| v.name.as_str()).collect();
    let vertices: Vec<&str> = skeleton.names().iter().map(String::as_str).collect();
    if names != vertices {
        return Err(SearchError::VertexMismatch);
    }
    Ok(())
}

/// Runs the three-step search from `skeleton`, which fixes the chain
/// components and the largest set of links considered.
pub fn model_search(
    table: &ContingencyTable,
    skeleton: &StratifiedChainGraph,
    options: &SearchOptions,
) -> Result<SearchTrace, SearchError> {
    check_inputs(table, skeleton)?;
    let mut base = skeleton.clone();
    base.fix_components();
    let alpha = options.alpha;
    let links = base.links();
    let mut steps = Vec::new();

    let singles = links
        .iter()
        .map(|&l| {
            let mut g = base.clone();
            g.remove_link(l.0, l.1);
            (format!("without {}", link_label(&base, l)), g)
        })
        .collect();
    let singles = evaluate(table, singles, &options.fit);
    let mut removed = Vec::new();
    let mut rejected = Vec::new();
    for (&l, c) in links.iter().zip(&singles) {
        match &c.fit {
            Ok(s) if s.p_value > alpha => removed.push(l),
            _ => rejected.push(l),
        }
    }
    steps.push(SearchStep {
        name: "single-link removal".into(),
        candidates: singles,
        selected: None,
        decision: format!("{} links not rejected at level {alpha}", removed.len()),
    });

    let mut reduced = base.clone();
    for &(u, v) in &removed {
        reduced.remove_link(u, v);
    }
    let mut models = vec![("reduced".to_string(), reduced.clone())];
    for &l in &removed {
        let mut g = reduced.clone();
        if base.component_of(l.0) == base.component_of(l.1) {
            g.add_edge(l.0, l.1);
        } else {
            g.add_arc(l.0, l.1);
        }
        models.push((format!("reduced + {}", link_label(&base, l)), g));
    }
    let cands = evaluate(table, models, &options.fit);
    let pick = select(&cands, options.criterion, alpha).unwrap_or(0);
    let mut current = cands[pick].clone();
    steps.push(SearchStep {
        name: "reduced model".into(),
        decision: format!("selected {} by {}", current.label, options.criterion),
        candidates: cands,
        selected: Some(pick),
    });

    for round in 1..=options.max_relaxations {
        let graph = current.graph.clone();
        let stratified: BTreeSet<(usize, usize)> = graph.strata().iter().map(|s| s.pair).collect();
        let mut models = Vec::new();
        for &l in &rejected {
            let present = graph.links().contains(&l);
            if !present || stratified.contains(&l) || stratified.contains(&(l.1, l.0)) {
                continue;
            }
            for s in stratum_options(&graph, l, table.variables()) {
                let mut g = graph.clone();
                g.remove_link(l.0, l.1);
                let label = stratum_label(&g, &s);
                g.add_stratum(s);
                if g.validate().is_empty() {
                    models.push((label, g));
                }
            }
        }
        if models.is_empty() {
            break;
        }
        let mut cands = vec![Candidate {
            label: "current".into(),
            ..current.clone()
        }];
        cands.extend(evaluate(table, models, &options.fit));
        let pick = select(&cands, options.criterion, alpha).unwrap_or(0);
        let decision = if pick == 0 {
            "kept the current model".to_string()
        } else {
            format!("added stratum {}", cands[pick].label)
        };
        steps.push(SearchStep {
            name: format!("stratum round {round}"),
            candidates: cands.clone(),
            selected: Some(pick),
            decision,
        });
        if pick == 0 {
            break;
        }
        current = cands[pick].clone();
    }

    Ok(SearchTrace {
        criterion: options.criterion,
        alpha,
        steps,
        selected: current.graph,
        removed,
        rejected,
    })
}

/// A distribution that satisfies every constraint of `graph`, with strong
/// pairwise associations along its links and strata.
///
/// Log-linear weights with one interaction of size 0.25 to 0.5 and random sign
/// per link are projected onto the model by a constrained fit.
pub fn synthetic_distribution(
    graph: &StratifiedChainGraph,
    variables: &[VariableSpec],
    seed: u64,
) -> Result<ProbabilityVector, SearchError> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = graph.links();
    pairs.extend(graph.strata().iter().map(|s| s.pair));
    let thetas: Vec<f64> = pairs
        .iter()
        .map(|_| {
            let size = rng.random_range(0.25..0.5);
            if rng.random_bool(0.5) {
                size
            } else {
                -size
            }
        })
        .collect();
    let mains: Vec<Vec<f64>> = variables
        .iter()
        .map(|v| {
            (0..v.cardinality)
                .map(|_| 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect()
        })
        .collect();
    let score = |j: usize, level: usize| (level - 1) as f64 / (variables[j].cardinality - 1) as f64 - 0.5;
    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
    let layout = crate::table::Layout::new(&cards);
    let weights: Vec<f64> = layout
        .cells()
        .map(|c| {
            let main: f64 = c.iter().enumerate().map(|(j, &l)| mains[j][l - 1]).sum();
            let inter: f64 = pairs
                .iter()
                .zip(&thetas)
                .map(|(&(u, v), t)| 4.0 * t * score(u, c[u]) * score(v, c[v]))
                .sum();
            (main + inter).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let scaled = weights.iter().map(|w| w / total * 1e6).collect();
    let table = ContingencyTable::new(variables.to_vec(), scaled).map_err(FitError::from)?;
    let sys = scgm_constraints(graph, variables)?;
    Ok(fit_constrained(&table, &sys, &FitOptions::default())?.pi_hat)
}
