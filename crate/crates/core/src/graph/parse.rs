//! Text and JSON forms of stratified chain graphs.
//!
//! ```text
//! vertices 1,2,3,4,5,6,7
//! component T1 = {5,6,7}
//! edge 5 -- 6
//! arc 5 -> 2
//! stratum (1,2) | {3,4,5,6,7} = (1,*,3,*,1)
//! stratum (3,4) | {1,2} = {(1,*),(2,2)}
//! ```
//!
//! `#` starts a comment. Without a `vertices` line, vertices are collected in
//! order of appearance, or sorted numerically when every name is a number.
//! Without `component` lines, components are the connected pieces of the
//! undirected edges.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Stratum, StratifiedChainGraph};
use crate::varset::{VarSet, MAX_VARS};

#[derive(Debug, Error)]
pub enum GraphParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("more than {MAX_VARS} vertices")]
    TooManyVertices,
    #[error("expected schema `scgm-graph/1`, found `{0}`")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphJson {
    schema: String,
    vertices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<ComponentJson>>,
    #[serde(default)]
    edges: Vec<[String; 2]>,
    #[serde(default)]
    arcs: Vec<[String; 2]>,
    #[serde(default)]
    strata: Vec<StratumJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComponentJson {
    name: String,
    vertices: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StratumJson {
    pair: [String; 2],
    given: Vec<String>,
    /// Patterns in the order of `given`; `null` is any level.
    context: Vec<Vec<Option<usize>>>,
}

enum Item {
    Vertices(Vec<String>),
    Component(String, Vec<String>),
    Edge(String, String),
    Arc(String, String),
    Stratum(StratumJson),
}

fn split_names(inner: &str) -> Vec<String> {
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn braced(text: &str) -> Option<&str> {
    text.trim().strip_prefix('{')?.strip_suffix('}')
}

fn parse_pattern(text: &str) -> Result<Vec<Option<usize>>, String> {
    let inner = text
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| format!("expected `(...)`, got `{}`", text.trim()))?;
    inner
        .split(',')
        .map(|s| match s.trim() {
            "*" => Ok(None),
            t => t.parse().map(Some).map_err(|_| format!("bad level `{t}`")),
        })
        .collect()
}

fn parse_line(line: &str) -> Result<Option<Item>, String> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (kw, rest) = line.split_once(char::is_whitespace).ok_or("incomplete line")?;
    let rest = rest.trim();
    let item = match kw {
        "vertices" => Item::Vertices(split_names(braced(rest).unwrap_or(rest))),
        "component" => {
            let (label, set) = rest.split_once('=').ok_or("expected `component NAME = {...}`")?;
            let set = braced(set).ok_or("component members must be in braces")?;
            Item::Component(label.trim().to_string(), split_names(set))
        }
        "edge" => {
            let (a, b) = rest.split_once("--").ok_or("expected `edge A -- B`")?;
            Item::Edge(a.trim().into(), b.trim().into())
        }
        "arc" => {
            let (a, b) = rest.split_once("->").ok_or("expected `arc A -> B`")?;
            Item::Arc(a.trim().into(), b.trim().into())
        }
        "stratum" => {
            let (pair, rest) = rest.split_once('|').ok_or("expected `stratum (A,B) | {C} = ...`")?;
            let pair = pair
                .trim()
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or("stratum pair must be `(A,B)`")?;
            let names = split_names(pair);
            let [a, b]: [String; 2] = names.try_into().map_err(|_| "stratum pair needs two vertices")?;
            let (given, ctx) = rest.split_once('=').ok_or("stratum needs `= context`")?;
            let given = split_names(braced(given).ok_or("conditioning set must be in braces")?);
            let ctx = ctx.trim();
            let context = match braced(ctx) {
                Some(list) => {
                    let mut out = Vec::new();
                    let mut rest = list.trim();
                    while !rest.is_empty() {
                        let close = rest.find(')').ok_or("unterminated pattern")?;
                        out.push(parse_pattern(&rest[..=close])?);
                        rest = rest[close + 1..].trim_start().trim_start_matches(',').trim_start();
                    }
                    out
                }
                None => vec![parse_pattern(ctx)?],
            };
            Item::Stratum(StratumJson {
                pair: [a, b],
                given,
                context,
            })
        }
        other => return Err(format!("unknown keyword `{other}`")),
    };
    Ok(Some(item))
}

fn build(
    vertices: Option<Vec<String>>,
    components: Option<Vec<ComponentJson>>,
    edges: Vec<[String; 2]>,
    arcs: Vec<[String; 2]>,
    strata: Vec<StratumJson>,
) -> Result<StratifiedChainGraph, GraphParseError> {
    let names = match vertices {
        Some(v) => v,
        None => {
            let mut seen: Vec<String> = Vec::new();
            let mut note = |n: &String| {
                if !seen.contains(n) {
                    seen.push(n.clone());
                }
            };
            for c in components.iter().flatten() {
                c.vertices.iter().for_each(&mut note);
            }
            for [a, b] in edges.iter().chain(&arcs) {
                note(a);
                note(b);
            }
            for s in &strata {
                s.pair.iter().chain(&s.given).for_each(&mut note);
            }
            if seen.iter().all(|n| n.parse::<u64>().is_ok()) {
                seen.sort_by_key(|n| n.parse::<u64>().unwrap());
            }
            seen
        }
    };
    if names.len() > MAX_VARS {
        return Err(GraphParseError::TooManyVertices);
    }
    let mut g = StratifiedChainGraph::new(names);
    let idx = |g: &StratifiedChainGraph, n: &str| g.vertex(n).ok_or_else(|| GraphParseError::UnknownVertex(n.into()));
    let set = |g: &StratifiedChainGraph, ns: &[String]| -> Result<VarSet, GraphParseError> {
        ns.iter().try_fold(VarSet::EMPTY, |s, n| Ok(s.with(idx(g, n)?)))
    };
    for c in components.iter().flatten() {
        let members = set(&g, &c.vertices)?;
        g.declare_component(&c.name, members);
    }
    for [a, b] in &edges {
        let (u, v) = (idx(&g, a)?, idx(&g, b)?);
        g.add_edge(u, v);
    }
    for [a, b] in &arcs {
        let (u, v) = (idx(&g, a)?, idx(&g, b)?);
        g.add_arc(u, v);
    }
    for s in strata {
        let written: Vec<usize> = s.given.iter().map(|n| idx(&g, n)).collect::<Result<_, _>>()?;
        let given = VarSet::from_indices(written.iter().copied());
        let mut perm: Vec<usize> = (0..written.len()).collect();
        perm.sort_by_key(|&k| written[k]);
        let patterns = s
            .context
            .iter()
            .map(|p| {
                if p.len() == written.len() {
                    perm.iter().map(|&k| p[k]).collect()
                } else {
                    p.clone()
                }
            })
            .collect();
        let pair = (idx(&g, &s.pair[0])?, idx(&g, &s.pair[1])?);
        g.add_stratum(Stratum { pair, given, patterns });
    }
    Ok(g)
}

impl StratifiedChainGraph {
    pub fn from_text(text: &str) -> Result<Self, GraphParseError> {
        let mut vertices = None;
        let mut components: Option<Vec<ComponentJson>> = None;
        let (mut edges, mut arcs, mut strata) = (Vec::new(), Vec::new(), Vec::new());
        for (k, line) in text.lines().enumerate() {
            let item = parse_line(line).map_err(|msg| GraphParseError::Syntax { line: k + 1, msg })?;
            match item {
                None => {}
                Some(Item::Vertices(v)) => vertices = Some(v),
                Some(Item::Component(name, vs)) => components
                    .get_or_insert_with(Vec::new)
                    .push(ComponentJson { name, vertices: vs }),
                Some(Item::Edge(a, b)) => edges.push([a, b]),
                Some(Item::Arc(a, b)) => arcs.push([a, b]),
                Some(Item::Stratum(s)) => strata.push(s),
            }
        }
        build(vertices, components, edges, arcs, strata)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphParseError> {
        let j: GraphJson = serde_json::from_str(text)?;
        if j.schema != "scgm-graph/1" {
            return Err(GraphParseError::Schema(j.schema));
        }
        build(Some(j.vertices), j.components, j.edges, j.arcs, j.strata)
    }

    /// Reads JSON when the text starts with `{`, the line format otherwise.
    pub fn parse(text: &str) -> Result<Self, GraphParseError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = |v: usize| self.names()[v].clone();
        let ns = |s: VarSet| s.iter().map(n).collect::<Vec<_>>();
        let j = GraphJson {
            schema: "scgm-graph/1".into(),
            vertices: self.names().to_vec(),
            components: self.declared_components().map(|d| {
                d.iter()
                    .map(|(l, s)| ComponentJson {
                        name: l.clone(),
                        vertices: ns(*s),
                    })
                    .collect()
            }),
            edges: self.edges().map(|(a, b)| [n(a), n(b)]).collect(),
            arcs: self.arcs().map(|(a, b)| [n(a), n(b)]).collect(),
            strata: self
                .strata()
                .iter()
                .map(|s| StratumJson {
                    pair: [n(s.pair.0), n(s.pair.1)],
                    given: ns(s.given),
                    context: s.patterns.clone(),
                })
                .collect(),
        };
        serde_json::to_value(j).expect("graph serializes")
    }
}

pub(super) fn to_text(g: &StratifiedChainGraph) -> String {
    let n = |v: usize| g.names()[v].as_str();
    let ns = |s: VarSet| s.iter().map(n).collect::<Vec<_>>().join(",");
    let mut out = format!("vertices {}\n", g.names().join(","));
    for (l, s) in g.declared_components().unwrap_or(&[]) {
        out += &format!("component {l} = {{{}}}\n", ns(*s));
    }
    for (a, b) in g.edges() {
        out += &format!("edge {} -- {}\n", n(a), n(b));
    }
    for (a, b) in g.arcs() {
        out += &format!("arc {} -> {}\n", n(a), n(b));
    }
    for s in g.strata() {
        let pats: Vec<String> = s
            .patterns
            .iter()
            .map(|p| {
                let parts: Vec<String> = p.iter().map(|l| l.map_or("*".into(), |l| l.to_string())).collect();
                format!("({})", parts.join(","))
            })
            .collect();
        out += &format!(
            "stratum ({},{}) | {{{}}} = {{{}}}\n",
            n(s.pair.0),
            n(s.pair.1),
            ns(s.given),
            pats.join(",")
        );
    }
    out
}
