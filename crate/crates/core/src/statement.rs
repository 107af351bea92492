//! Independence statements and their text syntax.
//!
//! ```text
//! CI: {1} _||_ {2} | {3}
//! CS: {1} _||_ {2} | {3,4} = (1,*)
//! CS: {1} _||_ {2} | {3,4} = {(1,1),(2,1)}
//! CS: {1} _||_ {2} | {3,4} >= (2,2)
//! CS: {1} _||_ {2} | {3} <= (2)
//! ```
//!
//! Context levels are stored levels, listed in ascending variable order.

use std::fmt;

use thiserror::Error;

use crate::eta::for_each_in_box;
use crate::table::VariableSpec;
use crate::varset::VarSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatementError {
    #[error("cannot parse statement `{text}`: {msg}")]
    Parse { text: String, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("both sides of an independence must be nonempty")]
    EmptySide,
    #[error("the sets of a statement must be pairwise disjoint")]
    Overlap,
    #[error("context has {got} coordinates but the conditioning set has {expected}")]
    ContextShape { expected: usize, got: usize },
    #[error("context level {level} of variable `{variable}` outside 1..={max}")]
    LevelOutOfRange {
        variable: String,
        level: usize,
        max: usize,
    },
    #[error("context cell list is empty")]
    EmptyContext,
}

/// Context under which an independence is claimed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Context {
    /// Holds for every level of the conditioning set.
    All,
    /// Explicit list of conditioning cells.
    Cells(Vec<Vec<usize>>),
    /// Per variable either a fixed level or `None` for every level.
    Pattern(Vec<Option<usize>>),
    /// Union of several patterns.
    Patterns(Vec<Vec<Option<usize>>>),
    /// Every cell componentwise at or above the given one.
    Geq(Vec<usize>),
    /// Every cell componentwise at or below the given one.
    Leq(Vec<usize>),
}

/// `A ⊥ B | C` restricted to a context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CsStatement {
    pub a: VarSet,
    pub b: VarSet,
    pub c: VarSet,
    pub context: Context,
}

impl CsStatement {
    pub fn conditional(a: VarSet, b: VarSet, c: VarSet) -> Self {
        CsStatement {
            a,
            b,
            c,
            context: Context::All,
        }
    }

    pub fn new(a: VarSet, b: VarSet, c: VarSet, context: Context) -> Self {
        CsStatement { a, b, c, context }
    }

    /// `A ∪ B ∪ C`.
    pub fn marginal(&self) -> VarSet {
        self.a.union(self.b).union(self.c)
    }

    /// Checks set structure and context levels against `variables`.
    pub fn validate(&self, variables: &[VariableSpec]) -> Result<(), StatementError> {
        if self.a.is_empty() || self.b.is_empty() {
            return Err(StatementError::EmptySide);
        }
        if !self.a.is_disjoint(self.b) || !self.a.is_disjoint(self.c) || !self.b.is_disjoint(self.c) {
            return Err(StatementError::Overlap);
        }
        if let Some(j) = self.marginal().iter().find(|&j| j >= variables.len()) {
            return Err(StatementError::UnknownVariable(format!("#{j}")));
        }
        let cvars = self.c.to_vec();
        let check = |levels: &[Option<usize>]| -> Result<(), StatementError> {
            if levels.len() != cvars.len() {
                return Err(StatementError::ContextShape {
                    expected: cvars.len(),
                    got: levels.len(),
                });
            }
            for (&j, l) in cvars.iter().zip(levels) {
                if let Some(l) = *l {
                    let max = variables[j].cardinality;
                    if l < 1 || l > max {
                        return Err(StatementError::LevelOutOfRange {
                            variable: variables[j].name.clone(),
                            level: l,
                            max,
                        });
                    }
                }
            }
            Ok(())
        };
        match &self.context {
            Context::All => Ok(()),
            Context::Cells(cells) => {
                if cells.is_empty() {
                    return Err(StatementError::EmptyContext);
                }
                cells
                    .iter()
                    .try_for_each(|c| check(&c.iter().map(|&l| Some(l)).collect::<Vec<_>>()))
            }
            Context::Pattern(p) => check(p),
            Context::Patterns(ps) => {
                if ps.is_empty() {
                    return Err(StatementError::EmptyContext);
                }
                ps.iter().try_for_each(|p| check(p))
            }
            Context::Geq(c) | Context::Leq(c) => {
                check(&c.iter().map(|&l| Some(l)).collect::<Vec<_>>())
            }
        }
    }

    /// The context as an explicit sorted cell list over `C` (stored levels).
    pub fn context_cells(&self, variables: &[VariableSpec]) -> Vec<Vec<usize>> {
        let cards: Vec<usize> = self.c.iter().map(|j| variables[j].cardinality).collect();
        let ranges: Vec<(usize, usize)> = match &self.context {
            Context::Cells(cells) => {
                let mut cells = cells.clone();
                cells.sort();
                cells.dedup();
                return cells;
            }
            Context::Patterns(ps) => {
                let mut out = Vec::new();
                for p in ps {
                    let ranges: Vec<(usize, usize)> =
                        p.iter().zip(&cards).map(|(l, &c)| l.map_or((1, c), |l| (l, l))).collect();
                    for_each_in_box(&ranges, |c| out.push(c.to_vec()));
                }
                out.sort();
                out.dedup();
                return out;
            }
            Context::All => cards.iter().map(|&c| (1, c)).collect(),
            Context::Pattern(p) => p
                .iter()
                .zip(&cards)
                .map(|(l, &c)| l.map_or((1, c), |l| (l, l)))
                .collect(),
            Context::Geq(lo) => lo.iter().zip(&cards).map(|(&l, &c)| (l, c)).collect(),
            Context::Leq(hi) => hi.iter().map(|&h| (1, h)).collect(),
        };
        let mut out = Vec::new();
        for_each_in_box(&ranges, |c| out.push(c.to_vec()));
        out
    }

    /// True when the context covers every cell of `C`.
    pub fn is_full_context(&self, variables: &[VariableSpec]) -> bool {
        let total: usize = self.c.iter().map(|j| variables[j].cardinality).product();
        self.context_cells(variables).len() == total
    }

    /// Normal form for set comparison: sides ordered, context expanded, and a
    /// context covering all of `C` written as plain conditional independence.
    pub fn canonical(&self, variables: &[VariableSpec]) -> CsStatement {
        let (a, b) = if self.a.to_vec() <= self.b.to_vec() {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        };
        let context = if self.c.is_empty() || self.is_full_context(variables) {
            Context::All
        } else {
            Context::Cells(self.context_cells(variables))
        };
        CsStatement { a, b, c: self.c, context }
    }

    pub fn display<'a>(&'a self, variables: &'a [VariableSpec]) -> StatementDisplay<'a> {
        StatementDisplay {
            stmt: self,
            names: variables.iter().map(|v| v.name.as_str()).collect(),
        }
    }

    /// Display with vertex names indexed like the statement's sets.
    pub fn display_names<'a>(&'a self, names: &'a [String]) -> StatementDisplay<'a> {
        StatementDisplay {
            stmt: self,
            names: names.iter().map(String::as_str).collect(),
        }
    }
}

pub struct StatementDisplay<'a> {
    stmt: &'a CsStatement,
    names: Vec<&'a str>,
}

fn braces(set: VarSet, names: &[&str]) -> String {
    let parts: Vec<&str> = set.iter().map(|j| names[j]).collect();
    format!("{{{}}}", parts.join(","))
}

fn tuple<T: fmt::Display>(levels: &[T]) -> String {
    let parts: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
    format!("({})", parts.join(","))
}

fn pattern(levels: &[Option<usize>]) -> String {
    let parts: Vec<String> = levels
        .iter()
        .map(|l| l.map_or("*".to_string(), |l| l.to_string()))
        .collect();
    format!("({})", parts.join(","))
}

impl fmt::Display for StatementDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.stmt;
        let tag = if matches!(s.context, Context::All) { "CI" } else { "CS" };
        write!(
            f,
            "{tag}: {} _||_ {} | {}",
            braces(s.a, &self.names),
            braces(s.b, &self.names),
            braces(s.c, &self.names)
        )?;
        match &s.context {
            Context::All => Ok(()),
            Context::Cells(cells) if cells.len() == 1 => write!(f, " = {}", tuple(&cells[0])),
            Context::Cells(cells) => {
                let parts: Vec<String> = cells.iter().map(|c| tuple(c)).collect();
                write!(f, " = {{{}}}", parts.join(","))
            }
            Context::Pattern(p) => write!(f, " = {}", pattern(p)),
            Context::Patterns(ps) => {
                let parts: Vec<String> = ps.iter().map(|p| pattern(p)).collect();
                write!(f, " = {{{}}}", parts.join(","))
            }
            Context::Geq(c) => write!(f, " >= {}", tuple(c)),
            Context::Leq(c) => write!(f, " <= {}", tuple(c)),
        }
    }
}

/// Resolves a brace-delimited name list. Names are comma separated; when every
/// declared name is one character, `{12}` is also read as `{1,2}`.
pub fn parse_var_set(text: &str, variables: &[VariableSpec]) -> Result<(VarSet, Vec<usize>), StatementError> {
    let inner = text.trim();
    let inner = inner
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| StatementError::Parse {
            text: text.to_string(),
            msg: "expected `{...}`".into(),
        })?
        .trim();
    let mut order = Vec::new();
    if inner.is_empty() {
        return Ok((VarSet::EMPTY, order));
    }
    let find = |name: &str| variables.iter().position(|v| v.name == name);
    let single_char = variables.iter().all(|v| v.name.chars().count() == 1);
    for tok in inner.split(',').map(str::trim) {
        if let Some(j) = find(tok) {
            order.push(j);
        } else if single_char && tok.chars().count() > 1 {
            for ch in tok.chars().filter(|c| !c.is_whitespace()) {
                let j = find(&ch.to_string()).ok_or_else(|| StatementError::UnknownVariable(ch.to_string()))?;
                order.push(j);
            }
        } else {
            return Err(StatementError::UnknownVariable(tok.to_string()));
        }
    }
    let set = VarSet::from_indices(order.iter().copied());
    if set.len() != order.len() {
        return Err(StatementError::Overlap);
    }
    Ok((set, order))
}

fn parse_tuple(text: &str) -> Result<Vec<Option<usize>>, String> {
    let t = text.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| format!("expected `(...)`, got `{t}`"))?;
    inner
        .split(',')
        .map(|s| {
            let s = s.trim();
            if s == "*" {
                Ok(None)
            } else {
                s.parse::<usize>().map(Some).map_err(|_| format!("bad level `{s}`"))
            }
        })
        .collect()
}

/// Reorders per-variable values from written order to ascending variable order.
fn reorder<T: Clone>(values: &[T], written: &[usize]) -> Vec<T> {
    if values.len() != written.len() {
        // left for validate() to report
        return values.to_vec();
    }
    let mut idx: Vec<usize> = (0..written.len()).collect();
    idx.sort_by_key(|&k| written[k]);
    idx.into_iter().map(|k| values[k].clone()).collect()
}

/// Splits `{...} _||_ {...} | {...} <rest>` into its pieces.
fn split_sets(body: &str) -> Option<(&str, &str, &str, &str)> {
    let (a, rest) = body.split_once("_||_")?;
    let rest = rest.trim_start();
    let close_b = rest.find('}')?;
    let b = &rest[..=close_b];
    let rest = rest[close_b + 1..].trim_start();
    if rest.is_empty() {
        return Some((a, b, "{}", ""));
    }
    let rest = rest.strip_prefix('|')?.trim_start();
    let close_c = rest.find('}')?;
    Some((a, b, &rest[..=close_c], rest[close_c + 1..].trim()))
}

/// Parses one statement line.
pub fn parse_statement(text: &str, variables: &[VariableSpec]) -> Result<CsStatement, StatementError> {
    let err = |msg: &str| StatementError::Parse {
        text: text.to_string(),
        msg: msg.to_string(),
    };
    let line = text.trim();
    let (tag, body) = line.split_once(':').ok_or_else(|| err("missing `CI:` or `CS:` prefix"))?;
    let tag = tag.trim().to_ascii_uppercase();
    if tag != "CI" && tag != "CS" {
        return Err(err("prefix must be `CI` or `CS`"));
    }
    let (a, b, c, rest) = split_sets(body).ok_or_else(|| err("expected `{A} _||_ {B} | {C}`"))?;
    let (a, _) = parse_var_set(a, variables)?;
    let (b, _) = parse_var_set(b, variables)?;
    let (c, c_order) = parse_var_set(c, variables)?;
    let context = if rest.is_empty() {
        Context::All
    } else if let Some(r) = rest.strip_prefix(">=") {
        let t = parse_tuple(r).map_err(|m| err(&m))?;
        let t: Option<Vec<usize>> = t.into_iter().collect();
        Context::Geq(reorder(&t.ok_or_else(|| err("thresholds cannot contain `*`"))?, &c_order))
    } else if let Some(r) = rest.strip_prefix("<=") {
        let t = parse_tuple(r).map_err(|m| err(&m))?;
        let t: Option<Vec<usize>> = t.into_iter().collect();
        Context::Leq(reorder(&t.ok_or_else(|| err("thresholds cannot contain `*`"))?, &c_order))
    } else if let Some(r) = rest.strip_prefix('=') {
        let r = r.trim();
        if let Some(list) = r.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
            let mut patterns = Vec::new();
            let mut rest = list.trim();
            while !rest.is_empty() {
                let close = rest.find(')').ok_or_else(|| err("unterminated cell"))?;
                let t = parse_tuple(&rest[..=close]).map_err(|m| err(&m))?;
                patterns.push(reorder(&t, &c_order));
                rest = rest[close + 1..].trim_start().trim_start_matches(',').trim_start();
            }
            if patterns.iter().flatten().any(Option::is_none) {
                Context::Patterns(patterns)
            } else {
                Context::Cells(patterns.into_iter().map(|p| p.into_iter().flatten().collect()).collect())
            }
        } else {
            let t = parse_tuple(r).map_err(|m| err(&m))?;
            if t.iter().any(Option::is_none) {
                Context::Pattern(reorder(&t, &c_order))
            } else {
                Context::Cells(vec![reorder(&t.into_iter().flatten().collect::<Vec<_>>(), &c_order)])
            }
        }
    } else {
        return Err(err("expected `=`, `>=` or `<=` after the conditioning set"));
    };
    if tag == "CI" && context != Context::All {
        return Err(err("`CI` statements take no context"));
    }
    let stmt = CsStatement { a, b, c, context };
    stmt.validate(variables)?;
    Ok(stmt)
}
