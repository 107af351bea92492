//! Contingency tables over ordinal variables and probability-vector arithmetic.
//!
//! Cells are stored lexicographically with the LAST declared variable varying
//! fastest. Levels are 1-based everywhere in the public API.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::varset::{VarSet, MAX_VARS};

pub const TABLE_SCHEMA: &str = "scgm-table/1";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate cell {0:?}")]
    DuplicateCell(Vec<usize>),
    #[error("level {level} of variable `{variable}` outside 1..={cardinality}")]
    LevelOutOfRange {
        variable: String,
        level: usize,
        cardinality: usize,
    },
    #[error("negative count {count} at cell {cell:?}")]
    NegativeCount { cell: Vec<usize>, count: f64 },
    #[error("unknown coding keyword `{0}`")]
    UnknownCoding(String),
    #[error("variable `{0}` must have at least two levels")]
    InvalidCardinality(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("at most {MAX_VARS} variables are supported")]
    TooManyVariables,
    #[error("expected {expected} cells, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("cell {0:?} has zero probability; smooth the table first")]
    ZeroCell(Vec<usize>),
    #[error("total mass is zero")]
    ZeroTotal,
    #[error("probabilities must be finite and strictly positive")]
    NonPositive,
    #[error("variable subset must be nonempty")]
    EmptySet,
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("conditioning slice has zero mass")]
    ZeroMass,
    #[error("invalid json table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Logit coding of a variable. Determines the reference event of each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coding {
    /// Reference is the last level.
    Baseline,
    /// Reference is the next level.
    Local,
    /// Reference is the aggregate of all higher levels.
    Continuation,
    /// Continuation coding after relabeling `i -> I + 1 - i`.
    ReverseContinuation,
}

impl Coding {
    pub fn as_str(self) -> &'static str {
        match self {
            Coding::Baseline => "baseline",
            Coding::Local => "local",
            Coding::Continuation => "continuation",
            Coding::ReverseContinuation => "reverse-continuation",
        }
    }

    /// True for the two codings whose reference event aggregates several levels.
    pub fn is_continuation(self) -> bool {
        matches!(self, Coding::Continuation | Coding::ReverseContinuation)
    }
}

impl FromStr for Coding {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" | "b" => Ok(Coding::Baseline),
            "local" | "l" => Ok(Coding::Local),
            "continuation" | "cont" | "c" => Ok(Coding::Continuation),
            "reverse-continuation" | "reverse_continuation" | "reverse" | "rc" => {
                Ok(Coding::ReverseContinuation)
            }
            other => Err(TableError::UnknownCoding(other.to_string())),
        }
    }
}

impl fmt::Display for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub cardinality: usize,
    pub coding: Coding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_labels: Option<Vec<String>>,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, cardinality: usize, coding: Coding) -> Self {
        VariableSpec {
            name: name.into(),
            cardinality,
            coding,
            level_labels: None,
        }
    }

    /// Maps a level in coded coordinates to the stored (original) level.
    ///
    /// Only reverse-continuation relabels; the map is an involution.
    pub fn coded_to_original(&self, level: usize) -> usize {
        match self.coding {
            Coding::ReverseContinuation => self.cardinality + 1 - level,
            _ => level,
        }
    }

    pub fn original_to_coded(&self, level: usize) -> usize {
        self.coded_to_original(level)
    }
}

/// Builds `n` variables named `1..=n` with the given cardinalities and one coding.
pub fn numbered_variables(cards: &[usize], coding: Coding) -> Vec<VariableSpec> {
    cards
        .iter()
        .enumerate()
        .map(|(j, &c)| VariableSpec::new((j + 1).to_string(), c, coding))
        .collect()
}

/// 1-based levels, one per variable of some declared variable list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    pub fn levels(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Row-major layout helpers for a list of cardinalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl Layout {
    pub fn new(cards: &[usize]) -> Self {
        let mut strides = vec![1; cards.len()];
        for j in (0..cards.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * cards[j + 1];
        }
        Layout {
            cards: cards.to_vec(),
            strides,
            size: cards.iter().product(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Linear position of 1-based levels.
    pub fn index(&self, levels: &[usize]) -> usize {
        levels
            .iter()
            .zip(&self.strides)
            .map(|(&l, &s)| (l - 1) * s)
            .sum()
    }

    /// 1-based levels of a linear position.
    pub fn levels(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.cards.len()];
        for j in 0..self.cards.len() {
            out[j] = idx / self.strides[j] + 1;
            idx %= self.strides[j];
        }
        out
    }

    /// Iterates all cells in storage order as 1-based level vectors.
    pub fn cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size).map(|i| self.levels(i))
    }
}

fn validate_variables(variables: &[VariableSpec]) -> Result<(), TableError> {
    if variables.is_empty() {
        return Err(TableError::EmptySet);
    }
    if variables.len() > MAX_VARS {
        return Err(TableError::TooManyVariables);
    }
    for (j, v) in variables.iter().enumerate() {
        if v.cardinality < 2 {
            return Err(TableError::InvalidCardinality(v.name.clone()));
        }
        if variables[..j].iter().any(|w| w.name == v.name) {
            return Err(TableError::DuplicateVariable(v.name.clone()));
        }
    }
    Ok(())
}

fn cards_of(variables: &[VariableSpec]) -> Vec<usize> {
    variables.iter().map(|v| v.cardinality).collect()
}

fn index_of(variables: &[VariableSpec], name: &str) -> Option<usize> {
    variables.iter().position(|v| v.name == name)
}

/// Observed counts over a list of variables. Counts are reals so that expected
/// tables can be fed back in.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    variables: Vec<VariableSpec>,
    counts: Vec<f64>,
}

impl ContingencyTable {
    pub fn new(variables: Vec<VariableSpec>, counts: Vec<f64>) -> Result<Self, TableError> {
        validate_variables(&variables)?;
        let layout = Layout::new(&cards_of(&variables));
        if counts.len() != layout.size() {
            return Err(TableError::ShapeMismatch {
                expected: layout.size(),
                got: counts.len(),
            });
        }
        for (i, &c) in counts.iter().enumerate() {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(TableError::NegativeCount {
                    cell: layout.levels(i),
                    count: c,
                });
            }
        }
        Ok(ContingencyTable { variables, counts })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn n_cells(&self) -> usize {
        self.counts.len()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&cards_of(&self.variables))
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        index_of(&self.variables, name)
    }

    pub fn count(&self, cell: &[usize]) -> f64 {
        self.counts[self.layout().index(cell)]
    }

    /// Same counts, different codings. Used to compare parameterizations.
    pub fn with_codings(&self, codings: &[Coding]) -> ContingencyTable {
        let mut t = self.clone();
        for (v, &c) in t.variables.iter_mut().zip(codings) {
            v.coding = c;
        }
        t
    }

    pub fn load<R: Read>(mut source: R, format: TableFormat) -> Result<Self, TableError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        match format {
            TableFormat::Csv => parse_csv(&text),
            TableFormat::Json => parse_json(&text),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,cardinality,coding,labels\n");
        for v in &self.variables {
            let labels = v
                .level_labels
                .as_ref()
                .map(|l| l.join("|"))
                .unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", v.name, v.cardinality, v.coding, labels));
        }
        out.push_str("cell,count\n");
        let layout = self.layout();
        for (i, c) in self.counts.iter().enumerate() {
            let lv: Vec<String> = layout.levels(i).iter().map(|l| l.to_string()).collect();
            // {:?} on f64 is the shortest representation that round-trips
            out.push_str(&format!("cell:<{}>,{:?}\n", lv.join(","), c));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let layout = self.layout();
        let doc = TableJson {
            schema: TABLE_SCHEMA.to_string(),
            variables: self.variables.clone(),
            cells: self
                .counts
                .iter()
                .enumerate()
                .map(|(i, &count)| CellJson {
                    cell: layout.levels(i),
                    count,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("table serializes")
    }

    /// Probabilities `(n + s) / (N + s * cells)`; refuses zero cells.
    pub fn to_probabilities(&self, smoothing: f64) -> Result<ProbabilityVector, TableError> {
        if !(smoothing >= 0.0) {
            return Err(TableError::NonPositive);
        }
        let denom = self.total() + smoothing * self.counts.len() as f64;
        if !(denom > 0.0) {
            return Err(TableError::ZeroTotal);
        }
        let layout = self.layout();
        let mut probs = Vec::with_capacity(self.counts.len());
        for (i, &c) in self.counts.iter().enumerate() {
            let p = (c + smoothing) / denom;
            if p <= 0.0 {
                return Err(TableError::ZeroCell(layout.levels(i)));
            }
            probs.push(p);
        }
        Ok(ProbabilityVector {
            variables: self.variables.clone(),
            probs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// Guesses the format from a file name, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    schema: String,
    variables: Vec<VariableSpec>,
    cells: Vec<CellJson>,
}

#[derive(Serialize, Deserialize)]
struct CellJson {
    cell: Vec<usize>,
    count: f64,
}

fn fill_cells(
    variables: Vec<VariableSpec>,
    rows: Vec<(usize, Vec<usize>, f64)>,
) -> Result<ContingencyTable, TableError> {
    validate_variables(&variables)?;
    let layout = Layout::new(&cards_of(&variables));
    let mut counts = vec![0.0; layout.size()];
    let mut seen = vec![false; layout.size()];
    for (line, cell, count) in rows {
        if cell.len() != variables.len() {
            return Err(TableError::Parse {
                line,
                msg: format!("cell has {} levels, expected {}", cell.len(), variables.len()),
            });
        }
        for (v, &l) in variables.iter().zip(&cell) {
            if l < 1 || l > v.cardinality {
                return Err(TableError::LevelOutOfRange {
                    variable: v.name.clone(),
                    level: l,
                    cardinality: v.cardinality,
                });
            }
        }
        if !(count >= 0.0) || !count.is_finite() {
            return Err(TableError::NegativeCount { cell, count });
        }
        let idx = layout.index(&cell);
        if seen[idx] {
            return Err(TableError::DuplicateCell(cell));
        }
        seen[idx] = true;
        counts[idx] = count;
    }
    ContingencyTable::new(variables, counts)
}

fn parse_csv(text: &str) -> Result<ContingencyTable, TableError> {
    let mut variables = Vec::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if !line.to_ascii_lowercase().starts_with("variable,cardinality,coding") {
                return Err(TableError::Parse {
                    line: line_no,
                    msg: "expected header `variable,cardinality,coding`".into(),
                });
            }
            header_seen = true;
            continue;
        }
        if line.eq_ignore_ascii_case("cell,count") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("cell:") {
            let rest = rest.trim();
            let close = rest.find('>').ok_or_else(|| TableError::Parse {
                line: line_no,
                msg: "expected `cell:<l1,...>,count`".into(),
            })?;
            let inner = rest
                .strip_prefix('<')
                .ok_or_else(|| TableError::Parse {
                    line: line_no,
                    msg: "expected `<` after `cell:`".into(),
                })?;
            let levels = inner[..close - 1]
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| TableError::Parse {
                    line: line_no,
                    msg: format!("bad level: {e}"),
                })?;
            let count_str = rest[close + 1..].trim().trim_start_matches(',').trim();
            let count: f64 = count_str.parse().map_err(|_| TableError::Parse {
                line: line_no,
                msg: format!("bad count `{count_str}`"),
            })?;
            rows.push((line_no, levels, count));
            continue;
        }
        if !rows.is_empty() {
            return Err(TableError::Parse {
                line: line_no,
                msg: "variable rows must precede cell rows".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(TableError::Parse {
                line: line_no,
                msg: "variable row needs name,cardinality,coding".into(),
            });
        }
        let cardinality: usize = fields[1].parse().map_err(|_| TableError::Parse {
            line: line_no,
            msg: format!("bad cardinality `{}`", fields[1]),
        })?;
        let coding: Coding = fields[2].parse()?;
        let mut spec = VariableSpec::new(fields[0], cardinality, coding);
        if let Some(labels) = fields.get(3).filter(|s| !s.is_empty()) {
            spec.level_labels = Some(labels.split('|').map(|s| s.to_string()).collect());
        }
        variables.push(spec);
    }
    if !header_seen {
        return Err(TableError::Parse {
            line: 1,
            msg: "empty table".into(),
        });
    }
    fill_cells(variables, rows)
}

fn parse_json(text: &str) -> Result<ContingencyTable, TableError> {
    let doc: TableJson = serde_json::from_str(text)?;
    if doc.schema != TABLE_SCHEMA {
        return Err(TableError::Parse {
            line: 1,
            msg: format!("unsupported schema `{}`", doc.schema),
        });
    }
    let rows = doc
        .cells
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.cell, c.count))
        .collect();
    fill_cells(doc.variables, rows)
}

/// A strictly positive joint distribution indexed like a [`ContingencyTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    variables: Vec<VariableSpec>,
    probs: Vec<f64>,
}

impl ProbabilityVector {
    /// Normalizes `weights`; every weight must be finite and positive.
    pub fn new(variables: Vec<VariableSpec>, weights: Vec<f64>) -> Result<Self, TableError> {
        validate_variables(&variables)?;
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        if weights.len() != size {
            return Err(TableError::ShapeMismatch {
                expected: size,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(TableError::NonPositive);
        }
        let total: f64 = weights.iter().sum();
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(ProbabilityVector { variables, probs })
    }

    /// Fitted probabilities that may touch zero; the caller guarantees the
    /// shape and normalization.
    pub(crate) fn from_probabilities(variables: Vec<VariableSpec>, probs: Vec<f64>) -> Self {
        ProbabilityVector { variables, probs }
    }

    /// Uniform distribution.
    pub fn uniform(variables: Vec<VariableSpec>) -> Result<Self, TableError> {
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        ProbabilityVector::new(variables, vec![1.0; size])
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&cards_of(&self.variables))
    }

    pub fn prob(&self, cell: &[usize]) -> f64 {
        self.probs[self.layout().index(cell)]
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        index_of(&self.variables, name)
    }

    pub fn all_vars(&self) -> VarSet {
        VarSet::full(self.variables.len())
    }

    pub fn with_codings(&self, codings: &[Coding]) -> ProbabilityVector {
        let mut p = self.clone();
        for (v, &c) in p.variables.iter_mut().zip(codings) {
            v.coding = c;
        }
        p
    }

    /// Expected counts `total * probs` as a table.
    pub fn to_table(&self, total: f64) -> ContingencyTable {
        ContingencyTable {
            variables: self.variables.clone(),
            counts: self.probs.iter().map(|p| p * total).collect(),
        }
    }

    fn check_subset(&self, set: VarSet) -> Result<(), TableError> {
        if !set.is_subset(self.all_vars()) {
            let bad = set.difference(self.all_vars()).iter().next().unwrap_or(0);
            return Err(TableError::UnknownVariable(format!("#{bad}")));
        }
        Ok(())
    }

    /// Marginal distribution of the variables in `set` (kept in declared order).
    pub fn marginalize(&self, set: VarSet) -> Result<ProbabilityVector, TableError> {
        if set.is_empty() {
            return Err(TableError::EmptySet);
        }
        self.check_subset(set)?;
        let kept: Vec<usize> = set.to_vec();
        let vars: Vec<VariableSpec> = kept.iter().map(|&j| self.variables[j].clone()).collect();
        let out_layout = Layout::new(&cards_of(&vars));
        let layout = self.layout();
        let mut probs = vec![0.0; out_layout.size()];
        for (i, &p) in self.probs.iter().enumerate() {
            let lv = layout.levels(i);
            let sub: Vec<usize> = kept.iter().map(|&j| lv[j]).collect();
            probs[out_layout.index(&sub)] += p;
        }
        Ok(ProbabilityVector {
            variables: vars,
            probs,
        })
    }

    /// Conditional distribution of the remaining variables given `set = levels`.
    ///
    /// `levels` lists one level per member of `set`, in ascending variable order.
    pub fn slice_conditional(
        &self,
        set: VarSet,
        levels: &CellIndex,
    ) -> Result<ProbabilityVector, TableError> {
        self.check_subset(set)?;
        let fixed: Vec<usize> = set.to_vec();
        if fixed.len() != levels.0.len() {
            return Err(TableError::ShapeMismatch {
                expected: fixed.len(),
                got: levels.0.len(),
            });
        }
        for (&j, &l) in fixed.iter().zip(&levels.0) {
            let v = &self.variables[j];
            if l < 1 || l > v.cardinality {
                return Err(TableError::LevelOutOfRange {
                    variable: v.name.clone(),
                    level: l,
                    cardinality: v.cardinality,
                });
            }
        }
        let rest = self.all_vars().difference(set);
        if rest.is_empty() {
            return Err(TableError::EmptySet);
        }
        let kept: Vec<usize> = rest.to_vec();
        let vars: Vec<VariableSpec> = kept.iter().map(|&j| self.variables[j].clone()).collect();
        let out_layout = Layout::new(&cards_of(&vars));
        let layout = self.layout();
        let mut probs = vec![0.0; out_layout.size()];
        for (i, &p) in self.probs.iter().enumerate() {
            let lv = layout.levels(i);
            if fixed.iter().zip(&levels.0).all(|(&j, &l)| lv[j] == l) {
                let sub: Vec<usize> = kept.iter().map(|&j| lv[j]).collect();
                probs[out_layout.index(&sub)] += p;
            }
        }
        let mass: f64 = probs.iter().sum();
        if !(mass > 0.0) {
            return Err(TableError::ZeroMass);
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        Ok(ProbabilityVector {
            variables: vars,
            probs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> Vec<VariableSpec> {
        numbered_variables(&[2, 2], Coding::Baseline)
    }

    #[test]
    fn csv_sums_counts() {
        let csv = "variable,cardinality,coding\nA,2,baseline\nB,2,local\ncell:<1,1>,10\ncell:<1,2>,20\ncell:<2,1>,30\ncell:<2,2>,40\n";
        let t = ContingencyTable::load(csv.as_bytes(), TableFormat::Csv).unwrap();
        assert_eq!(t.total(), 100.0);
        assert_eq!(t.variables()[1].coding, Coding::Local);
    }

    #[test]
    fn csv_rows_any_order_and_missing_default_zero() {
        let csv = "variable,cardinality,coding\nA,2,baseline\nB,2,baseline\ncell:<2,1>,3\ncell:<1,1>,1\ncell:<1,2>,2\n";
        let t = ContingencyTable::load(csv.as_bytes(), TableFormat::Csv).unwrap();
        assert_eq!(t.counts(), &[1.0, 2.0, 3.0, 0.0]);
        assert_eq!(t.total(), 6.0);
    }

    #[test]
    fn csv_errors() {
        let dup = "variable,cardinality,coding\nA,2,baseline\ncell:<1>,1\ncell:<1>,2\n";
        assert!(matches!(
            ContingencyTable::load(dup.as_bytes(), TableFormat::Csv),
            Err(TableError::DuplicateCell(_))
        ));
        let range = "variable,cardinality,coding\nA,2,baseline\ncell:<3>,1\n";
        assert!(matches!(
            ContingencyTable::load(range.as_bytes(), TableFormat::Csv),
            Err(TableError::LevelOutOfRange { .. })
        ));
        let neg = "variable,cardinality,coding\nA,2,baseline\ncell:<1>,-1\n";
        assert!(matches!(
            ContingencyTable::load(neg.as_bytes(), TableFormat::Csv),
            Err(TableError::NegativeCount { .. })
        ));
        let coding = "variable,cardinality,coding\nA,2,logistic\n";
        assert!(matches!(
            ContingencyTable::load(coding.as_bytes(), TableFormat::Csv),
            Err(TableError::UnknownCoding(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let mut vars = numbered_variables(&[2, 3], Coding::Local);
        vars[1].level_labels = Some(vec!["lo".into(), "mid".into(), "hi".into()]);
        let t = ContingencyTable::new(vars, vec![0.1, 2.0, 3.5, 1e-7, 0.0, 123456.789]).unwrap();
        let back = ContingencyTable::load(t.to_csv().as_bytes(), TableFormat::Csv).unwrap();
        assert_eq!(back, t);
        let back = ContingencyTable::load(t.to_json().as_bytes(), TableFormat::Json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn probabilities_and_smoothing() {
        let t = ContingencyTable::new(two_by_two(), vec![1.0; 4]).unwrap();
        assert_eq!(t.to_probabilities(0.0).unwrap().probs(), &[0.25; 4]);
        let t = ContingencyTable::new(two_by_two(), vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(matches!(t.to_probabilities(0.0), Err(TableError::ZeroCell(_))));
        let p = t.to_probabilities(0.5).unwrap();
        let want = [0.5 / 6.0, 1.5 / 6.0, 1.5 / 6.0, 2.5 / 6.0];
        for (a, b) in p.probs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_of_product() {
        let w = vec![0.3 * 0.4, 0.3 * 0.6, 0.7 * 0.4, 0.7 * 0.6];
        let p = ProbabilityVector::new(two_by_two(), w).unwrap();
        let m = p.marginalize(VarSet::singleton(0)).unwrap();
        assert!((m.probs()[0] - 0.3).abs() < 1e-15);
        assert!((m.probs()[1] - 0.7).abs() < 1e-15);
        let all = p.marginalize(p.all_vars()).unwrap();
        assert_eq!(all, p);
        assert!(matches!(p.marginalize(VarSet::EMPTY), Err(TableError::EmptySet)));
        assert!(p.marginalize(VarSet::singleton(5)).is_err());
    }

    #[test]
    fn uniform_marginal_is_uniform() {
        let p = ProbabilityVector::uniform(numbered_variables(&[2, 2, 2], Coding::Baseline)).unwrap();
        let m = p.marginalize(VarSet::from_indices([0, 2])).unwrap();
        assert!(m.probs().iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn slices() {
        let p = ProbabilityVector::uniform(two_by_two()).unwrap();
        let s = p.slice_conditional(VarSet::singleton(1), &CellIndex(vec![1])).unwrap();
        assert_eq!(s.probs(), &[0.5, 0.5]);
        let p = ProbabilityVector::new(two_by_two(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = p.slice_conditional(VarSet::singleton(0), &CellIndex(vec![1])).unwrap();
        assert!((s.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.probs()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reverse_relabel_is_involution() {
        let v = VariableSpec::new("x", 5, Coding::ReverseContinuation);
        for l in 1..=5 {
            assert_eq!(v.coded_to_original(v.coded_to_original(l)), l);
        }
        assert_eq!(v.coded_to_original(1), 5);
    }
}
