//! Planted round trips for the context-specific constraint generators.

use serde_json::{json, Value};

use scgm_core::oracle::{plant_distribution, sample_violating, PlantSpec};
use scgm_core::table::numbered_variables;
use scgm_core::{constraints_for, parse_statement, Coding, ConstraintOptions, VariableSpec};

pub const PLANTED_TOLERANCE: f64 = 1e-8;
pub const VIOLATION_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct PlantedCase {
    pub name: &'static str,
    pub cards: Vec<usize>,
    pub codings: Vec<Coding>,
    pub statement: &'static str,
}

impl PlantedCase {
    pub fn variables(&self) -> Vec<VariableSpec> {
        let mut v = numbered_variables(&self.cards, Coding::Baseline);
        for (s, &c) in v.iter_mut().zip(&self.codings) {
            s.coding = c;
        }
        v
    }
}

/// One case per constraint family.
pub fn planted_cases() -> Vec<PlantedCase> {
    use Coding::*;
    vec![
        PlantedCase {
            name: "baseline list context",
            cards: vec![2, 3, 3, 3],
            codings: vec![Baseline; 4],
            statement: "CS: {1} _||_ {2} | {3,4} = {(1,3),(2,2)}",
        },
        PlantedCase {
            name: "local list context",
            cards: vec![2, 2, 4, 3],
            codings: vec![Local; 4],
            statement: "CS: {1} _||_ {2} | {3,4} = {(1,1),(3,2)}",
        },
        PlantedCase {
            name: "local threshold",
            cards: vec![2, 2, 4, 4],
            codings: vec![Local; 4],
            statement: "CS: {1} _||_ {2} | {3,4} >= (2,3)",
        },
        PlantedCase {
            name: "continuation threshold",
            cards: vec![2, 2, 4],
            codings: vec![Continuation; 3],
            statement: "CS: {1} _||_ {2} | {3} >= (2)",
        },
        PlantedCase {
            name: "mixed codings threshold",
            cards: vec![2, 2, 4, 4],
            codings: vec![Baseline, Baseline, Local, Continuation],
            statement: "CS: {1} _||_ {2} | {3,4} >= (2,2)",
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub name: String,
    pub seeds: u64,
    /// Largest row residual over planted distributions.
    pub planted_residual: f64,
    /// Smallest of the per-draw largest residuals over non-planted draws.
    pub weakest_violation: f64,
    pub error: Option<String>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.planted_residual < PLANTED_TOLERANCE
            && self.weakest_violation > VIOLATION_FLOOR
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "seeds": self.seeds,
            "planted_residual": self.planted_residual,
            "weakest_violation": self.weakest_violation,
            "error": self.error,
            "passed": self.passed(),
        })
    }
}

/// Plants the statement with seeds `first..first + seeds` and evaluates the
/// generated rows on planted and non-planted draws.
pub fn run_case(case: &PlantedCase, first: u64, seeds: u64) -> CaseOutcome {
    let mut out = CaseOutcome {
        name: case.name.to_string(),
        seeds,
        planted_residual: 0.0,
        weakest_violation: f64::INFINITY,
        error: None,
    };
    let vars = case.variables();
    let result = (|| -> Result<(), String> {
        let stmt = parse_statement(case.statement, &vars).map_err(|e| e.to_string())?;
        let sys = constraints_for(&stmt, &vars, None, ConstraintOptions::default()).map_err(|e| e.to_string())?;
        let worst = |pv: &scgm_core::ProbabilityVector| sys.evaluate(pv).iter().fold(0.0f64, |a, r| a.max(r.abs()));
        for seed in first..first + seeds {
            let spec = PlantSpec {
                variables: vars.clone(),
                statement: stmt.clone(),
                seed,
            };
            let planted = plant_distribution(&spec).map_err(|e| e.to_string())?;
            out.planted_residual = out.planted_residual.max(worst(&planted));
            let other = sample_violating(&spec).map_err(|e| e.to_string())?;
            out.weakest_violation = out.weakest_violation.min(worst(&other));
        }
        Ok(())
    })();
    out.error = result.err();
    out
}
