//! Brute-force reference implementations used to certify the parameter and
//! constraint code: planting independencies in random distributions, checking
//! statements directly on conditional probabilities, and evaluating parameters
//! by enumerating the full table.
//!
//! Deliberately naive and capped at small tables. Shares no evaluation code
//! with [`crate::eta`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use thiserror::Error;

use crate::eta::EtaIndex;
use crate::statement::{CsStatement, StatementError};
use crate::table::{Coding, ContingencyTable, ProbabilityVector, VariableSpec};

/// Largest table the oracle accepts.
pub const MAX_ORACLE_CELLS: usize = 256;
const MAX_ORACLE_VARS: usize = 4;
const MIN_LOG_ODDS: f64 = 0.1;
const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Statement(#[from] StatementError),
    #[error("oracle tables are limited to {MAX_ORACLE_VARS} variables and {MAX_ORACLE_CELLS} cells")]
    TooLarge,
    #[error("the statement must mention every variable of the table")]
    PartialCover,
    #[error("no acceptable draw after {MAX_DRAWS} attempts")]
    Exhausted,
    #[error("context slice has zero mass")]
    ZeroMass,
}

/// What to plant and from which seed.
#[derive(Debug, Clone)]
pub struct PlantSpec {
    pub variables: Vec<VariableSpec>,
    pub statement: CsStatement,
    pub seed: u64,
}

/// Outcome of a direct check: the largest deviation from the product of
/// conditional margins over all context cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsCheck {
    pub holds: bool,
    pub max_violation: f64,
}

fn levels_of(cards: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for j in (0..cards.len()).rev() {
        out[j] = idx % cards[j] + 1;
        idx /= cards[j];
    }
    out
}

fn check_size(variables: &[VariableSpec]) -> Result<Vec<usize>, OracleError> {
    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
    if cards.len() > MAX_ORACLE_VARS || cards.iter().product::<usize>() > MAX_ORACLE_CELLS {
        return Err(OracleError::TooLarge);
    }
    Ok(cards)
}

/// Joint cells grouped by context cell: for each context (stored levels of `C`
/// in ascending order), the weights indexed by `(A cell, B cell)`.
struct Blocks {
    a_vars: Vec<usize>,
    b_vars: Vec<usize>,
    c_vars: Vec<usize>,
    cards: Vec<usize>,
}

impl Blocks {
    fn new(stmt: &CsStatement, cards: &[usize]) -> Self {
        Blocks {
            a_vars: stmt.a.to_vec(),
            b_vars: stmt.b.to_vec(),
            c_vars: stmt.c.to_vec(),
            cards: cards.to_vec(),
        }
    }

    fn sub_index(&self, vars: &[usize], levels: &[usize]) -> usize {
        vars.iter().fold(0, |acc, &j| acc * self.cards[j] + levels[j] - 1)
    }

    fn size(&self, vars: &[usize]) -> usize {
        vars.iter().map(|&j| self.cards[j]).product()
    }

    /// `block[a][b]` = mass of the joint at context `ctx`, summing other variables.
    fn block(&self, weights: &[f64], ctx: &[usize]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.size(&self.b_vars)]; self.size(&self.a_vars)];
        for (i, &w) in weights.iter().enumerate() {
            let lv = levels_of(&self.cards, i);
            if self.c_vars.iter().zip(ctx).all(|(&j, &l)| lv[j] == l) {
                out[self.sub_index(&self.a_vars, &lv)][self.sub_index(&self.b_vars, &lv)] += w;
            }
        }
        out
    }
}

fn max_abs_log_odds(block: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for a in 1..block.len() {
        for b in 1..block[0].len() {
            let lor = (block[0][0] * block[a][b] / (block[0][b] * block[a][0])).ln();
            best = best.max(lor.abs());
        }
    }
    best
}

fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (0.7 * z).exp()
        })
        .collect()
}

fn all_cells(cards: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = cards.iter().product();
    (0..n).map(|i| levels_of(cards, i)).collect()
}

fn prepare(variables: &[VariableSpec], stmt: &CsStatement) -> Result<(Vec<usize>, Vec<Vec<usize>>, Vec<Vec<usize>>), OracleError> {
    let cards = check_size(variables)?;
    stmt.validate(variables)?;
    if stmt.marginal().len() != variables.len() {
        return Err(OracleError::PartialCover);
    }
    let context = stmt.context_cells(variables);
    let c_cards: Vec<usize> = stmt.c.iter().map(|j| cards[j]).collect();
    let others: Vec<Vec<usize>> = all_cells(&c_cards)
        .into_iter()
        .filter(|c| !context.contains(c))
        .collect();
    Ok((cards, context, others))
}

/// Random positive joint in which the statement holds exactly at every
/// context cell and clearly fails (some |log odds ratio| > 0.1) at every other
/// cell of the conditioning set.
pub fn plant_distribution(spec: &PlantSpec) -> Result<ProbabilityVector, OracleError> {
    let (cards, context, others) = prepare(&spec.variables, &spec.statement)?;
    let blocks = Blocks::new(&spec.statement, &cards);
    let n: usize = cards.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_DRAWS {
        let mut w = random_weights(n, &mut rng);
        if others
            .iter()
            .any(|ctx| max_abs_log_odds(&blocks.block(&w, ctx)) <= MIN_LOG_ODDS)
        {
            continue;
        }
        for ctx in &context {
            let block = blocks.block(&w, ctx);
            let row: Vec<f64> = block.iter().map(|r| r.iter().sum()).collect();
            let col: Vec<f64> = (0..block[0].len()).map(|b| block.iter().map(|r| r[b]).sum()).collect();
            let total: f64 = row.iter().sum();
            for (i, wi) in w.iter_mut().enumerate() {
                let lv = levels_of(&cards, i);
                if blocks.c_vars.iter().zip(ctx).all(|(&j, &l)| lv[j] == l) {
                    let a = blocks.sub_index(&blocks.a_vars, &lv);
                    let b = blocks.sub_index(&blocks.b_vars, &lv);
                    *wi = row[a] * col[b] / total;
                }
            }
        }
        return Ok(ProbabilityVector::new(spec.variables.clone(), w).expect("positive weights"));
    }
    Err(OracleError::Exhausted)
}

/// Random positive joint in which the statement fails (|log odds ratio| > 0.1)
/// at every context cell.
pub fn sample_violating(spec: &PlantSpec) -> Result<ProbabilityVector, OracleError> {
    let (cards, context, _) = prepare(&spec.variables, &spec.statement)?;
    let blocks = Blocks::new(&spec.statement, &cards);
    let n: usize = cards.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0f_dead);
    for _ in 0..MAX_DRAWS {
        let w = random_weights(n, &mut rng);
        if context
            .iter()
            .all(|ctx| max_abs_log_odds(&blocks.block(&w, ctx)) > MIN_LOG_ODDS)
        {
            return Ok(ProbabilityVector::new(spec.variables.clone(), w).expect("positive weights"));
        }
    }
    Err(OracleError::Exhausted)
}

/// Random positive joint with no planted structure.
pub fn random_distribution(variables: &[VariableSpec], seed: u64) -> ProbabilityVector {
    let n: usize = variables.iter().map(|v| v.cardinality).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ProbabilityVector::new(variables.to_vec(), random_weights(n, &mut rng)).expect("positive weights")
}

/// Multinomial sample of size `n`, drawn cell by cell from conditional binomials.
pub fn sample_table(pv: &ProbabilityVector, n: u64, seed: u64) -> ContingencyTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = pv.probs();
    let mut left = n;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        let draw = if k + 1 == probs.len() || left == 0 {
            left
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q).expect("probability in range").sample(&mut rng)
        };
        counts.push(draw as f64);
        left -= draw;
        mass -= p;
    }
    ContingencyTable::new(pv.variables().to_vec(), counts).expect("nonnegative counts")
}

/// Checks the statement on conditional probabilities at each context cell.
pub fn verify_cs_direct(pv: &ProbabilityVector, stmt: &CsStatement, tol: f64) -> Result<CsCheck, OracleError> {
    let variables = pv.variables();
    stmt.validate(variables)?;
    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
    let blocks = Blocks::new(stmt, &cards);
    let mut worst: f64 = 0.0;
    for ctx in stmt.context_cells(variables) {
        let block = blocks.block(pv.probs(), &ctx);
        let total: f64 = block.iter().flatten().sum();
        if !(total > 0.0) {
            return Err(OracleError::ZeroMass);
        }
        let row: Vec<f64> = block.iter().map(|r| r.iter().sum::<f64>() / total).collect();
        let col: Vec<f64> = (0..block[0].len())
            .map(|b| block.iter().map(|r| r[b]).sum::<f64>() / total)
            .collect();
        for (a, r) in block.iter().enumerate() {
            for (b, &p) in r.iter().enumerate() {
                worst = worst.max((p / total - row[a] * col[b]).abs());
            }
        }
    }
    Ok(CsCheck {
        holds: worst <= tol,
        max_violation: worst,
    })
}

/// Evaluates a parameter by scanning the whole joint table for each event.
///
/// Subsets of the effect are enumerated explicitly as boolean masks; each
/// event is a membership predicate on stored levels.
pub fn brute_force_eta(pv: &ProbabilityVector, idx: &EtaIndex) -> f64 {
    let variables = pv.variables();
    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
    let effect: Vec<usize> = idx.effect.to_vec();
    let marginal: Vec<usize> = idx.marginal.to_vec();
    if effect
        .iter()
        .zip(&idx.cell)
        .any(|(&j, &l)| l == cards[j])
    {
        return 0.0;
    }
    // stored level of a coded level
    let stored = |j: usize, coded: usize| -> usize {
        if variables[j].coding == Coding::ReverseContinuation {
            cards[j] + 1 - coded
        } else {
            coded
        }
    };
    let coded_of = |j: usize, level: usize| -> usize { stored(j, level) };
    let mut total = 0.0;
    for mask in 0..(1usize << effect.len()) {
        let in_ref = |k: usize| mask & (1 << k) != 0;
        let n_observed = (0..effect.len()).filter(|&k| !in_ref(k)).count();
        let sign = if n_observed % 2 == 0 { 1.0 } else { -1.0 };
        let mut prob = 0.0;
        for (i, &p) in pv.probs().iter().enumerate() {
            let lv = levels_of(&cards, i);
            let member = marginal.iter().all(|&j| {
                let c = coded_of(j, lv[j]);
                match effect.iter().position(|&e| e == j) {
                    None => c == cards[j],
                    Some(k) => {
                        let i_k = idx.cell[k];
                        if !in_ref(k) {
                            c == i_k
                        } else {
                            match variables[j].coding {
                                Coding::Baseline => c == cards[j],
                                Coding::Local => c == i_k + 1,
                                Coding::Continuation | Coding::ReverseContinuation => c > i_k,
                            }
                        }
                    }
                }
            });
            if member {
                prob += p;
            }
        }
        total += sign * prob.ln();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statement::parse_statement;
    use crate::table::numbered_variables;
    use crate::varset::VarSet;

    #[test]
    fn planted_statement_holds() {
        let vars = numbered_variables(&[2, 3, 3], Coding::Baseline);
        for text in [
            "CS: {1} _||_ {2} | {3} = (1)",
            "CS: {1} _||_ {2} | {3} >= (2)",
            "CI: {1} _||_ {2} | {3}",
        ] {
            let stmt = parse_statement(text, &vars).unwrap();
            let spec = PlantSpec {
                variables: vars.clone(),
                statement: stmt.clone(),
                seed: 7,
            };
            let pv = plant_distribution(&spec).unwrap();
            let check = verify_cs_direct(&pv, &stmt, 1e-14).unwrap();
            assert!(check.holds, "{text}: {}", check.max_violation);
            let bad = sample_violating(&spec).unwrap();
            assert!(!verify_cs_direct(&bad, &stmt, 1e-6).unwrap().holds);
        }
    }

    #[test]
    fn uniform_satisfies_everything() {
        let vars = numbered_variables(&[2, 2, 3], Coding::Local);
        let pv = ProbabilityVector::uniform(vars.clone()).unwrap();
        let stmt = parse_statement("CS: {1} _||_ {2} | {3} = (2)", &vars).unwrap();
        assert!(verify_cs_direct(&pv, &stmt, 1e-14).unwrap().holds);
    }

    #[test]
    fn perturbation_breaks_planted() {
        let vars = numbered_variables(&[2, 2, 3], Coding::Baseline);
        let stmt = parse_statement("CS: {1} _||_ {2} | {3} = (1)", &vars).unwrap();
        let pv = plant_distribution(&PlantSpec {
            variables: vars.clone(),
            statement: stmt.clone(),
            seed: 3,
        })
        .unwrap();
        let mut w = pv.probs().to_vec();
        w[0] *= 1.5;
        let q = ProbabilityVector::new(vars, w).unwrap();
        assert!(verify_cs_direct(&q, &stmt, 1e-6).unwrap().max_violation > 1e-6);
    }

    #[test]
    fn logit_table_interaction() {
        let vars = numbered_variables(&[3, 3], Coding::Baseline);
        let pv = random_distribution(&vars, 11);
        let p = |i: usize, j: usize| pv.probs()[(i - 1) * 3 + j - 1];
        let idx = EtaIndex::new(VarSet::full(2), VarSet::full(2), vec![1, 1]);
        let want = (p(1, 1) * p(3, 3) / (p(1, 3) * p(3, 1))).ln();
        assert!((brute_force_eta(&pv, &idx) - want).abs() < 1e-12);
    }

    #[test]
    fn continuation_two_way_at_top() {
        let vars = numbered_variables(&[2, 2, 4], Coding::Continuation);
        let pv = random_distribution(&vars, 5);
        let p = |a: usize, b: usize, c: usize| pv.probs()[(a - 1) * 8 + (b - 1) * 4 + c - 1];
        let idx = EtaIndex::new(VarSet::full(3), VarSet::from_indices([0, 1]), vec![1, 1]);
        let want = (p(1, 1, 4) * p(2, 2, 4) / (p(1, 2, 4) * p(2, 1, 4))).ln();
        assert!((brute_force_eta(&pv, &idx) - want).abs() < 1e-12);
    }

    #[test]
    fn too_large_is_rejected() {
        let vars = numbered_variables(&[3, 3, 3, 3, 3], Coding::Baseline);
        let stmt = CsStatement::conditional(VarSet::singleton(0), VarSet::singleton(1), VarSet::from_indices([2, 3, 4]));
        let spec = PlantSpec {
            variables: vars,
            statement: stmt,
            seed: 0,
        };
        assert_eq!(plant_distribution(&spec).unwrap_err(), OracleError::TooLarge);
    }
}
