//! Constrained maximum likelihood for multinomial tables.
//!
//! Every constraint row is a linear combination of log marginal event
//! probabilities, `h(m) = C log(A m)`, homogeneous of degree zero in the
//! expected counts `m`. The fit runs Lagrangian scoring steps in `log m`
//! (Aitchison and Silvey) with step halving on an L1 merit function, and
//! rescales `m` to the sample size after every step.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use thiserror::Error;

use crate::allocation::EffectAllocation;
use crate::constraints::ConstraintSystem;
use crate::eta::{eta_events, eta_vector, Conditioning, EtaError, EtaVector};
use crate::special::chisq_sf;
use crate::table::{ContingencyTable, Layout, ProbabilityVector, TableError, VariableSpec};

pub const AIC_FORMULA: &str = "AIC = G2 - 2 * (n_cells - df)";
pub const BIC_FORMULA: &str = "BIC = G2 - ln(N) * (n_cells - df)";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Bound on `max |h(pi)|` for a converged fit.
    pub constraint_tolerance: f64,
    pub step_halving_max: usize,
    /// Bound on the Lagrangian gradient, scaled by the sample size.
    pub gradient_tolerance: f64,
    /// Added to every observed count for the starting point only.
    pub smoothing: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            constraint_tolerance: 1e-8,
            step_halving_max: 20,
            gradient_tolerance: 1e-6,
            smoothing: 0.5,
        }
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("constraints cannot be met: max violation {max_violation:.3e} with {rows} rows of rank {rank}")]
    Infeasible {
        max_violation: f64,
        rows: usize,
        rank: usize,
    },
    #[error("table has no observations")]
    EmptyTable,
    #[error("fit options must be positive")]
    BadOptions,
    #[error(transparent)]
    Eta(#[from] EtaError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub pi_hat: ProbabilityVector,
    pub eta_hat: Option<EtaVector>,
    pub g2: f64,
    pub df: usize,
    pub p_value: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub n_cells: usize,
    pub total: f64,
}

/// `(AIC, BIC)` with `n_cells - df` free parameters.
pub fn information_criteria(g2: f64, df: usize, n_cells: usize, total: f64) -> (f64, f64) {
    let free = n_cells as f64 - df as f64;
    (g2 - 2.0 * free, g2 - total.ln() * free)
}

/// `2 sum n log(n / m)` over cells with `n > 0`.
pub fn deviance(counts: &[f64], expected: &[f64]) -> f64 {
    2.0 * counts
        .iter()
        .zip(expected)
        .filter(|(&n, _)| n > 0.0)
        .map(|(&n, &m)| n * (n / m).ln())
        .sum::<f64>()
}

/// Constraint rows compiled to event cell lists over the full table.
#[derive(Debug, Clone)]
pub struct CompiledConstraints {
    events: Vec<Vec<usize>>,
    rows: Vec<Vec<(usize, f64)>>,
    n_cells: usize,
}

impl CompiledConstraints {
    pub fn new(system: &ConstraintSystem, variables: &[VariableSpec]) -> Result<Self, EtaError> {
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
        let layout = Layout::new(&cards);
        let cells: Vec<Vec<usize>> = layout.cells().collect();
        let mut ids: HashMap<(u32, Vec<(usize, usize)>), usize> = HashMap::new();
        let mut events: Vec<Vec<usize>> = Vec::new();
        let mut rows = Vec::with_capacity(system.len());
        for row in system.constraints() {
            let mut terms: HashMap<usize, f64> = HashMap::new();
            for (idx, coef) in &row.terms {
                let rest = idx.marginal.difference(idx.effect).len();
                let evs = eta_events(variables, idx.marginal, idx.effect, &idx.cell, &vec![Conditioning::Top; rest])?;
                let members = idx.marginal.to_vec();
                for ev in evs {
                    let key = (idx.marginal.bits(), ev.ranges.clone());
                    let id = *ids.entry(key).or_insert_with(|| {
                        let list = cells
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| {
                                members
                                    .iter()
                                    .zip(&ev.ranges)
                                    .all(|(&j, &(lo, hi))| c[j] >= lo && c[j] <= hi)
                            })
                            .map(|(k, _)| k)
                            .collect();
                        events.push(list);
                        events.len() - 1
                    });
                    *terms.entry(id).or_insert(0.0) += f64::from(ev.sign) * f64::from(*coef);
                }
            }
            let mut terms: Vec<(usize, f64)> = terms.into_iter().filter(|t| t.1 != 0.0).collect();
            terms.sort_by_key(|t| t.0);
            rows.push(terms);
        }
        Ok(CompiledConstraints {
            events,
            rows,
            n_cells: layout.size(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn event_sums(&self, m: &[f64]) -> Vec<f64> {
        self.events.iter().map(|e| e.iter().map(|&k| m[k]).sum()).collect()
    }

    /// Row values at expected counts `m`.
    pub fn values(&self, m: &[f64]) -> Vec<f64> {
        let p = self.event_sums(m);
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(e, c)| c * p[e].ln()).sum())
            .collect()
    }

    /// Derivative of the rows with respect to `log m`.
    pub fn jacobian(&self, m: &[f64]) -> DMatrix<f64> {
        let p = self.event_sums(m);
        let mut h = DMatrix::zeros(self.rows.len(), self.n_cells);
        for (r, row) in self.rows.iter().enumerate() {
            for &(e, c) in row {
                let w = c / p[e];
                for &k in &self.events[e] {
                    h[(r, k)] += w * m[k];
                }
            }
        }
        h
    }
}

/// Numerical rank with threshold `sigma_max * 1e-10 * rows`.
pub fn numerical_rank(h: &DMatrix<f64>) -> usize {
    if h.nrows() == 0 || h.ncols() == 0 {
        return 0;
    }
    let sv = h.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = max * 1e-10 * h.nrows() as f64;
    sv.iter().filter(|&&s| s > tol && s > 0.0).count()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn rescale(m: &mut [f64], total: f64) {
    let s: f64 = m.iter().sum();
    m.iter_mut().for_each(|x| *x *= total / s);
}

fn merit(counts: &[f64], m: &[f64], h: &[f64], rho: f64) -> f64 {
    let loglik: f64 = counts
        .iter()
        .zip(m)
        .map(|(&n, &mu)| if n > 0.0 { n * mu.ln() } else { 0.0 } - mu)
        .sum();
    -loglik + rho * h.iter().map(|x| x.abs()).sum::<f64>()
}

/// Solves with `G^+` from one symmetric eigendecomposition.
struct PseudoInverse {
    vectors: DMatrix<f64>,
    inverse_values: DVector<f64>,
}

impl PseudoInverse {
    fn new(g: DMatrix<f64>) -> Self {
        let n = g.nrows();
        let eig = g.symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let tol = max * 1e-12 * n as f64;
        let inverse_values = eig.eigenvalues.map(|l| if l > tol { 1.0 / l } else { 0.0 });
        PseudoInverse {
            vectors: eig.eigenvectors,
            inverse_values,
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let qt = self.vectors.transpose() * rhs;
        &self.vectors * qt.component_mul(&self.inverse_values)
    }
}

/// Maximizes the multinomial likelihood of `table` subject to `system`.
pub fn fit_constrained(
    table: &ContingencyTable,
    system: &ConstraintSystem,
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    if options.max_iterations == 0
        || options.constraint_tolerance <= 0.0
        || options.gradient_tolerance <= 0.0
        || options.smoothing < 0.0
    {
        return Err(FitError::BadOptions);
    }
    let counts = table.counts();
    let total = table.total();
    if total <= 0.0 {
        return Err(FitError::EmptyTable);
    }
    let variables = table.variables().to_vec();
    let n_cells = counts.len();
    let finish = |m: Vec<f64>, df: usize, converged: bool, iterations: usize, kkt: f64, viol: f64| {
        let g2 = deviance(counts, &m).max(0.0);
        let (aic, bic) = information_criteria(g2, df, n_cells, total);
        let probs: Vec<f64> = m.iter().map(|x| x / total).collect();
        Ok(FitResult {
            pi_hat: ProbabilityVector::from_probabilities(variables.clone(), probs),
            eta_hat: None,
            g2,
            df,
            p_value: chisq_sf(g2, df),
            aic,
            bic,
            converged,
            iterations,
            kkt_residual: kkt,
            max_violation: viol,
            n_cells,
            total,
        })
    };
    if system.is_empty() {
        return finish(counts.to_vec(), 0, true, 0, 0.0, 0.0);
    }
    let compiled = CompiledConstraints::new(system, &variables)?;
    let mut m: Vec<f64> = counts.iter().map(|&n| n + options.smoothing).collect();
    if m.iter().any(|&x| x <= 0.0) {
        m.iter_mut().for_each(|x| *x = x.max(1e-3));
    }
    rescale(&mut m, total);
    let mut h = compiled.values(&m);
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    let mut rho: f64 = 0.0;
    while iterations < options.max_iterations {
        iterations += 1;
        let jac = compiled.jacobian(&m);
        let score: Vec<f64> = counts.iter().zip(&m).map(|(&n, &mu)| n - mu).collect();
        let dinv = DVector::from_iterator(n_cells, m.iter().map(|x| 1.0 / x));
        let weighted = &jac * DMatrix::from_diagonal(&dinv);
        let g = &weighted * jac.transpose();
        let s_over_m = DVector::from_iterator(n_cells, score.iter().zip(&m).map(|(s, mu)| s / mu));
        let rhs = -(DVector::from_column_slice(&h) + &jac * &s_over_m);
        let pinv = PseudoInverse::new(g);
        let lambda = pinv.solve(&rhs);
        let grad = DVector::from_column_slice(&score) + jac.transpose() * &lambda;
        kkt = grad.amax() / total;
        let delta: Vec<f64> = grad.iter().zip(&m).map(|(g, mu)| g / mu).collect();
        let step_size = max_abs(&delta);
        let viol = max_abs(&h);
        if viol <= options.constraint_tolerance
            && kkt <= options.gradient_tolerance
            && (step_size < 1e-10 || step_size >= last_step)
        {
            converged = true;
            break;
        }
        last_step = step_size;
        rho = rho.max(1.5 * lambda.amax() + 1.0);
        let base = merit(counts, &m, &h, rho);
        let theta: Vec<f64> = m.iter().map(|x| x.ln()).collect();
        let evaluate = |point: Vec<f64>| {
            let mut trial: Vec<f64> = point.iter().map(|t| t.exp().max(1e-300)).collect();
            rescale(&mut trial, total);
            let ht = compiled.values(&trial);
            let value = if ht.iter().all(|x| x.is_finite()) {
                merit(counts, &trial, &ht, rho)
            } else {
                f64::INFINITY
            };
            (trial, ht, value)
        };
        let limit = base + 1e-12 * base.abs();
        let mut alpha = 1.0;
        let mut accepted = None;
        for k in 0..=options.step_halving_max {
            let point: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + alpha * d).collect();
            let (trial, ht, value) = evaluate(point.clone());
            if value <= limit {
                accepted = Some((trial, ht));
                break;
            }
            if k == 0 && value.is_finite() {
                // second-order correction back onto the linearized constraints
                let lam = pinv.solve(&DVector::from_column_slice(&ht));
                let back = jac.transpose() * lam;
                let corrected: Vec<f64> = point
                    .iter()
                    .zip(back.iter().zip(&m))
                    .map(|(p, (b, mu))| p - b / mu)
                    .collect();
                let (trial, ht, value) = evaluate(corrected);
                if value <= limit {
                    accepted = Some((trial, ht));
                    break;
                }
            }
            if value.is_finite() {
                accepted = Some((trial, ht));
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, ht)) => {
                m = trial;
                h = ht;
            }
            None => break,
        }
    }
    let jac = compiled.jacobian(&m);
    let df = numerical_rank(&jac);
    let viol = max_abs(&h);
    if !converged && viol > 1e-6 {
        return Err(FitError::Infeasible {
            max_violation: viol,
            rows: compiled.n_rows(),
            rank: df,
        });
    }
    finish(m, df, converged, iterations, kkt, viol)
}

impl FitResult {
    /// Attaches the fitted parameters of `allocation`.
    pub fn with_parameters(mut self, allocation: &EffectAllocation) -> Result<Self, EtaError> {
        self.eta_hat = Some(eta_vector(&self.pi_hat, allocation)?);
        Ok(self)
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "G2": self.g2,
            "df": self.df,
            "p_value": self.p_value,
            "AIC": self.aic,
            "BIC": self.bic,
            "converged": self.converged,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "max_violation": self.max_violation,
            "n_cells": self.n_cells,
            "N": self.total,
        })
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.summary_json();
        v["schema"] = json!("scgm-fit/1");
        v["formulas"] = json!({ "AIC": AIC_FORMULA, "BIC": BIC_FORMULA });
        v["variables"] = json!(self.pi_hat.variables().iter().map(|s| &s.name).collect::<Vec<_>>());
        v["pi_hat"] = json!(self.pi_hat.probs());
        if let Some(eta) = &self.eta_hat {
            v["eta_hat"] = eta.to_json();
        }
        v
    }
}
