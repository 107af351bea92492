//! Hierarchical multinomial marginal models for ordinal contingency tables,
//! with context-specific independence constraints, stratified chain graphs,
//! and constrained maximum likelihood fitting.

pub mod allocation;
pub mod constraints;
pub mod eta;
pub mod fit;
pub mod graph;
pub mod oracle;
pub mod regression;
pub mod search;
pub mod special;
pub mod statement;
pub mod table;
pub mod varset;

pub use allocation::{allocate_effects, AllocationError, EffectAllocation};
pub use eta::{
    baseline_from_local, conditional_eta, decompose_conditional, decompose_parameter, eta_value,
    eta_vector, Conditioning, EtaError, EtaIndex, EtaVector,
};
pub use constraints::{
    constraints_for, expected_constraint_count, ConstraintError, ConstraintOptions, ConstraintSystem,
    InteractionSets, LinearConstraint,
};
pub use fit::{
    fit_constrained, information_criteria, FitError, FitOptions, FitResult, AIC_FORMULA, BIC_FORMULA,
};
pub use graph::{
    GraphIssue, GraphParseError, IndependenceStatement, MarkovError, MarkovRule, StatementKind, StratifiedChainGraph, Stratum,
};
pub use regression::{
    beta_from_eta, graph_allocation, mixed_eta_indices, scgm_constraints, BetaFamily, ComponentRegression,
    RegressionError, RegressionSystem,
};
pub use search::{
    model_search, synthetic_distribution, Candidate, Criterion, FitSummary, SearchError, SearchOptions, SearchStep,
    SearchTrace,
};
pub use statement::{parse_statement, Context, CsStatement, StatementError};
pub use table::{
    Coding, CellIndex, ContingencyTable, ProbabilityVector, TableError, TableFormat, VariableSpec,
};
pub use varset::VarSet;
