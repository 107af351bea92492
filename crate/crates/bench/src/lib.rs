//! Fixtures shared by the benchmarks.

use scgm_core::oracle::{random_distribution, sample_table};
use scgm_core::table::numbered_variables;
use scgm_core::{Coding, ContingencyTable, ProbabilityVector, StratifiedChainGraph, VariableSpec};

/// Two components: covariates 1, 2 and responses 3, 4, 5, with a stratum on (3,4).
pub const TWO_COMPONENTS: &str = "component T1 = {1,2}
component T2 = {3,4,5}
edge 1 -- 2
edge 3 -- 5
edge 4 -- 5
arc 1 -> 3
arc 1 -> 4
arc 2 -> 4
stratum (3,4) | {1,2} = {(1,*)}
";

pub fn graph() -> StratifiedChainGraph {
    StratifiedChainGraph::parse(TWO_COMPONENTS).expect("fixture graph parses")
}

pub fn variables(cards: &[usize]) -> Vec<VariableSpec> {
    numbered_variables(cards, Coding::Local)
}

pub fn distribution(cards: &[usize], seed: u64) -> ProbabilityVector {
    random_distribution(&variables(cards), seed)
}

pub fn table(cards: &[usize], n: u64, seed: u64) -> ContingencyTable {
    sample_table(&distribution(cards, seed), n, seed)
}
