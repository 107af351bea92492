use scgm_core::oracle::{brute_force_eta, plant_distribution, random_distribution, sample_violating, PlantSpec};
use scgm_core::table::numbered_variables;
use scgm_core::{
    constraints_for, eta_value, parse_statement, Coding, ConstraintOptions, ConstraintSystem, EtaIndex, VarSet,
    VariableSpec,
};

fn vars_with(cards: &[usize], codings: &[Coding]) -> Vec<VariableSpec> {
    let mut v = numbered_variables(cards, Coding::Baseline);
    for (s, &c) in v.iter_mut().zip(codings) {
        s.coding = c;
    }
    v
}

fn max_abs(sys: &ConstraintSystem, pv: &scgm_core::ProbabilityVector) -> f64 {
    sys.evaluate(pv).into_iter().fold(0.0, |a, r| a.max(r.abs()))
}

/// (planted residual max, smallest violation among non-planted draws)
fn round_trip(vars: &[VariableSpec], text: &str, seeds: u64) -> (f64, f64) {
    let stmt = parse_statement(text, vars).unwrap();
    let sys = constraints_for(&stmt, vars, None, ConstraintOptions::default()).unwrap();
    let mut worst_planted: f64 = 0.0;
    let mut weakest_violation = f64::INFINITY;
    for seed in 0..seeds {
        let spec = PlantSpec {
            variables: vars.to_vec(),
            statement: stmt.clone(),
            seed,
        };
        let pv = plant_distribution(&spec).unwrap();
        worst_planted = worst_planted.max(max_abs(&sys, &pv));
        let bad = sample_violating(&spec).unwrap();
        weakest_violation = weakest_violation.min(max_abs(&sys, &bad));
    }
    (worst_planted, weakest_violation)
}

#[test]
fn baseline_list_context() {
    let vars = vars_with(&[2, 3, 3, 3], &[Coding::Baseline; 4]);
    for text in [
        "CS: {1} _||_ {2} | {3,4} = (1,1)",
        "CS: {1} _||_ {2} | {3,4} = {(1,3),(2,2)}",
        "CS: {1} _||_ {2,3} | {4} = (2)",
    ] {
        let (p, v) = round_trip(&vars, text, 50);
        assert!(p < 1e-8 && v > 1e-3, "{text}: planted {p}, violation {v}");
    }
}

#[test]
fn local_list_context() {
    let (p, v) = round_trip(&vars_with(&[2, 2, 4], &[Coding::Local; 3]), "CS: {1} _||_ {2} | {3} = (2)", 50);
    assert!(p < 1e-8 && v > 1e-3, "planted {p}, violation {v}");
    let vars = vars_with(&[2, 2, 4, 3], &[Coding::Local; 4]);
    for text in [
        "CS: {1} _||_ {2} | {3,4} = {(1,1),(3,2)}",
        "CS: {1} _||_ {2} | {3,4} = (2,*)",
        "CS: {1} _||_ {2,4} | {3} = (1)",
    ] {
        let (p, v) = round_trip(&vars, text, 50);
        assert!(p < 1e-8 && v > 1e-3, "{text}: planted {p}, violation {v}");
    }
}

#[test]
fn local_threshold() {
    let (p, v) = round_trip(&vars_with(&[2, 2, 4], &[Coding::Local; 3]), "CS: {1} _||_ {2} | {3} >= (2)", 50);
    assert!(p < 1e-8 && v > 1e-3, "planted {p}, violation {v}");
    let vars = vars_with(&[2, 2, 4, 4], &[Coding::Local; 4]);
    for text in ["CS: {1} _||_ {2} | {3,4} >= (2,3)", "CS: {1} _||_ {2} | {3,4} >= (1,4)"] {
        let (p, v) = round_trip(&vars, text, 50);
        assert!(p < 1e-8 && v > 1e-3, "{text}: planted {p}, violation {v}");
    }
}

/// Continuation rows compare a slice with the aggregate of all higher slices,
/// and a sum of independent slices is not independent. The rows therefore hold
/// on slice-wise planted distributions only when at most two levels lie at or
/// above the threshold.
#[test]
fn continuation_threshold_two_top_levels() {
    let vars = vars_with(&[2, 2, 4], &[Coding::Continuation; 3]);
    let (p, v) = round_trip(&vars, "CS: {1} _||_ {2} | {3} >= (3)", 50);
    assert!(p < 1e-8 && v > 1e-3, "planted {p}, violation {v}");
    let vars = vars_with(&[2, 2, 4], &[Coding::ReverseContinuation; 3]);
    let (p, v) = round_trip(&vars, "CS: {1} _||_ {2} | {3} <= (2)", 50);
    assert!(p < 1e-8 && v > 1e-3, "planted {p}, violation {v}");
}

#[test]
fn continuation_threshold_wider_region_is_not_slice_independence() {
    let vars = vars_with(&[2, 2, 4], &[Coding::Continuation; 3]);
    let (p, _) = round_trip(&vars, "CS: {1} _||_ {2} | {3} >= (2)", 20);
    assert!(p > 1e-3, "planted residual {p}");
    let vars = vars_with(
        &[2, 2, 4, 4],
        &[Coding::Baseline, Coding::Baseline, Coding::Local, Coding::Continuation],
    );
    let (p, _) = round_trip(&vars, "CS: {1} _||_ {2} | {3,4} >= (2,2)", 20);
    assert!(p > 1e-3, "planted residual {p}");
}

#[test]
fn brute_force_agrees_with_parameters() {
    let codings = [Coding::Baseline, Coding::Local, Coding::Continuation, Coding::ReverseContinuation];
    let mut n = 0;
    for seed in 0..1000u64 {
        let c = |k: u64| codings[((seed >> (2 * k)) % 4) as usize];
        let vars = vars_with(&[2, 3, 4], &[c(0), c(1), c(2)]);
        let pv = random_distribution(&vars, seed);
        let marginal = VarSet::from_bits(1 + (seed as u32 % 7)).union(VarSet::singleton((seed % 3) as usize));
        let subsets: Vec<VarSet> = marginal.subsets().filter(|s| !s.is_empty()).collect();
        let effect = subsets[(seed as usize / 7) % subsets.len()];
        let cell: Vec<usize> = effect
            .iter()
            .enumerate()
            .map(|(k, j)| 1 + (seed as usize / 3 + k) % (vars[j].cardinality - 1))
            .collect();
        let idx = EtaIndex::new(marginal, effect, cell);
        let a = eta_value(&pv, &idx, None).unwrap();
        let b = brute_force_eta(&pv, &idx);
        assert!((a - b).abs() < 1e-12, "{idx:?}: {a} vs {b}");
        n += 1;
    }
    assert_eq!(n, 1000);
}
