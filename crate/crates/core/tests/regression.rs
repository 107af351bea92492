use scgm_core::eta::{eta_vector, for_each_in_box, sub_top_cells};
use scgm_core::oracle::random_distribution;
use scgm_core::regression::mixed_eta_indices;
use scgm_core::table::numbered_variables;
use scgm_core::{
    beta_from_eta, conditional_eta, graph_allocation, Coding, EtaIndex, ProbabilityVector, RegressionError,
    StratifiedChainGraph, VarSet, VariableSpec,
};

fn two_blocks() -> StratifiedChainGraph {
    let path = format!("{}/tests/golden/two_blocks.graph", env!("CARGO_MANIFEST_DIR"));
    StratifiedChainGraph::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn vars(cards: &[usize], codings: &[Coding]) -> Vec<VariableSpec> {
    let mut v = numbered_variables(cards, Coding::Baseline);
    for (s, &c) in v.iter_mut().zip(codings) {
        s.coding = c;
    }
    v
}

fn codings_for(seed: u64, n: usize) -> Vec<Coding> {
    (0..n)
        .map(|k| if (seed >> k) & 1 == 0 { Coding::Baseline } else { Coding::Local })
        .collect()
}

/// Largest gap between the beta sums and the conditional logits computed
/// directly from the distribution, over every response set and context.
fn conditional_gap(pv: &ProbabilityVector, g: &StratifiedChainGraph) -> f64 {
    let alloc = graph_allocation(g).unwrap();
    let eta = eta_vector(pv, &alloc).unwrap();
    let sys = beta_from_eta(&eta, g).unwrap();
    let variables = pv.variables();
    let mut worst: f64 = 0.0;
    for comp in &sys.components {
        let ctx_ranges: Vec<(usize, usize)> = comp.parents.iter().map(|j| (1, variables[j].cardinality)).collect();
        let mut responses: Vec<VarSet> = comp.families.iter().map(|f| f.response).collect();
        responses.dedup();
        for a in responses {
            let m = comp.families.iter().find(|f| f.response == a).unwrap().marginal;
            let rest = m.difference(a).difference(comp.parents);
            for cell_a in sub_top_cells(variables, a) {
                for_each_in_box(&ctx_ranges, |ctx| {
                    let via_beta = sys.eta_conditional(a, &cell_a, ctx).unwrap();
                    let mut full_ctx: Vec<usize> = Vec::new();
                    for j in m.difference(a).iter() {
                        full_ctx.push(match comp.parents.rank_of(j) {
                            Some(r) => ctx[r],
                            None => {
                                assert!(rest.contains(j));
                                variables[j].cardinality
                            }
                        });
                    }
                    let direct = conditional_eta(pv, m, a, &cell_a, &full_ctx).unwrap();
                    worst = worst.max((via_beta - direct).abs());
                });
            }
        }
    }
    worst
}

#[test]
fn beta_sums_reproduce_conditional_logits() {
    let g = two_blocks();
    for seed in 0..50u64 {
        let v = vars(&[2, 3, 3, 2, 3], &codings_for(seed, 5));
        let pv = random_distribution(&v, seed);
        let gap = conditional_gap(&pv, &g);
        assert!(gap < 1e-10, "seed {seed}: {gap}");
    }
}

#[test]
fn regression_round_trip_is_exact() {
    let g = two_blocks();
    let alloc = graph_allocation(&g).unwrap();
    for seed in 0..50u64 {
        let v = vars(&[3, 2, 3, 2, 3], &codings_for(seed * 7 + 1, 5));
        let pv = random_distribution(&v, 100 + seed);
        let eta = eta_vector(&pv, &alloc).unwrap();
        let sys = beta_from_eta(&eta, &g).unwrap();
        assert_eq!(sys.dimension(), eta.len());
        let back = sys.to_eta().unwrap();
        for ((i, a), (j, b)) in eta.entries().iter().zip(back.entries()) {
            assert_eq!(i, j);
            assert!((a - b).abs() < 1e-12, "{i:?}: {a} vs {b}");
        }
    }
}

#[test]
fn first_order_beta_is_minus_the_pair_parameter() {
    let g = two_blocks();
    let v = vars(&[2, 2, 2, 3, 2], &[Coding::Baseline; 5]);
    let pv = random_distribution(&v, 9);
    let eta = eta_vector(&pv, &graph_allocation(&g).unwrap()).unwrap();
    let sys = beta_from_eta(&eta, &g).unwrap();
    let four = VarSet::singleton(3);
    let m = VarSet::from_indices([0, 1, 3]);
    let fam = |t: VarSet| {
        sys.components[1]
            .families
            .iter()
            .find(|f| f.response == four && f.covariates == t)
            .unwrap()
    };
    for i4 in 1..=2 {
        let b1 = fam(VarSet::singleton(0)).values.iter().find(|(c, _)| c == &vec![1, i4]).unwrap().1;
        let e14 = eta.get(&EtaIndex::new(m, VarSet::from_indices([0, 3]), vec![1, i4])).unwrap();
        assert!((b1 + e14).abs() < 1e-14);
        let b12 = fam(VarSet::from_indices([0, 1])).values.iter().find(|(c, _)| c == &vec![1, 1, i4]).unwrap().1;
        let e124 = eta.get(&EtaIndex::new(m, m, vec![1, 1, i4])).unwrap();
        assert!((b12 - e124).abs() < 1e-14);
        let b0 = fam(VarSet::EMPTY).values.iter().find(|(c, _)| c == &vec![i4]).unwrap().1;
        let top = sys.eta_conditional(four, &[i4], &[2, 2]).unwrap();
        assert!((b0 - top).abs() < 1e-14);
    }
}

#[test]
fn reversing_a_binary_covariate_flips_its_first_order_effects() {
    let g = two_blocks();
    let v = vars(&[2, 2, 3, 2, 2], &[Coding::Baseline; 5]);
    let pv = random_distribution(&v, 4);
    let layout = pv.layout();
    let flipped: Vec<f64> = layout
        .cells()
        .map(|mut c| {
            c[0] = 3 - c[0];
            pv.prob(&c)
        })
        .collect();
    let pw = ProbabilityVector::new(v.clone(), flipped).unwrap();
    let alloc = graph_allocation(&g).unwrap();
    let a = beta_from_eta(&eta_vector(&pv, &alloc).unwrap(), &g).unwrap();
    let b = beta_from_eta(&eta_vector(&pw, &alloc).unwrap(), &g).unwrap();
    for (fa, fb) in a.components[1].families.iter().zip(&b.components[1].families) {
        if fa.covariates == VarSet::singleton(0) {
            for ((_, x), (_, y)) in fa.values.iter().zip(&fb.values) {
                assert!((x + y).abs() < 1e-12, "{:?}", fa.response);
            }
        }
    }
}

#[test]
fn mixed_parameters_of_a_chain() {
    let g = StratifiedChainGraph::from_text("arc 1 -> 2\narc 2 -> 3\n").unwrap();
    let v = numbered_variables(&[2, 2, 2], Coding::Baseline);
    let effects: Vec<VarSet> = mixed_eta_indices(&g, &v).iter().map(|i| i.effect).collect();
    assert_eq!(effects, vec![VarSet::from_indices([0, 2]), VarSet::from_indices([0, 1, 2])]);
    assert!(mixed_eta_indices(&two_blocks(), &numbered_variables(&[2; 5], Coding::Baseline)).is_empty());
    let full = StratifiedChainGraph::from_text("arc 1 -> 2\narc 2 -> 3\narc 1 -> 3\n").unwrap();
    assert!(mixed_eta_indices(&full, &v).is_empty());
}

#[test]
fn no_covariates_gives_intercepts_only() {
    let g = StratifiedChainGraph::from_text("edge 1 -- 2\n").unwrap();
    let v = numbered_variables(&[3, 2], Coding::Local);
    let pv = random_distribution(&v, 3);
    let eta = eta_vector(&pv, &graph_allocation(&g).unwrap()).unwrap();
    let sys = beta_from_eta(&eta, &g).unwrap();
    assert!(sys.components[0].families.iter().all(|f| f.covariates.is_empty()));
    assert_eq!(sys.dimension(), 5);
}

#[test]
fn continuation_covariates_are_rejected() {
    let g = two_blocks();
    let v = vars(&[3, 2, 2, 2, 2], &[Coding::Continuation; 5]);
    let pv = random_distribution(&v, 1);
    let eta = eta_vector(&pv, &graph_allocation(&g).unwrap()).unwrap();
    assert!(matches!(beta_from_eta(&eta, &g), Err(RegressionError::CovariateCoding { .. })));
}
