use std::collections::BTreeSet;

use proptest::prelude::*;
use scgm_core::statement::Context;
use scgm_core::table::numbered_variables;
use scgm_core::{
    parse_statement, Coding, CsStatement, GraphIssue, MarkovRule, StatementKind, StratifiedChainGraph, Stratum, VarSet,
};

fn golden(name: &str) -> StratifiedChainGraph {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    StratifiedChainGraph::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn set(g: &StratifiedChainGraph, names: &str) -> VarSet {
    VarSet::from_indices(names.chars().map(|c| g.vertex(&c.to_string()).unwrap()))
}

/// Statements in canonical form over vertices named "1".."n" in index order.
fn canonical_set(n: usize, stmts: impl IntoIterator<Item = CsStatement>) -> BTreeSet<String> {
    let vars = numbered_variables(&vec![4; n], Coding::Local);
    stmts
        .into_iter()
        .map(|s| s.canonical(&vars).display(&vars).to_string())
        .collect()
}

fn expected(n: usize, texts: &[&str]) -> BTreeSet<String> {
    let vars = numbered_variables(&vec![4; n], Coding::Local);
    canonical_set(n, texts.iter().map(|t| parse_statement(t, &vars).unwrap()))
}

#[test]
fn two_blocks_type_iv_statements() {
    let g = golden("two_blocks.graph");
    assert!(g.validate().is_empty());
    assert_eq!(g.chain_components(), vec![set(&g, "12"), set(&g, "345")]);
    assert_eq!(g.parent_components(1), set(&g, "12"));
    let got = g.markov_type_iv().unwrap();
    assert_eq!(
        canonical_set(5, got.iter().map(|s| s.statement.clone())),
        expected(5, &["CI: {3} _||_ {4} | {1,2}", "CI: {3} _||_ {2} | {1}", "CI: {5} _||_ {1,2} | {}"])
    );
    assert_eq!(g.stratified_markov().unwrap(), got);
}

#[test]
fn two_blocks_stratum_stratum_statement() {
    let g = golden("two_blocks_stratum.graph");
    assert!(g.validate().is_empty(), "{:?}", g.validate());
    let got = g.stratified_markov().unwrap();
    let cs: Vec<_> = got.iter().filter(|s| s.kind() == StatementKind::ContextSpecific).collect();
    assert_eq!(cs.len(), 1);
    assert_eq!(cs[0].rule, MarkovRule::UndirectedStratum);
    assert_eq!(cs[0].text(&g), "CS: {3} _||_ {4} | {1,2} = (1,*)");
    assert_eq!(
        canonical_set(5, got.iter().map(|s| s.statement.clone())),
        expected(
            5,
            &["CS: {3} _||_ {4} | {1,2} = (1,*)", "CI: {3} _||_ {2} | {1}", "CI: {5} _||_ {1,2} | {}"]
        )
    );
}

#[test]
fn inadmissible_stratum_is_rejected() {
    let g = golden("inadmissible_stratum.graph");
    assert_eq!(
        g.validate(),
        vec![GraphIssue::Inadmissible("1".into(), "3".into(), "2".into())]
    );
}

#[test]
fn seven_variables_components_marginals_and_stratum() {
    let g = golden("seven_variables.graph");
    assert!(g.validate().is_empty(), "{:?}", g.validate());
    assert_eq!(g.chain_components(), vec![set(&g, "567"), set(&g, "234"), set(&g, "1")]);
    assert_eq!(g.component_labels(), ["T1", "T2", "T3"]);
    let labels: Vec<String> = g.marginal_sets().iter().map(|&m| g.set_label(m)).collect();
    assert_eq!(
        labels,
        ["567", "2567", "3567", "4567", "23567", "24567", "34567", "234567", "1234567"]
    );
    let got = g.stratified_markov().unwrap();
    let texts: Vec<String> = got.iter().map(|s| s.text(&g)).collect();
    assert!(texts.contains(&"CS: {1} _||_ {2} | {3,4,5,6,7} = (1,*,3,*,1)".to_string()), "{texts:?}");
    assert!(texts.contains(&"CI: {1} _||_ {4,6} | {2,3,5,7}".to_string()), "{texts:?}");
}

#[test]
fn constructed_semi_directed_cycle() {
    let g = StratifiedChainGraph::from_text("arc 1 -> 2\nedge 2 -- 3\narc 3 -> 1\n").unwrap();
    assert!(g.validate().iter().any(|i| matches!(i, GraphIssue::Cycle(_))));
}

#[test]
fn single_component_marginals() {
    let g = StratifiedChainGraph::from_text("edge a -- b\nedge b -- c\n").unwrap();
    assert_eq!(g.chain_components().len(), 1);
    assert_eq!(g.parent_components(0), VarSet::EMPTY);
    // a and c are marginally independent, so every subset needs a marginal
    assert_eq!(g.marginal_sets().len(), 7);
    let complete = StratifiedChainGraph::from_text("edge a -- b\nedge b -- c\nedge a -- c\n").unwrap();
    assert_eq!(complete.marginal_sets(), vec![complete.all_vertices()]);
}

/// Random chain graph: vertices dealt into ordered components, random edges
/// inside components and random arcs from earlier to later components.
fn random_graph(n: usize, comp_of: &[usize], bits: &[bool]) -> StratifiedChainGraph {
    let names: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
    let mut g = StratifiedChainGraph::new(names);
    let k = comp_of.iter().max().map_or(0, |m| m + 1);
    for c in 0..k {
        let members = VarSet::from_indices((0..n).filter(|&v| comp_of[v] == c));
        if !members.is_empty() {
            g.declare_component(&format!("T{}", c + 1), members);
        }
    }
    let mut b = bits.iter().cycle();
    for u in 0..n {
        for v in u + 1..n {
            let on = *b.next().unwrap();
            if !on {
                continue;
            }
            if comp_of[u] == comp_of[v] {
                g.add_edge(u, v);
            } else if comp_of[u] < comp_of[v] {
                g.add_arc(u, v);
            } else {
                g.add_arc(v, u);
            }
        }
    }
    g
}

fn graph_strategy() -> impl Strategy<Value = StratifiedChainGraph> {
    (2usize..=7)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(0usize..3, n), prop::collection::vec(any::<bool>(), 21)))
        .prop_map(|(n, comp_of, bits)| random_graph(n, &comp_of, &bits))
}

fn name_key(g: &StratifiedChainGraph, s: &CsStatement) -> (BTreeSet<BTreeSet<String>>, BTreeSet<String>) {
    let names = |set: VarSet| set.iter().map(|j| g.names()[j].clone()).collect::<BTreeSet<_>>();
    (BTreeSet::from([names(s.a), names(s.b)]), names(s.c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn marginal_sets_are_ordered(g in graph_strategy()) {
        prop_assert!(g.validate().is_empty());
        let h = g.marginal_sets();
        for i in 0..h.len() {
            for j in 0..i {
                prop_assert!(!h[i].is_subset(h[j]), "{:?} before {:?}", h[j], h[i]);
            }
        }
        prop_assert_eq!(*h.last().unwrap(), g.all_vertices());
    }

    #[test]
    fn statements_survive_relabelling(g in graph_strategy(), seed in any::<u64>()) {
        let mut order: Vec<String> = g.names().to_vec();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let h = g.reordered(&order).unwrap();
        let a: BTreeSet<_> = g.markov_type_iv().unwrap().iter().map(|s| name_key(&g, &s.statement)).collect();
        let b: BTreeSet<_> = h.markov_type_iv().unwrap().iter().map(|s| name_key(&h, &s.statement)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stratified_without_strata_matches_type_iv(g in graph_strategy()) {
        prop_assert_eq!(g.stratified_markov().unwrap(), g.markov_type_iv().unwrap());
    }

    #[test]
    fn stratum_contexts_are_admissible(g in graph_strategy(), pick in any::<u64>(), levels in prop::collection::vec(0usize..3, 7)) {
        let comps = g.chain_components();
        let n = g.n_vertices();
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| {
                !g.neighbours(u).contains(v) && !g.parents(u).contains(v) && !g.parents(v).contains(u)
            })
            .collect();
        prop_assume!(!missing.is_empty());
        let (u, v) = missing[pick as usize % missing.len()];
        let (cu, cv) = (g.component_of(u), g.component_of(v));
        let (gamma, delta) = if cu >= cv { (u, v) } else { (v, u) };
        let h = g.component_of(gamma);
        let pool = if cu == cv {
            g.parent_components(h)
        } else {
            g.parent_components(h).union(comps[g.component_of(delta)]).without(delta)
        };
        prop_assume!(!pool.is_empty());
        let pattern: Vec<Option<usize>> = pool.iter().map(|j| if levels[j] == 0 { None } else { Some(levels[j]) }).collect();
        let mut s = g.clone();
        s.add_stratum(Stratum { pair: (gamma, delta), given: pool, patterns: vec![pattern] });
        let valid = s.validate().is_empty();
        if !valid {
            prop_assert!(s.stratified_markov().is_err());
            return Ok(());
        }
        for st in s.stratified_markov().unwrap() {
            let stmt = &st.statement;
            let fixed: Vec<usize> = match &stmt.context {
                Context::Pattern(p) => stmt.c.iter().zip(p).filter(|(_, l)| l.is_some()).map(|(j, _)| j).collect(),
                Context::Cells(_) => stmt.c.to_vec(),
                _ => Vec::new(),
            };
            for j in fixed {
                for x in stmt.a.union(stmt.b).iter() {
                    prop_assert!(s.neighbours(x).contains(j) || s.parents(x).contains(j));
                }
            }
        }
    }
}
