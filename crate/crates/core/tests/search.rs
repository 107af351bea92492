use scgm_core::oracle::sample_table;
use scgm_core::search::stratum_options;
use scgm_core::table::numbered_variables;
use scgm_core::{
    model_search, synthetic_distribution, Coding, Criterion, SearchError, SearchOptions, StratifiedChainGraph,
};

fn golden(name: &str) -> StratifiedChainGraph {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    StratifiedChainGraph::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// The planted graph with every partial link made complete.
fn skeleton(planted: &StratifiedChainGraph) -> StratifiedChainGraph {
    let mut g = planted.without_strata();
    for s in planted.strata() {
        let (a, b) = s.pair;
        if planted.component_of(a) == planted.component_of(b) {
            g.add_edge(a, b);
        } else {
            g.add_arc(b, a);
        }
    }
    g
}

#[test]
fn search_recovers_a_planted_stratum() {
    let planted = golden("planted_six.graph");
    let v = numbered_variables(&[2; 6], Coding::Baseline);
    let pv = synthetic_distribution(&planted, &v, 0).unwrap();
    let table = sample_table(&pv, 50_000, 0);
    let trace = model_search(&table, &skeleton(&planted), &SearchOptions::default()).unwrap();
    let want: std::collections::BTreeSet<String> =
        planted.stratified_markov().unwrap().iter().map(|s| s.text(&planted)).collect();
    assert_eq!(trace.selected_statements(), want, "{:#}", trace.to_json());
}

#[test]
fn search_is_deterministic() {
    let planted = golden("planted_six.graph");
    let v = numbered_variables(&[2; 6], Coding::Baseline);
    let table = sample_table(&synthetic_distribution(&planted, &v, 3).unwrap(), 5_000, 3);
    let opts = SearchOptions {
        criterion: Criterion::MinAic,
        ..SearchOptions::default()
    };
    let a = model_search(&table, &skeleton(&planted), &opts).unwrap();
    let b = model_search(&table, &skeleton(&planted), &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json().to_string(), b.to_json().to_string());
}

#[test]
fn skeleton_with_strata_is_refused() {
    let planted = golden("planted_six.graph");
    let v = numbered_variables(&[2; 6], Coding::Baseline);
    let table = sample_table(&synthetic_distribution(&planted, &v, 1).unwrap(), 100, 1);
    assert!(matches!(
        model_search(&table, &planted, &SearchOptions::default()),
        Err(SearchError::StrataInSkeleton)
    ));
}

#[test]
fn stratum_options_are_admissible() {
    let g = skeleton(&golden("planted_six.graph"));
    let v = numbered_variables(&[3, 2, 2, 2, 2, 2], Coding::Local);
    let opts = stratum_options(&g, (2, 3), &v);
    // vertex 1 with three levels: three singletons and two runs of two; vertex 2: two singletons
    assert_eq!(opts.len(), 7);
    for s in opts {
        let mut h = g.clone();
        h.remove_link(2, 3);
        h.add_stratum(s);
        assert!(h.validate().is_empty(), "{:?}", h.validate());
    }
}

#[test]
fn criterion_names_round_trip() {
    for c in [Criterion::PaperMaxAic, Criterion::MinAic] {
        assert_eq!(c.as_str().parse::<Criterion>().unwrap(), c);
    }
    assert!("max-bic".parse::<Criterion>().is_err());
}

#[test]
fn empty_skeleton_is_refused() {
    let g = StratifiedChainGraph::from_text("vertices 1 2\n").unwrap();
    let v = numbered_variables(&[2, 2], Coding::Baseline);
    let table = scgm_core::ContingencyTable::new(v, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!(matches!(
        model_search(&table, &g, &SearchOptions::default()),
        Err(SearchError::EmptySkeleton)
    ));
}
