use std::collections::BTreeMap;
use std::sync::Arc;

use fgraph::bp::{solve, SolveOptions};
use fgraph::graph::MAX_NESTING_DEPTH;
use fgraph::{
    parse_model, DiscreteDomain, FactorGraph, FactorSpec, FactorTable, ModelError, Schedule, Semiring, VarId,
};
use fgraph_testkit::{linf, marginals, random_positive, random_tree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Multiset of (sorted variable list, dense weights) per factor.
fn edge_multiset(g: &FactorGraph) -> BTreeMap<Vec<usize>, Vec<Vec<u64>>> {
    let mut m: BTreeMap<Vec<usize>, Vec<Vec<u64>>> = BTreeMap::new();
    for (_, f) in g.factors() {
        let key = f.vars().iter().map(|v| v.0).collect();
        let w = g.table(f.table()).to_dense_weights().iter().map(|x| x.to_bits()).collect();
        m.entry(key).or_default().push(w);
    }
    m
}

#[test]
fn vectorized_equals_loop() {
    let f = |x: &[f64]| (-(x[0] - x[1]).abs()).exp() + 0.1 * x[2];
    let d = DiscreteDomain::range(0, 2).unwrap();
    let mut vec_g = FactorGraph::new();
    let a = vec_g.add_variables(&d, &[3, 4]).unwrap();
    let b = vec_g.add_variables(&d, &[1, 4]).unwrap();
    let c = vec_g.add_variables(&d, &[3, 1]).unwrap();
    vec_g.add_factor_vectorized(FactorSpec::Function(&f), &[a.clone(), b.clone(), c.clone()]).unwrap();

    let mut loop_g = FactorGraph::new();
    loop_g.add_variables(&d, &[3, 4]).unwrap();
    loop_g.add_variables(&d, &[1, 4]).unwrap();
    loop_g.add_variables(&d, &[3, 1]).unwrap();
    for i in 0..3 {
        for j in 0..4 {
            loop_g
                .add_factor_dense(f, &[a.get(&[i, j]), b.get(&[0, j]), c.get(&[i, 0])])
                .unwrap();
        }
    }
    assert_eq!(vec_g.factor_count(), 12);
    assert_eq!(vec_g.tables().len(), 1);
    assert_eq!(edge_multiset(&vec_g), edge_multiset(&loop_g));
    let s = Schedule::flooding(&vec_g).unwrap();
    let o = SolveOptions { iterations: 20, ..Default::default() };
    assert_eq!(
        solve(&vec_g, &s, &o, Semiring::SumProduct).unwrap().beliefs,
        solve(&loop_g, &s, &o, Semiring::SumProduct).unwrap().beliefs
    );
}

#[test]
fn vectorized_shape_mismatch() {
    let mut g = FactorGraph::new();
    let a = g.add_variables(&DiscreteDomain::bit(), &[3]).unwrap();
    let b = g.add_variables(&DiscreteDomain::bit(), &[4]).unwrap();
    let t = FactorTable::dense(vec![2, 2], vec![1.0; 4]).unwrap();
    assert!(matches!(
        g.add_factor_vectorized(FactorSpec::Table(t), &[a, b]),
        Err(ModelError::ShapeMismatch(_))
    ));
}

fn xor_template() -> Arc<FactorGraph> {
    let mut t = FactorGraph::new();
    let b: Vec<VarId> = (0..4).map(|_| t.add_variable(&DiscreteDomain::bit())).collect();
    let c = t.add_variable(&DiscreteDomain::bit());
    t.add_factor(fgraph::synth::parity_table(3), &[b[0], b[1], c]).unwrap();
    t.add_factor(fgraph::synth::parity_table(3), &[b[2], b[3], c]).unwrap();
    t.set_boundary(&b).unwrap();
    Arc::new(t)
}

#[test]
fn nested_graph_flattens_to_same_marginals() {
    let t = xor_template();
    let mut g = FactorGraph::new();
    let a: Vec<VarId> = (0..6).map(|_| g.add_variable(&DiscreteDomain::bit())).collect();
    g.add_nested_graph("x", &t, &[a[0], a[1], a[3], a[4]]).unwrap();
    g.add_nested_graph("x", &t, &[a[1], a[2], a[3], a[5]]).unwrap();
    for &v in &a {
        g.set_input(v, &[0.1, 0.9]).unwrap();
    }
    let flat = g.flatten();
    assert!(flat.nested().is_empty());
    assert_eq!(flat.variable_count(), 8);
    assert_eq!(flat.factor_count(), 4);
    assert_eq!(marginals(&g), marginals(&flat));
    let s = Schedule::flooding(&g).unwrap();
    let o = SolveOptions::default();
    assert_eq!(
        solve(&g, &s, &o, Semiring::SumProduct).unwrap().beliefs,
        solve(&flat, &s, &o, Semiring::SumProduct).unwrap().beliefs
    );
}

#[test]
fn recursive_nesting_and_depth_limit() {
    let mut t = FactorGraph::new();
    let x = t.add_variable(&DiscreteDomain::bit());
    let y = t.add_variable(&DiscreteDomain::bit());
    t.add_factor_dense(|v| 1.0 + v[0] * v[1], &[x, y]).unwrap();
    t.set_boundary(&[x, y]).unwrap();
    let mut current = Arc::new(t);
    for depth in 2..=MAX_NESTING_DEPTH {
        let mut parent = FactorGraph::new();
        let a = parent.add_variable(&DiscreteDomain::bit());
        let b = parent.add_variable(&DiscreteDomain::bit());
        parent.add_nested_graph("inner", &current, &[a, b]).unwrap();
        parent.set_boundary(&[a, b]).unwrap();
        assert_eq!(parent.depth(), depth - 1);
        current = Arc::new(parent);
    }
    let mut top = FactorGraph::new();
    let a = top.add_variable(&DiscreteDomain::bit());
    let b = top.add_variable(&DiscreteDomain::bit());
    top.add_nested_graph("inner", &current, &[a, b]).unwrap();
    assert_eq!(top.depth(), MAX_NESTING_DEPTH);
    let too_deep = Arc::new(top);
    let mut over = FactorGraph::new();
    let a = over.add_variable(&DiscreteDomain::bit());
    let b = over.add_variable(&DiscreteDomain::bit());
    let mut bounded = (*too_deep).clone();
    bounded.set_boundary(&[VarId(0), VarId(1)]).unwrap();
    assert_eq!(
        over.add_nested_graph("deep", &Arc::new(bounded), &[a, b]),
        Err(ModelError::NestingTooDeep(MAX_NESTING_DEPTH + 1))
    );
}

#[test]
fn directed_acceptance_matches_normalization() {
    let mut g = FactorGraph::new();
    let p = g.add_variable(&DiscreteDomain::bit());
    let c = g.add_variable(&DiscreteDomain::range(0, 2).unwrap());
    let cond = FactorTable::dense(vec![2, 3], vec![0.2, 0.3, 0.5, 0.1, 0.1, 0.8]).unwrap();
    let f = g.add_factor(cond.clone(), &[p, c]).unwrap();
    assert!(g.set_directed_to(f, &[c]).is_ok());
    assert_eq!(g.set_directed_to(f, &[p]), Err(ModelError::NotDirected { factor: f }));
    let h = g.add_factor(cond.normalize(0).unwrap(), &[p, c]).unwrap();
    assert!(g.set_directed_to(h, &[p]).is_ok());
}

#[test]
fn join_parity_pair_counts_entries() {
    let mut g = FactorGraph::new();
    let b: Vec<VarId> = (0..5).map(|_| g.add_variable(&DiscreteDomain::bit())).collect();
    let f1 = g.add_factor(fgraph::synth::parity_table(3), &[b[0], b[1], b[2]]).unwrap();
    let f2 = g.add_factor(fgraph::synth::parity_table(3), &[b[2], b[3], b[4]]).unwrap();
    let before = marginals(&g);
    let j = g.join_factors(&[f1, f2]).unwrap();
    let f = g.factor(j).unwrap();
    assert_eq!(f.degree(), 5);
    let table = g.table(f.table());
    // enumeration: two independent parity constraints over 5 bits
    let mut count = 0;
    for bits in 0..32usize {
        let x: Vec<usize> = (0..5).map(|k| (bits >> (4 - k)) & 1).collect();
        if (x[0] + x[1] + x[2]) % 2 == 0 && (x[2] + x[3] + x[4]) % 2 == 0 {
            count += 1;
        }
    }
    assert_eq!(table.nonzero_count(), count);
    assert_eq!(count, 8);
    assert!(linf(&marginals(&g), &before) < 1e-15);
}

#[test]
fn join_cap_is_enforced() {
    let mut g = FactorGraph::new();
    let d = DiscreteDomain::range(0, 99).unwrap();
    let v: Vec<VarId> = (0..4).map(|_| g.add_variable(&d)).collect();
    let f1 = g.add_factor_dense(|_| 1.0, &[v[0], v[1]]).unwrap();
    let f2 = g.add_factor_dense(|_| 1.0, &[v[2], v[3]]).unwrap();
    g.set_join_cap(1_000_000);
    assert!(matches!(g.join_factors(&[f1, f2]), Err(ModelError::JoinTooLarge { .. })));
}

#[test]
fn model_file_round_trip_is_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..60 {
        let g = if i % 2 == 0 { random_tree(&mut rng, 8, 4) } else { random_positive(&mut rng, 6, 4) };
        let text = serde_json::to_string(&fgraph::model_file::graph_to_json(&g)).unwrap();
        let back = parse_model(&text, None).unwrap().graph;
        assert_eq!(back.variable_count(), g.variable_count());
        let Ok(s) = Schedule::flooding(&g) else { continue };
        let o = SolveOptions { iterations: 25, ..Default::default() };
        assert_eq!(
            solve(&g, &s, &o, Semiring::SumProduct).unwrap(),
            solve(&back, &s, &o, Semiring::SumProduct).unwrap()
        );
        let again = serde_json::to_string(&fgraph::model_file::graph_to_json(&back)).unwrap();
        assert_eq!(text, again);
    }
}

#[test]
fn nested_model_round_trip_keeps_hierarchy() {
    let t = xor_template();
    let mut g = FactorGraph::new();
    let a: Vec<VarId> = (0..6).map(|_| g.add_variable(&DiscreteDomain::bit())).collect();
    g.add_nested_graph("fourBitXor", &t, &[a[0], a[1], a[3], a[4]]).unwrap();
    g.add_nested_graph("fourBitXor", &t, &[a[1], a[2], a[3], a[5]]).unwrap();
    for &v in &a {
        g.set_input(v, &[0.1, 0.9]).unwrap();
    }
    let json = fgraph::model_file::graph_to_json(&g);
    assert!(json.get("templates").is_some());
    let back = parse_model(&json.to_string(), None).unwrap().graph;
    assert_eq!(back.nested().len(), 2);
    let s = Schedule::hierarchical(&g).unwrap();
    assert_eq!(s, Schedule::hierarchical(&back).unwrap());
    let o = SolveOptions { iterations: 1, ..Default::default() };
    assert_eq!(
        solve(&g, &s, &o, Semiring::SumProduct).unwrap(),
        solve(&back, &s, &o, Semiring::SumProduct).unwrap()
    );
}
