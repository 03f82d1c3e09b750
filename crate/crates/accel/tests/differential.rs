use fgraph::bp::{solve, BpSolution, SolveOptions};
use fgraph::{DiscreteDomain, FactorGraph, FactorTable, Schedule, Semiring, SolveError, VarId};
use fgraph_accel::{compile, simulate, AccelError, AccelLimits, AccelSolver, Program};
use fgraph_testkit::{random_positive, random_tree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bits(s: &BpSolution) -> (Vec<Vec<u64>>, Vec<u64>, usize, bool) {
    let b = s.beliefs.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
    let d = s.stats.deltas.iter().map(|x| x.to_bits()).collect();
    (b, d, s.stats.passes, s.stats.converged)
}

/// Software and simulator agree bit for bit, errors included.
fn check(g: &FactorGraph, s: &Schedule, o: &SolveOptions, semiring: Semiring, limits: &AccelLimits) {
    let sw = solve(g, s, o, semiring);
    let hw = compile(g, s, limits, semiring, o).and_then(|p| simulate(&p, g, limits));
    match (sw, hw) {
        (Ok(a), Ok(b)) => {
            assert_eq!(bits(&a), bits(&b.solution));
            assert_eq!(a.assignment, b.solution.assignment);
            if let (Some(x), Some(y)) = (&a.costs, &b.solution.costs) {
                for (u, v) in x.iter().zip(y) {
                    assert!(u.iter().zip(v).all(|(p, q)| p.to_bits() == q.to_bits()));
                }
            }
        }
        (Err(a), Err(AccelError::Solve(b))) => assert_eq!(a, b),
        (a, b) => panic!("software {a:?} vs accelerator {b:?}"),
    }
}

#[test]
fn random_graphs_match_software_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let limits = AccelLimits::default();
    for i in 0..150 {
        let g = if i % 2 == 0 { random_tree(&mut rng, 8, 4) } else { random_positive(&mut rng, 6, 4) };
        if g.factor_count() == 0 {
            continue;
        }
        let o = SolveOptions { iterations: 30, ..Default::default() };
        for semiring in [Semiring::SumProduct, Semiring::MinSum, Semiring::MaxProduct] {
            check(&g, &Schedule::flooding(&g).unwrap(), &o, semiring, &limits);
            check(&g, &Schedule::sequential(&g).unwrap(), &o, semiring, &limits);
            if let Ok(t) = Schedule::tree(&g) {
                check(&g, &t, &o, semiring, &limits);
            }
        }
    }
}

#[test]
fn chunked_tables_match_software_bitwise() {
    // a 1KB cache forces every table into several chunks
    let limits = AccelLimits { table_cache_bytes: 1024, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let g = fgraph::synth::grid(3, 3, 20, rand::Rng::gen(&mut rng));
        let o = SolveOptions { iterations: 15, ..Default::default() };
        let p = compile(&g, &Schedule::flooding(&g).unwrap(), &limits, Semiring::SumProduct, &o).unwrap();
        let ldts = p.body.iter().filter(|i| i.op == fgraph_accel::Opcode::Ldt).count();
        assert!(ldts > 2 * g.factor_count());
        check(&g, &Schedule::flooding(&g).unwrap(), &o, Semiring::SumProduct, &limits);
        check(&g, &Schedule::flooding(&g).unwrap(), &o, Semiring::MinSum, &limits);
    }
}

#[test]
fn contradiction_is_reported_like_software() {
    let mut g = FactorGraph::new();
    let a = g.add_variable(&DiscreteDomain::bit());
    let b = g.add_variable(&DiscreteDomain::bit());
    g.set_input(a, &[1.0, 0.0]).unwrap();
    g.set_input(b, &[1.0, 0.0]).unwrap();
    g.add_factor(FactorTable::dense(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap(), &[a, b]).unwrap();
    let s = Schedule::flooding(&g).unwrap();
    let o = SolveOptions::default();
    check(&g, &s, &o, Semiring::SumProduct, &AccelLimits::default());
    let err = AccelSolver::new(Semiring::SumProduct, o);
    assert!(matches!(
        fgraph::InferenceEngine::infer(&err, &g, &s),
        Err(SolveError::Contradiction { .. })
    ));
}

#[test]
fn nested_graph_matches_software() {
    let mut t = FactorGraph::new();
    let b: Vec<VarId> = (0..4).map(|_| t.add_variable(&DiscreteDomain::bit())).collect();
    let c = t.add_variable(&DiscreteDomain::bit());
    t.add_factor(fgraph::synth::parity_table(3), &[b[0], b[1], c]).unwrap();
    t.add_factor(fgraph::synth::parity_table(3), &[b[2], b[3], c]).unwrap();
    t.set_boundary(&b).unwrap();
    let t = std::sync::Arc::new(t);
    let mut g = FactorGraph::new();
    let v: Vec<VarId> = (0..6).map(|_| g.add_variable(&DiscreteDomain::bit())).collect();
    g.add_nested_graph("x", &t, &[v[0], v[1], v[3], v[4]]).unwrap();
    g.add_nested_graph("x", &t, &[v[1], v[2], v[3], v[5]]).unwrap();
    for &x in &v {
        g.set_input(x, &[0.2, 0.8]).unwrap();
    }
    let o = SolveOptions::default();
    check(&g, &Schedule::hierarchical(&g).unwrap(), &o, Semiring::SumProduct, &AccelLimits::default());
    check(&g, &Schedule::flooding(&g).unwrap(), &o, Semiring::MinSum, &AccelLimits::default());
}

#[test]
fn compile_and_simulate_are_deterministic() {
    let g = fgraph::synth::stereo_toy(5, 4, 8, 3);
    let s = Schedule::flooding(&g).unwrap();
    let o = SolveOptions { iterations: 10, ..Default::default() };
    let l = AccelLimits::default();
    let p1 = compile(&g, &s, &l, Semiring::MinSum, &o).unwrap();
    let p2 = compile(&g, &s, &l, Semiring::MinSum, &o).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(p1.encode(), p2.encode());
    let r1 = simulate(&p1, &g, &l).unwrap();
    let r2 = simulate(&Program::decode(&p1.encode()).unwrap(), &g, &l).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn kbest_and_damping_are_rejected() {
    let g = fgraph::synth::grid(2, 2, 3, 1);
    let s = Schedule::flooding(&g).unwrap();
    let l = AccelLimits::default();
    let k = SolveOptions { k: Some(2), ..Default::default() };
    assert!(matches!(compile(&g, &s, &l, Semiring::SumProduct, &k), Err(AccelError::Unsupported(_))));
    let damp = SolveOptions { damping: 0.5, ..Default::default() };
    assert!(matches!(compile(&g, &s, &l, Semiring::SumProduct, &damp), Err(AccelError::Unsupported(_))));
}
