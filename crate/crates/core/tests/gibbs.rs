use fgraph::gibbs::{run_gibbs, GibbsOptions, GibbsSampler, ScanOrder};
use fgraph::{DiscreteDomain, FactorGraph, FactorTable};
use fgraph_testkit::{for_each_assignment, joint_weight, marginals};

fn loopy_triple() -> FactorGraph {
    let mut g = FactorGraph::new();
    let v: Vec<_> = (0..3).map(|_| g.add_variable(&DiscreteDomain::range(0, 2).unwrap())).collect();
    g.set_input(v[0], &[1.0, 2.0, 0.5]).unwrap();
    g.add_factor_dense(|x| 1.0 + (x[0] - x[1]).abs(), &[v[0], v[1]]).unwrap();
    g.add_factor_dense(|x| 2.0 - 0.4 * x[0] * x[1], &[v[1], v[2]]).unwrap();
    g.add_factor_dense(|x| 0.5 + x[0] + 0.3 * x[1], &[v[2], v[0]]).unwrap();
    g
}

#[test]
fn loopy_graph_marginals_within_three_sigma() {
    let g = loopy_triple();
    let exact = marginals(&g);
    for scan in [ScanOrder::Fixed, ScanOrder::Random] {
        let n = 1_000_000;
        let r = run_gibbs(&g, &GibbsOptions { burn_in: 1000, samples: n, seed: 9, scan_order: scan }).unwrap();
        for (b, e) in r.beliefs.iter().zip(&exact) {
            for (p, q) in b.iter().zip(e) {
                let sigma = (q * (1.0 - q) / n as f64).sqrt();
                assert!((p - q).abs() <= 3.0 * sigma.max(1e-4), "{p} vs {q} ({scan:?})");
            }
        }
    }
}

#[test]
fn two_variable_joint_matches_exact_joint() {
    let mut g = FactorGraph::new();
    let a = g.add_variable(&DiscreteDomain::bit());
    let b = g.add_variable(&DiscreteDomain::bit());
    g.add_factor(FactorTable::dense(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), &[a, b]).unwrap();
    let mut exact = [0.0; 4];
    let mut z = 0.0;
    for_each_assignment(&g, |x| {
        let w = joint_weight(&g, x);
        exact[x[0] * 2 + x[1]] = w;
        z += w;
    });
    let mut s = GibbsSampler::new(&g, 4, ScanOrder::Fixed).unwrap();
    let n = 400_000;
    let mut counts = [0u64; 4];
    for _ in 0..n {
        s.sweep().unwrap();
        counts[s.state()[0] * 2 + s.state()[1]] += 1;
    }
    for k in 0..4 {
        let q = exact[k] / z;
        let p = counts[k] as f64 / n as f64;
        assert!((p - q).abs() <= 3.0 * (q * (1.0 - q) / n as f64).sqrt() , "cell {k}: {p} vs {q}");
    }
}

#[test]
fn seeds_are_deterministic() {
    let g = loopy_triple();
    let o = GibbsOptions { burn_in: 10, samples: 5000, seed: 77, scan_order: ScanOrder::Random };
    assert_eq!(run_gibbs(&g, &o).unwrap(), run_gibbs(&g, &o).unwrap());
    let other = GibbsOptions { seed: 78, ..o };
    assert_ne!(run_gibbs(&g, &o).unwrap(), run_gibbs(&g, &other).unwrap());
}

#[test]
fn hard_constraints_are_never_violated() {
    // equality chain with point evidence at one end
    let mut g = FactorGraph::new();
    let d = DiscreteDomain::range(0, 3).unwrap();
    let v: Vec<_> = (0..4).map(|_| g.add_variable(&d)).collect();
    let eq: Vec<Vec<usize>> = (0..4).map(|i| vec![i, i]).collect();
    for w in v.windows(2) {
        g.add_factor_sparse(&eq, &[1.0; 4], w).unwrap();
    }
    g.set_input(v[0], &[0.0, 0.0, 1.0, 0.0]).unwrap();
    let r = run_gibbs(&g, &GibbsOptions { burn_in: 0, samples: 1000, seed: 1, scan_order: ScanOrder::Fixed })
        .unwrap();
    for b in &r.beliefs {
        assert_eq!(b, &vec![0.0, 0.0, 1.0, 0.0]);
    }
}
