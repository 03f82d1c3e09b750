//! Reference answers by exhaustive enumeration, and random model generators.
//!
//! Nothing here shares code with the message-passing kernel: the joint weight
//! of an assignment is read straight from the tables through
//! `FactorTable::weight_at`.

use fgraph::{DiscreteDomain, FactorGraph, FactorTable, VarId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Joint weight of one assignment (value indices in variable-id order).
pub fn joint_weight(graph: &FactorGraph, x: &[usize]) -> f64 {
    let mut w: f64 = graph.variables().iter().zip(x).map(|(v, &i)| v.input()[i]).product();
    for (_, f) in graph.factors() {
        let idx: Vec<usize> = f.vars().iter().map(|v| x[v.0]).collect();
        w *= graph.table(f.table()).weight_at(&idx);
    }
    w
}

/// Calls `visit` on every joint assignment, last variable fastest.
pub fn for_each_assignment(graph: &FactorGraph, mut visit: impl FnMut(&[usize])) {
    let sizes: Vec<usize> = graph.variables().iter().map(|v| v.size()).collect();
    let total: usize = sizes.iter().product();
    assert!(total <= 50_000_000, "enumeration too large: {total}");
    let mut x = vec![0; sizes.len()];
    for _ in 0..total {
        visit(&x);
        for k in (0..x.len()).rev() {
            x[k] += 1;
            if x[k] < sizes[k] {
                break;
            }
            x[k] = 0;
        }
    }
}

/// Exact marginals. Panics when the joint has no support.
pub fn marginals(graph: &FactorGraph) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = graph.variables().iter().map(|v| vec![0.0; v.size()]).collect();
    let mut z = 0.0;
    for_each_assignment(graph, |x| {
        let w = joint_weight(graph, x);
        if w > 0.0 {
            z += w;
            for (mv, &i) in m.iter_mut().zip(x) {
                mv[i] += w;
            }
        }
    });
    assert!(z > 0.0, "joint has no support");
    for mv in &mut m {
        mv.iter_mut().for_each(|p| *p /= z);
    }
    m
}

/// Most probable joint assignment and whether it is unique (no other
/// assignment within a relative 1e-9 of its weight).
pub fn map_assignment(graph: &FactorGraph) -> (Vec<usize>, bool) {
    let mut best = Vec::new();
    let mut best_w = -1.0;
    let mut runner_up = -1.0;
    for_each_assignment(graph, |x| {
        let w = joint_weight(graph, x);
        if w > best_w {
            runner_up = best_w;
            best_w = w;
            best = x.to_vec();
        } else if w > runner_up {
            runner_up = w;
        }
    });
    (best, runner_up < best_w * (1.0 - 1e-9))
}

/// Largest absolute entry difference.
pub fn linf(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen::<f64>() < zero_prob { 0.0 } else { 0.05 + rng.gen::<f64>() })
        .collect()
}

/// Random acyclic graph: up to `max_vars` variables with domains of size
/// 1..=`max_d`, factors of degree 1..=3 joining distinct components, a mix
/// of dense and sparse tables, and some zero weights. A hidden witness
/// assignment keeps positive weight everywhere, so the joint has support.
pub fn random_tree(rng: &mut ChaCha8Rng, max_vars: usize, max_d: usize) -> FactorGraph {
    let n = rng.gen_range(1..=max_vars);
    let mut g = FactorGraph::new();
    let vars: Vec<VarId> = (0..n)
        .map(|_| {
            let d = rng.gen_range(1..=max_d);
            g.add_variable(&DiscreteDomain::range(0, d as i64 - 1).unwrap())
        })
        .collect();
    let witness: Vec<usize> = vars.iter().map(|&v| rng.gen_range(0..g.variable(v).size())).collect();
    for (&v, &w) in vars.iter().zip(&witness) {
        let mut input = random_weights(rng, g.variable(v).size(), 0.2);
        input[w] = 0.5 + rng.gen::<f64>();
        g.set_input(v, &input).unwrap();
    }
    let mut comp: Vec<usize> = (0..n).collect();
    let attempts = rng.gen_range(0..=2 * n);
    for _ in 0..attempts {
        let degree = rng.gen_range(1..=3.min(n));
        let mut picks = vars.clone();
        picks.shuffle(rng);
        let mut chosen: Vec<VarId> = Vec::new();
        for v in picks {
            if chosen.len() == degree {
                break;
            }
            if chosen.iter().all(|c| comp[c.0] != comp[v.0]) {
                chosen.push(v);
            }
        }
        if chosen.len() > 1 || degree == 1 {
            let dims: Vec<usize> = chosen.iter().map(|&v| g.variable(v).size()).collect();
            let cells: usize = dims.iter().product();
            let wit_flat = chosen
                .iter()
                .fold(0, |acc, v| acc * g.variable(*v).size() + witness[v.0]);
            let mut w = random_weights(rng, cells, 0.3);
            w[wit_flat] = 0.5 + rng.gen::<f64>();
            let dense = FactorTable::dense(dims, w).unwrap();
            let table = if rng.gen_bool(0.5) { dense.to_sparse() } else { dense };
            g.add_factor(table, &chosen).unwrap();
            let root = comp[chosen[0].0];
            let merged: Vec<usize> = chosen.iter().map(|c| comp[c.0]).collect();
            for c in comp.iter_mut() {
                if merged.contains(c) {
                    *c = root;
                }
            }
        }
    }
    g
}

/// Random graph (cycles allowed) with strictly positive inputs and tables.
pub fn random_positive(rng: &mut ChaCha8Rng, max_vars: usize, max_d: usize) -> FactorGraph {
    let n = rng.gen_range(1..=max_vars);
    let mut g = FactorGraph::new();
    let vars: Vec<VarId> = (0..n)
        .map(|_| {
            let d = rng.gen_range(2..=max_d.max(2));
            g.add_variable(&DiscreteDomain::range(0, d as i64 - 1).unwrap())
        })
        .collect();
    for &v in &vars {
        let input = random_weights(rng, g.variable(v).size(), 0.0);
        g.set_input(v, &input).unwrap();
    }
    for _ in 0..rng.gen_range(1..=n + 2) {
        let degree = rng.gen_range(1..=3.min(n));
        let mut chosen = vars.clone();
        chosen.shuffle(rng);
        chosen.truncate(degree);
        let dims: Vec<usize> = chosen.iter().map(|&v| g.variable(v).size()).collect();
        let cells = dims.iter().product();
        g.add_factor(FactorTable::dense(dims, random_weights(rng, cells, 0.0)).unwrap(), &chosen)
            .unwrap();
    }
    g
}
