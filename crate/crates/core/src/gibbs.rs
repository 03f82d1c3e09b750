//! Single-site Gibbs sampling.
//!
//! Randomness comes from ChaCha8 seeded through `SeedableRng::seed_from_u64`,
//! so a seed gives the same chain on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SolveError;
use crate::graph::{FactorGraph, VarId};

/// Maximum number of starting states tried before giving up.
pub const MAX_START_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// Ascending variable id every sweep.
    #[default]
    Fixed,
    /// A fresh random permutation every sweep.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsOptions {
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
    pub scan_order: ScanOrder,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            samples: 10_000,
            seed: 0,
            scan_order: ScanOrder::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsResult {
    /// Empirical marginals over the post-burn-in sweeps.
    pub beliefs: Vec<Vec<f64>>,
    /// Value indices after the last sweep.
    pub sample: Vec<usize>,
    pub samples: usize,
}

/// Full conditional of `var` given every other variable's value index in
/// `assignment`.
pub fn conditional_distribution(
    graph: &FactorGraph,
    var: VarId,
    assignment: &[usize],
) -> Result<Vec<f64>, SolveError> {
    let mut p = graph.variable(var).input().to_vec();
    let mut index = Vec::new();
    for &f in graph.factors_of(var) {
        let factor = graph.factor(f).expect("live factor");
        let table = graph.table(factor.table());
        index.clear();
        index.extend(factor.vars().iter().map(|v| assignment[v.0]));
        let pos = factor.position_of(var).expect("attached");
        for (x, px) in p.iter_mut().enumerate() {
            if *px == 0.0 {
                continue;
            }
            index[pos] = x;
            *px *= table.weight_at(&index);
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(SolveError::StuckState(var));
    }
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// True when every input and factor weight at `assignment` is positive.
pub fn has_positive_weight(graph: &FactorGraph, assignment: &[usize]) -> bool {
    let inputs_ok = graph
        .variables()
        .iter()
        .zip(assignment)
        .all(|(v, &x)| v.input()[x] > 0.0);
    inputs_ok
        && graph.factors().all(|(_, factor)| {
            let index: Vec<usize> = factor.vars().iter().map(|v| assignment[v.0]).collect();
            graph.table(factor.table()).weight_at(&index) > 0.0
        })
}

/// A Gibbs chain over a borrowed graph.
pub struct GibbsSampler<'g> {
    graph: &'g FactorGraph,
    rng: ChaCha8Rng,
    state: Vec<usize>,
    order: Vec<VarId>,
    scan: ScanOrder,
}

impl<'g> GibbsSampler<'g> {
    /// Starts from the per-variable input argmax, falling back to random
    /// draws from the inputs.
    pub fn new(graph: &'g FactorGraph, seed: u64, scan: ScanOrder) -> Result<Self, SolveError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state: Vec<usize> = graph
            .variables()
            .iter()
            .map(|v| argmax(v.input()))
            .collect();
        let mut attempts = 1;
        while !has_positive_weight(graph, &state) {
            if attempts == MAX_START_ATTEMPTS {
                return Err(SolveError::NoPositiveState(attempts));
            }
            for (slot, v) in state.iter_mut().zip(graph.variables()) {
                *slot = draw(&mut rng, v.input());
            }
            attempts += 1;
        }
        Ok(Self {
            graph,
            rng,
            state,
            order: graph.var_ids().collect(),
            scan,
        })
    }

    pub fn state(&self) -> &[usize] {
        &self.state
    }

    /// Resamples every variable once.
    pub fn sweep(&mut self) -> Result<(), SolveError> {
        if self.scan == ScanOrder::Random {
            self.order.shuffle(&mut self.rng);
        }
        for i in 0..self.order.len() {
            let v = self.order[i];
            let p = conditional_distribution(self.graph, v, &self.state)?;
            self.state[v.0] = draw(&mut self.rng, &p);
        }
        if !has_positive_weight(self.graph, &self.state) {
            return Err(SolveError::ZeroWeightState);
        }
        Ok(())
    }
}

/// Runs burn-in then `samples` counted sweeps.
pub fn run_gibbs(graph: &FactorGraph, options: &GibbsOptions) -> Result<GibbsResult, SolveError> {
    if options.samples == 0 {
        return Err(SolveError::InvalidOption("samples must be at least 1".into()));
    }
    let mut sampler = GibbsSampler::new(graph, options.seed, options.scan_order)?;
    for _ in 0..options.burn_in {
        sampler.sweep()?;
    }
    let mut counts: Vec<Vec<u64>> = graph.variables().iter().map(|v| vec![0; v.size()]).collect();
    for _ in 0..options.samples {
        sampler.sweep()?;
        for (c, &x) in counts.iter_mut().zip(sampler.state()) {
            c[x] += 1;
        }
    }
    let n = options.samples as f64;
    Ok(GibbsResult {
        beliefs: counts
            .iter()
            .map(|c| c.iter().map(|&k| k as f64 / n).collect())
            .collect(),
        sample: sampler.state().to_vec(),
        samples: options.samples,
    })
}

fn argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in w.iter().enumerate() {
        if v > w[best] {
            best = i;
        }
    }
    best
}

/// Index drawn proportionally to nonnegative weights `w`.
fn draw(rng: &mut ChaCha8Rng, w: &[f64]) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &x) in w.iter().enumerate() {
        if x > 0.0 {
            if u < x {
                return i;
            }
            u -= x;
            last = i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DiscreteDomain;
    use crate::table::FactorTable;

    #[test]
    fn chain_conditional() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        let b = g.add_variable(&DiscreteDomain::bit());
        g.add_factor(FactorTable::dense(vec![2, 2], vec![1.0, 1.0, 1.0, 3.0]).unwrap(), &[a, b])
            .unwrap();
        assert_eq!(conditional_distribution(&g, b, &[1, 0]).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn equality_conditional_is_point_mass() {
        let mut g = FactorGraph::new();
        let d = DiscreteDomain::range(0, 4).unwrap();
        let a = g.add_variable(&d);
        let b = g.add_variable(&d);
        g.add_factor_dense(|x| (x[0] == x[1]) as u8 as f64, &[a, b]).unwrap();
        assert_eq!(
            conditional_distribution(&g, a, &[0, 3]).unwrap(),
            vec![0.0, 0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn stuck_state_names_variable() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        let b = g.add_variable(&DiscreteDomain::bit());
        g.add_factor_sparse(&[vec![0, 0]], &[1.0], &[a, b]).unwrap();
        assert_eq!(conditional_distribution(&g, a, &[0, 1]), Err(SolveError::StuckState(a)));
    }

    #[test]
    fn single_variable_frequencies() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        g.set_input(a, &[1.0, 3.0]).unwrap();
        let opts = GibbsOptions { burn_in: 0, samples: 100_000, seed: 5, ..Default::default() };
        let r = run_gibbs(&g, &opts).unwrap();
        assert!((r.beliefs[0][1] - 0.75).abs() < 0.01);
        assert_eq!(r, run_gibbs(&g, &opts).unwrap());
    }

    #[test]
    fn restarts_escape_zero_weight_argmax() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        let b = g.add_variable(&DiscreteDomain::bit());
        g.add_factor_sparse(&[vec![1, 0], vec![0, 1]], &[1.0, 1.0], &[a, b]).unwrap();
        let s = GibbsSampler::new(&g, 1, ScanOrder::Fixed).unwrap();
        assert!(has_positive_weight(&g, s.state()));
    }

    #[test]
    fn impossible_start_reports_attempts() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        g.add_factor_sparse(&[vec![1]], &[1.0], &[a]).unwrap();
        g.set_input(a, &[1.0, 0.0]).unwrap();
        assert!(matches!(
            GibbsSampler::new(&g, 0, ScanOrder::Random),
            Err(SolveError::NoPositiveState(MAX_START_ATTEMPTS))
        ));
    }
}
