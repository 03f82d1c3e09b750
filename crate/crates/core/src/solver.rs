//! Common interface over the inference backends.

use crate::bp::{self, SolveOptions};
use crate::error::SolveError;
use crate::gibbs::{self, GibbsOptions};
use crate::graph::FactorGraph;
use crate::kernel::Semiring;
use crate::schedule::Schedule;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// One normalized vector per variable, in variable-id order.
    pub beliefs: Vec<Vec<f64>>,
    /// Best value index per variable, for MAP engines.
    pub assignment: Option<Vec<usize>>,
    pub passes: usize,
    pub converged: bool,
}

/// Anything that turns a graph (and a schedule, for message passing) into
/// beliefs.
pub trait InferenceEngine {
    fn name(&self) -> String;
    fn infer(&self, graph: &FactorGraph, schedule: &Schedule) -> Result<Solution, SolveError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpSolver {
    pub semiring: Semiring,
    pub options: SolveOptions,
}

impl InferenceEngine for BpSolver {
    fn name(&self) -> String {
        match self.options.k {
            Some(k) => format!("{}/k={k}", self.semiring.name()),
            None => self.semiring.name().to_string(),
        }
    }

    fn infer(&self, graph: &FactorGraph, schedule: &Schedule) -> Result<Solution, SolveError> {
        let s = bp::solve(graph, schedule, &self.options, self.semiring)?;
        Ok(Solution {
            beliefs: s.beliefs,
            assignment: s.assignment,
            passes: s.stats.passes,
            converged: s.stats.converged,
        })
    }
}

/// Gibbs sampling; the schedule is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsSolver {
    pub options: GibbsOptions,
}

impl InferenceEngine for GibbsSolver {
    fn name(&self) -> String {
        "gibbs".to_string()
    }

    fn infer(&self, graph: &FactorGraph, _schedule: &Schedule) -> Result<Solution, SolveError> {
        let r = gibbs::run_gibbs(graph, &self.options)?;
        Ok(Solution {
            beliefs: r.beliefs,
            assignment: Some(r.sample),
            passes: self.options.burn_in + r.samples,
            converged: true,
        })
    }
}
