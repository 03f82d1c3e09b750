//! Compiler, cycle-model simulator and profiler for a virtual
//! belief-propagation accelerator.
//!
//! The accelerator is a weighted sparse tensor inner-product engine with a
//! small table cache and a fixed I/O bandwidth. [`compile`] lowers a graph
//! and schedule to a six-opcode program, [`simulate`] runs it with a cycle
//! model, and [`AccelSolver`] wraps both as an ordinary inference engine.

pub mod alloc;
pub mod compile;
pub mod constraints;
pub mod isa;
pub mod limits;
pub mod profile;
pub mod simulate;

use fgraph::bp::SolveOptions;
use fgraph::{FactorGraph, InferenceEngine, Schedule, ScheduleError, Semiring, Solution, SolveError};
use thiserror::Error;

pub use compile::compile;
pub use constraints::{check_constraints, estimate_factor_cost, Violation};
pub use isa::{Instruction, Opcode, Program};
pub use limits::AccelLimits;
pub use simulate::{simulate, CycleReport, Simulation};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AccelError {
    #[error("graph exceeds accelerator limits: {}", list(.0))]
    Constraints(Vec<Violation>),
    #[error("factor {factor} needs {bytes} bytes of operand buffer (limit {limit})")]
    MessageBudget { factor: usize, bytes: usize, limit: usize },
    #[error("block of {bytes} bytes does not fit the {capacity}-byte table cache")]
    BlockTooLarge { bytes: usize, capacity: usize },
    #[error("not supported by the accelerator: {0}")]
    Unsupported(String),
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("malformed program at instruction {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("bad instruction stream: {0}")]
    Format(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Compile-and-simulate as an inference engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSolver {
    pub semiring: Semiring,
    pub options: SolveOptions,
    pub limits: AccelLimits,
}

impl AccelSolver {
    pub fn new(semiring: Semiring, options: SolveOptions) -> Self {
        Self { semiring, options, limits: AccelLimits::default() }
    }

    pub fn run(&self, graph: &FactorGraph, schedule: &Schedule) -> Result<Simulation, AccelError> {
        let program = compile(graph, schedule, &self.limits, self.semiring, &self.options)?;
        simulate(&program, graph, &self.limits)
    }
}

impl InferenceEngine for AccelSolver {
    fn name(&self) -> String {
        format!("accel/{}", self.semiring.name())
    }

    fn infer(&self, graph: &FactorGraph, schedule: &Schedule) -> Result<Solution, SolveError> {
        let sim = self.run(graph, schedule).map_err(|e| match e {
            AccelError::Solve(s) => s,
            other => SolveError::Backend(other.to_string()),
        })?;
        let s = sim.solution;
        Ok(Solution {
            beliefs: s.beliefs,
            assignment: s.assignment,
            passes: s.stats.passes,
            converged: s.stats.converged,
        })
    }
}
