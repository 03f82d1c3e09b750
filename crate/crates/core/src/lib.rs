//! Discrete factor graphs with pluggable inference engines.
//!
//! A [`FactorGraph`] holds discrete variables, factor tables (dense or
//! sparse, deduplicated), and nested sub-graph instances. Message-passing
//! solvers in [`bp`] run over a [`Schedule`]; [`gibbs`] samples; and
//! [`streaming`] slides a window over unbounded data.

pub mod bp;
pub mod domain;
pub mod error;
pub mod gibbs;
pub mod graph;
pub mod kernel;
pub mod model_file;
pub mod schedule;
pub mod solver;
pub mod streaming;
pub mod synth;
pub mod table;
pub mod vararray;

pub use bp::{solve, solve_kbest, BpEngine, BpSolution, SolveOptions};
pub use domain::DiscreteDomain;
pub use error::{FormatError, ModelError, ScheduleError, SolveError, StreamError};
pub use gibbs::{run_gibbs, GibbsOptions, GibbsResult, ScanOrder};
pub use graph::{Factor, FactorGraph, FactorId, FactorSpec, TableId, VarId, Variable};
pub use kernel::Semiring;
pub use model_file::{parse_model, read_model, Model, StreamSpec};
pub use schedule::{Direction, EdgeIndex, Schedule, ScheduleKind, Step};
pub use solver::{BpSolver, GibbsSolver, InferenceEngine, Solution};
pub use streaming::{ArraySource, ChannelSource, DataSource, StreamingGraph};
pub use table::{FactorTable, StorageKind};
pub use vararray::VarArray;
