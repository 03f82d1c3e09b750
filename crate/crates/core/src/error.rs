use thiserror::Error;

use crate::graph::{FactorId, VarId};

/// Errors raised while constructing or editing a factor graph.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("domain must contain at least one value")]
    EmptyDomain,
    #[error("domain value {0} is not finite")]
    NonFiniteDomainValue(f64),
    #[error("domain contains duplicate value {0}")]
    DuplicateDomainValue(f64),
    #[error("variable array shape {0:?} has zero size")]
    ZeroSizeShape(Vec<usize>),
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("unknown factor {0}")]
    UnknownFactor(FactorId),
    #[error("variable name `{0}` is already taken")]
    DuplicateName(String),
    #[error("input for {var} has length {got}, domain size is {expected}")]
    InputLength { var: VarId, expected: usize, got: usize },
    #[error("input for {0} must be finite, nonnegative and not all zero")]
    InvalidInput(VarId),
    #[error("weight {weight} at {index:?} is negative or not finite")]
    InvalidWeight { index: Vec<usize>, weight: f64 },
    #[error("factor table has no nonzero weight")]
    AllZeroTable,
    #[error("table has {got} dimensions but {expected} were expected")]
    DimensionCount { expected: usize, got: usize },
    #[error("table dimension {position} has size {table} but the variable domain has size {domain}")]
    DimensionMismatch { position: usize, table: usize, domain: usize },
    #[error("table dimension sizes must be positive")]
    ZeroDimension,
    #[error("index {index:?} is out of bounds for dimensions {dims:?}")]
    IndexOutOfBounds { index: Vec<usize>, dims: Vec<usize> },
    #[error("index {0:?} appears more than once")]
    DuplicateIndex(Vec<usize>),
    #[error("{indices} index tuples but {weights} weights")]
    LengthMismatch { indices: usize, weights: usize },
    #[error("factor must connect at least one variable")]
    EmptyFactor,
    #[error("variable {0} appears more than once in the same factor")]
    RepeatedVariable(VarId),
    #[error("normalization slice at {0:?} sums to zero")]
    ZeroSumSlice(Vec<usize>),
    #[error("dimension {dim} out of range for a degree-{degree} table")]
    BadDimension { dim: usize, degree: usize },
    #[error("table of {factor} is not a conditional distribution over the directed variables")]
    NotDirected { factor: FactorId },
    #[error("directed_to variable {var} is not connected to {factor}")]
    DirectedNotConnected { factor: FactorId, var: VarId },
    #[error("argument shapes {0:?} cannot be broadcast together")]
    ShapeMismatch(Vec<Vec<usize>>),
    #[error("template boundary has {expected} variables but {got} were bound")]
    BoundaryArity { expected: usize, got: usize },
    #[error("boundary position {position} expects domain size {expected}, bound variable has {got}")]
    BoundaryDomain { position: usize, expected: usize, got: usize },
    #[error("nesting depth {0} exceeds the limit of {max}", max = crate::graph::MAX_NESTING_DEPTH)]
    NestingTooDeep(usize),
    #[error("template `{0}` contains itself")]
    NestingCycle(String),
    #[error("joined table would have {cells} cells, above the cap of {cap}")]
    JoinTooLarge { cells: u128, cap: usize },
    #[error("factor {0} listed twice in join")]
    DuplicateJoin(FactorId),
    #[error("join needs at least one factor")]
    EmptyJoin,
}

/// Errors raised while building or validating a schedule.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScheduleError {
    #[error("graph has no edges to schedule")]
    EmptyGraph,
    #[error("graph contains a cycle through edges {0:?}")]
    Cycle(Vec<(FactorId, VarId)>),
    #[error("edge ({0}, {1}) does not exist in this graph")]
    DanglingEdge(FactorId, VarId),
}

/// Errors raised by the inference engines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("contradictory evidence at variable {variable} (edges {edges:?})")]
    Contradiction {
        variable: VarId,
        edges: Vec<(FactorId, VarId)>,
    },
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
    #[error("k = {k} is out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("no positive-weight starting state found after {0} attempts")]
    NoPositiveState(usize),
    #[error("all conditional weights of variable {0} are zero")]
    StuckState(VarId),
    #[error("sampler reached a zero-weight joint state")]
    ZeroWeightState,
    #[error("{0}")]
    Backend(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors raised by the streaming front-end.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum StreamError {
    #[error("buffer size must be at least 1")]
    ZeroBuffer,
    #[error("template boundary has {boundary} variables but {slices} slices were given")]
    SliceMismatch { boundary: usize, slices: usize },
    #[error("data row {row} has length {got}, domain size is {expected}")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("advance called past the end of the data source")]
    Exhausted,
    #[error("advance requires a solve on the current window")]
    NotSolved,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Errors raised while reading or writing model files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("unsupported model format version {0} (expected 1)")]
    Version(u64),
    #[error("unknown {kind} `{name}`")]
    UnknownRef { kind: &'static str, name: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("table `{table}`: {message}")]
    Table { table: String, message: String },
    #[error("stream `{stream}`: {message}")]
    Stream { stream: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
