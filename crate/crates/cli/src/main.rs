//! `fgraph`: run factor-graph model files in software or through the
//! accelerator pipeline.
//!
//! Exit codes: 0 success, 1 any other failure, 2 contradictory evidence,
//! 3 accelerator constraint violation.

mod bench;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgraph::bp::{RunStats, SolveOptions};
use fgraph::{
    read_model, BpEngine, BpSolution, FactorGraph, FormatError, GibbsOptions, Model, Schedule, ScheduleError,
    Semiring, SolveError, StreamError,
};
use fgraph_accel::{compile, simulate, AccelError, AccelLimits, Program, Simulation};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "fgraph", version, about = "Discrete factor-graph inference and accelerator simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// flooding, sequential, tree, hierarchical, custom:<file> or default
    /// (tree when acyclic, else flooding)
    #[arg(long, global = true, default_value = "default")]
    schedule: String,
    /// sum-product, min-sum, max-product, gibbs, or accel[:<semiring>]
    #[arg(long, global = true, default_value = "sum-product")]
    solver: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (the `.gp5` path for `compile`)
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Keep the k best entries of each incoming message
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    damping: Option<f64>,
    #[arg(long, global = true, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, global = true, default_value_t = 10_000)]
    samples: usize,
    /// Accelerator limit overrides, e.g. `cache=512KB,domain=8192`
    #[arg(long, global = true)]
    limits: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a model and print beliefs as JSON
    Run { model: PathBuf },
    /// Lower a model to an instruction stream and print its profile
    Compile {
        model: PathBuf,
        /// Also check simulated beliefs against the software solver
        #[arg(long)]
        simulate: bool,
        #[arg(long, value_enum, default_value = "text")]
        profile: Format,
    },
    /// Run a model on the simulated accelerator
    Simulate {
        model: PathBuf,
        /// Run this `.gp5` stream instead of compiling
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Print the cycle profile of a model
    Profile {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        profile: Format,
    },
    /// Time software inference against simulated cycles
    Bench {
        #[arg(value_enum)]
        suite: bench::Suite,
        #[arg(long)]
        json: bool,
    },
    /// Parse a model and check that it round-trips
    Validate { model: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Accel(#[from] AccelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let contradiction = |e: &SolveError| matches!(e, SolveError::Contradiction { .. });
        match self {
            CliError::Solve(e) | CliError::Stream(StreamError::Solve(e)) | CliError::Accel(AccelError::Solve(e))
                if contradiction(e) =>
            {
                2
            }
            CliError::Accel(AccelError::Constraints(_) | AccelError::MessageBudget { .. }) => 3,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Solver {
    Bp(Semiring),
    Gibbs,
    Accel(Semiring),
}

fn parse_semiring(s: &str) -> Option<Semiring> {
    match s {
        "sum-product" => Some(Semiring::SumProduct),
        "min-sum" => Some(Semiring::MinSum),
        "max-product" => Some(Semiring::MaxProduct),
        _ => None,
    }
}

fn parse_solver(s: &str) -> Result<Solver, CliError> {
    let unknown = || CliError::Usage(format!("unknown solver `{s}`"));
    match s {
        "gibbs" => Ok(Solver::Gibbs),
        "accel" => Ok(Solver::Accel(Semiring::SumProduct)),
        _ => match s.strip_prefix("accel:") {
            Some(rest) => parse_semiring(rest).map(Solver::Accel).ok_or_else(unknown),
            None => parse_semiring(s).map(Solver::Bp).ok_or_else(unknown),
        },
    }
}

/// Everything a command needs, checked before any model is touched.
struct Request {
    solver: Solver,
    schedule: String,
    options: SolveOptions,
    gibbs: GibbsOptions,
    limits: AccelLimits,
    output: Option<PathBuf>,
    seed: u64,
    /// Pass cap for `bench`, which defaults lower than the solvers do.
    bench_iterations: usize,
}

impl Request {
    fn from_flags(g: &Global) -> Result<Self, CliError> {
        let solver = parse_solver(&g.solver)?;
        let defaults = SolveOptions::default();
        let options = SolveOptions {
            iterations: g.iterations.unwrap_or(defaults.iterations),
            epsilon: g.epsilon.unwrap_or(defaults.epsilon),
            k: g.k,
            damping: g.damping.unwrap_or(0.0),
        };
        if options.iterations == 0 {
            return Err(CliError::Usage("--iterations must be at least 1".into()));
        }
        if !(options.epsilon > 0.0 && options.epsilon.is_finite()) {
            return Err(CliError::Usage("--epsilon must be finite and positive".into()));
        }
        if !(0.0..1.0).contains(&options.damping) {
            return Err(CliError::Usage("--damping must lie in [0, 1)".into()));
        }
        if solver == Solver::Gibbs && (g.k.is_some() || g.damping.is_some()) {
            return Err(CliError::Usage("--k and --damping apply to message passing only".into()));
        }
        if matches!(solver, Solver::Accel(_)) && g.k.is_some() {
            return Err(CliError::Usage("the accelerator does not support --k".into()));
        }
        if g.samples == 0 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        let limits = match &g.limits {
            Some(spec) => AccelLimits::default().with_overrides(spec)?,
            None => AccelLimits::default(),
        };
        let schedule = g.schedule.clone();
        if !matches!(schedule.as_str(), "default" | "flooding" | "sequential" | "tree" | "hierarchical")
            && !schedule.starts_with("custom:")
        {
            return Err(CliError::Usage(format!("unknown schedule `{schedule}`")));
        }
        Ok(Self {
            solver,
            schedule,
            options,
            gibbs: GibbsOptions { burn_in: g.burn_in, samples: g.samples, seed: g.seed, ..Default::default() },
            limits,
            output: g.output.clone(),
            seed: g.seed,
            bench_iterations: g.iterations.unwrap_or(bench::DEFAULT_ITERATIONS),
        })
    }

    fn schedule_for(&self, graph: &FactorGraph) -> Result<Schedule, CliError> {
        Ok(match self.schedule.as_str() {
            "default" => Schedule::default_for(graph)?,
            "flooding" => Schedule::flooding(graph)?,
            "sequential" => Schedule::sequential(graph)?,
            "tree" => Schedule::tree(graph)?,
            "hierarchical" => Schedule::hierarchical(graph)?,
            other => {
                let path = PathBuf::from(other.strip_prefix("custom:").expect("checked in from_flags"));
                let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                Schedule::custom_from_json(graph, &text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?
            }
        })
    }

    /// Semiring for the accelerator commands.
    fn accel_semiring(&self) -> Result<Semiring, CliError> {
        match self.solver {
            Solver::Bp(s) | Solver::Accel(s) => Ok(s),
            Solver::Gibbs => Err(CliError::Usage("the accelerator runs message passing, not gibbs".into())),
        }
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.output {
            Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source }),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}

fn load(path: &Path) -> Result<Model, CliError> {
    read_model(path).map_err(|source| CliError::Model { path: path.to_path_buf(), source })
}

/// BP solve that also accepts graphs without edges, whose beliefs are
/// just their inputs.
fn software_solve(graph: &FactorGraph, req: &Request, semiring: Semiring) -> Result<BpSolution, CliError> {
    if graph.edge_count() == 0 {
        let engine = BpEngine::new(graph, semiring, req.options)?;
        return Ok(engine.solution(RunStats { passes: 0, converged: true, deltas: Vec::new() })?);
    }
    let schedule = req.schedule_for(graph)?;
    Ok(fgraph::solve(graph, &schedule, &req.options, semiring)?)
}

fn compile_model(graph: &FactorGraph, req: &Request) -> Result<Program, CliError> {
    let schedule = req.schedule_for(graph)?;
    Ok(compile(graph, &schedule, &req.limits, req.accel_semiring()?, &req.options)?)
}

fn run(path: &Path, req: &Request) -> Result<(), CliError> {
    let model = load(path)?;
    let graph = &model.graph;
    let mut out = Map::new();
    out.insert("solver".into(), json!(solver_name(req.solver)));
    if graph.variable_count() > 0 {
        match req.solver {
            Solver::Bp(semiring) => {
                let s = software_solve(graph, req, semiring)?;
                output::bp_solution(&mut out, graph, &s);
            }
            Solver::Accel(_) => {
                let sim = simulate(&compile_model(graph, req)?, graph, &req.limits)?;
                output::bp_solution(&mut out, graph, &sim.solution);
                out.insert("cycles".into(), json!(sim.report.total_cycles));
            }
            Solver::Gibbs => {
                let r = fgraph::run_gibbs(graph, &req.gibbs)?;
                out.insert("beliefs".into(), output::beliefs(graph, &r.beliefs));
                out.insert("sample".into(), output::assignment(graph, &r.sample));
                out.insert("samples".into(), json!(r.samples));
            }
        }
    }
    if !model.streams.is_empty() {
        let Solver::Bp(semiring) = req.solver else {
            return Err(CliError::Usage("streams run with the message-passing solvers only".into()));
        };
        let mut streams = Map::new();
        for (i, spec) in model.streams.iter().enumerate() {
            streams.insert(spec.name.clone(), Value::Array(run_stream(&model, i, semiring, req.options)?));
        }
        out.insert("streams".into(), Value::Object(streams));
    }
    req.emit(&output::pretty(&Value::Object(out)))
}

/// Solve, read the first variable, advance; until the data runs out.
fn run_stream(model: &Model, index: usize, semiring: Semiring, options: SolveOptions) -> Result<Vec<Value>, CliError> {
    let mut s = model.stream(index)?;
    s.set_solver(semiring, options);
    let mut out = Vec::new();
    loop {
        s.solve(false)?;
        out.push(json!(s.first_var_belief().expect("solved window")));
        if !s.has_next() {
            return Ok(out);
        }
        s.advance()?;
    }
}

fn solver_name(s: Solver) -> String {
    match s {
        Solver::Bp(x) => x.name().to_string(),
        Solver::Gibbs => "gibbs".to_string(),
        Solver::Accel(x) => format!("accel:{}", x.name()),
    }
}

fn same_bits(a: &BpSolution, b: &BpSolution) -> bool {
    let bits = |s: &BpSolution| -> Vec<Vec<u64>> { s.beliefs.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect() };
    bits(a) == bits(b) && a.assignment == b.assignment
}

fn profile_text(sim: &Simulation, format: Format) -> String {
    match format {
        Format::Text => fgraph_accel::profile::to_text(&sim.report),
        Format::Json => output::pretty(&fgraph_accel::profile::to_json(&sim.report)),
    }
}

fn compile_cmd(path: &Path, req: &Request, check: bool, format: Format) -> Result<(), CliError> {
    let model = load(path)?;
    let graph = &model.graph;
    let program = compile_model(graph, req)?;
    let gp5 = req.output.clone().unwrap_or_else(|| {
        PathBuf::from(path.file_stem().unwrap_or_default()).with_extension("gp5")
    });
    let listing = gp5.with_extension("json");
    let write = |p: &Path, bytes: &[u8]| std::fs::write(p, bytes).map_err(|source| CliError::Io { path: p.to_path_buf(), source });
    write(&gp5, &program.encode())?;
    write(&listing, output::pretty(&program.disassemble()).as_bytes())?;
    println!("wrote {} ({} instructions) and {}", gp5.display(), program.instruction_count(), listing.display());
    let sim = simulate(&program, graph, &req.limits)?;
    println!("{}", profile_text(&sim, format));
    if check {
        let sw = software_solve(graph, req, req.accel_semiring()?)?;
        if same_bits(&sw, &sim.solution) {
            println!("PASS: simulated beliefs equal the software solver bit for bit");
        } else {
            let worst = max_diff(&sw.beliefs, &sim.solution.beliefs);
            println!("FAIL: simulated beliefs differ from the software solver (max |diff| {worst:e})");
            return Err(CliError::Failed("differential check failed".into()));
        }
    }
    Ok(())
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

fn simulate_cmd(path: &Path, program: Option<&Path>, req: &Request) -> Result<(), CliError> {
    let model = load(path)?;
    let graph = &model.graph;
    let program = match program {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?;
            Program::decode(&bytes)?
        }
        None => compile_model(graph, req)?,
    };
    let sim = simulate(&program, graph, &req.limits)?;
    let mut out = Map::new();
    out.insert("solver".into(), json!(format!("accel:{}", program.semiring.name())));
    output::bp_solution(&mut out, graph, &sim.solution);
    out.insert("cycles".into(), json!(sim.report.total_cycles));
    out.insert("seconds".into(), json!(sim.report.seconds(&req.limits)));
    req.emit(&output::pretty(&Value::Object(out)))
}

fn profile_cmd(path: &Path, req: &Request, format: Format) -> Result<(), CliError> {
    let model = load(path)?;
    let sim = simulate(&compile_model(&model.graph, req)?, &model.graph, &req.limits)?;
    req.emit(&profile_text(&sim, format))
}

fn validate(path: &Path, req: &Request) -> Result<(), CliError> {
    let model = load(path)?;
    let text = model.to_string_pretty();
    let again = fgraph::parse_model(&text, path.parent())
        .map_err(|e| CliError::Failed(format!("serialized model does not parse: {e}")))?;
    if again.to_json() != model.to_json() {
        return Err(CliError::Failed("model changes on a serialize/parse round trip".into()));
    }
    let g = &model.graph;
    req.emit(&format!(
        "ok: {} variables, {} factors, {} tables, {} nested, {} streams; round trip is exact",
        g.variable_count(),
        g.factor_count(),
        g.tables().len(),
        g.nested().len(),
        model.streams.len()
    ))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let req = Request::from_flags(&cli.global)?;
    match &cli.command {
        Command::Run { model } => run(model, &req),
        Command::Compile { model, simulate, profile } => compile_cmd(model, &req, *simulate, *profile),
        Command::Simulate { model, program } => simulate_cmd(model, program.as_deref(), &req),
        Command::Profile { model, profile } => profile_cmd(model, &req, *profile),
        Command::Bench { suite, json } => bench::run(*suite, &req, *json),
        Command::Validate { model } => validate(model, &req),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Accel(AccelError::Constraints(v)) => {
                    eprintln!("error: graph exceeds accelerator limits");
                    for x in v {
                        eprintln!("  {x}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
