//! Benchmark suites: software wall time against simulated cycles.

use std::time::Instant;

use clap::ValueEnum;
use fgraph::bp::SolveOptions;
use fgraph::{synth, FactorGraph, Schedule, Semiring};
use fgraph_accel::{compile, simulate};
use serde_json::{json, Value};

use crate::{CliError, Request, Solver};

pub const DEFAULT_ITERATIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Denoise,
    StereoToy,
    Ldpc,
    Grid,
}

struct Case {
    label: String,
    graph: FactorGraph,
}

/// Model sizes per suite. Kept small so a whole suite finishes in seconds.
fn cases(suite: Suite, seed: u64) -> Vec<Case> {
    let case = |label: String, graph| Case { label, graph };
    match suite {
        Suite::Denoise => [4, 6, 8]
            .into_iter()
            .map(|n| case(format!("{n}x{n} image"), synth::denoise(n, seed)))
            .collect(),
        Suite::StereoToy => [(8, 8, 16), (16, 16, 16), (16, 16, 32)]
            .into_iter()
            .map(|(w, h, d)| case(format!("{w}x{h}, {d} disparities"), synth::stereo_toy(w, h, d, seed)))
            .collect(),
        Suite::Ldpc => [6, 24, 96]
            .into_iter()
            .map(|n| {
                let h = if n == 6 { synth::ldpc_toy_matrix() } else { ring_code(n) };
                let p: Vec<f64> = (0..n).map(|i| if (i as u64 + seed) % 7 == 3 { 0.8 } else { 0.1 }).collect();
                case(format!("n={n}"), synth::ldpc(&h, &p).0)
            })
            .collect(),
        Suite::Grid => [(10, 4), (20, 8), (30, 16)]
            .into_iter()
            .map(|(n, d)| case(format!("{n}x{n}, d={d}"), synth::grid(n, n, d, seed)))
            .collect(),
    }
}

/// Rate-1/2 parity-check matrix: check `i` covers bits `2i`, `2i+1` and
/// `2i+5` (mod n).
fn ring_code(n: usize) -> Vec<Vec<u8>> {
    (0..n / 2)
        .map(|i| {
            let mut row = vec![0u8; n];
            for b in [2 * i, 2 * i + 1, 2 * i + 5] {
                row[b % n] = 1;
            }
            row
        })
        .collect()
}

pub fn run(suite: Suite, req: &Request, as_json: bool) -> Result<(), CliError> {
    let semiring = match req.solver {
        Solver::Bp(s) | Solver::Accel(s) => s,
        Solver::Gibbs => Semiring::SumProduct,
    };
    let options = SolveOptions { iterations: req.bench_iterations, k: None, damping: 0.0, ..req.options };
    let mut rows = Vec::new();
    for c in cases(suite, req.seed) {
        let schedule = Schedule::flooding(&c.graph)?;
        let start = Instant::now();
        fgraph::solve(&c.graph, &schedule, &options, semiring)?;
        let software = start.elapsed().as_secs_f64();
        let program = compile(&c.graph, &schedule, &req.limits, semiring, &options)?;
        let report = simulate(&program, &c.graph, &req.limits)?.report;
        let accel = report.seconds(&req.limits);
        rows.push(json!({
            "size": c.label,
            "variables": c.graph.variable_count(),
            "factors": c.graph.factor_count(),
            "software_seconds": software,
            "cycles": report.total_cycles,
            "compute_cycles": report.compute_cycles,
            "io_cycles": report.io_cycles,
            "compute_to_io": report.compute_to_io(),
            "accel_seconds": accel,
            "speedup": software / accel,
        }));
    }
    let text = if as_json {
        crate::output::pretty(&json!({ "suite": suite_name(suite), "iterations": options.iterations, "rows": rows }))
    } else {
        table(suite, &rows)
    };
    req.emit(&text)
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Denoise => "denoise",
        Suite::StereoToy => "stereo-toy",
        Suite::Ldpc => "ldpc",
        Suite::Grid => "grid",
    }
}

fn table(suite: Suite, rows: &[Value]) -> String {
    let mut out = format!(
        "suite {}\n{:<24} {:>6} {:>7} {:>12} {:>14} {:>11} {:>10}\n",
        suite_name(suite),
        "size",
        "vars",
        "factors",
        "software ms",
        "cycles",
        "compute/io",
        "speedup"
    );
    for r in rows {
        out += &format!(
            "{:<24} {:>6} {:>7} {:>12.3} {:>14} {:>11.2} {:>10.2}\n",
            r["size"].as_str().unwrap_or(""),
            r["variables"].as_u64().unwrap_or(0),
            r["factors"].as_u64().unwrap_or(0),
            r["software_seconds"].as_f64().unwrap_or(0.0) * 1e3,
            r["cycles"].as_u64().unwrap_or(0),
            r["compute_to_io"].as_f64().unwrap_or(0.0),
            r["speedup"].as_f64().unwrap_or(0.0),
        );
    }
    out.pop();
    out
}
