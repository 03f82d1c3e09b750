//! Instruction-level profile renderings of a [`CycleReport`].

use std::fmt::Write;

use serde_json::{json, Value};

use crate::isa::Opcode;
use crate::simulate::CycleReport;

pub const TOP_FACTORS: usize = 10;

/// The costliest factors, most expensive first (lowest id on ties).
pub fn top_factors(report: &CycleReport, n: usize) -> Vec<(usize, u64)> {
    let mut v: Vec<(usize, u64)> = report.factor_cycles.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(n);
    v
}

fn share(part: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * part as f64 / total as f64
    }
}

pub fn to_json(report: &CycleReport) -> Value {
    let opcodes: serde_json::Map<String, Value> = Opcode::ALL
        .iter()
        .map(|&op| {
            let s = report.opcode(op);
            (op.mnemonic().to_string(), json!({"count": s.count, "cycles": s.cycles}))
        })
        .collect();
    json!({
        "total_cycles": report.total_cycles,
        "compute_cycles": report.compute_cycles,
        "io_cycles": report.io_cycles,
        "compute_to_io": if report.io_cycles == 0 { Value::Null } else { json!(report.compute_to_io()) },
        "passes": report.passes,
        "opcodes": opcodes,
        "tip_factor_cycles": report.tip_factor_cycles,
        "tip_variable_cycles": report.tip_variable_cycles,
        "readout_cycles": report.readout_cycles,
        "top_factors": top_factors(report, TOP_FACTORS)
            .into_iter()
            .map(|(f, c)| json!({"factor": f, "cycles": c}))
            .collect::<Vec<_>>(),
        "cache": {
            "capacity_bytes": report.cache_capacity,
            "loads": report.cache.loads,
            "hits": report.cache.hits,
            "evictions": report.cache.evictions,
            "compactions": report.cache.compactions,
            "peak_resident_bytes": report.cache.peak_resident_bytes,
        },
    })
}

pub fn to_text(report: &CycleReport) -> String {
    let mut s = String::new();
    let total = report.total_cycles;
    writeln!(s, "{:<8}{:>12}{:>16}{:>8}", "opcode", "count", "cycles", "%").unwrap();
    for op in Opcode::ALL {
        let o = report.opcode(op);
        writeln!(s, "{:<8}{:>12}{:>16}{:>7.2}%", op.mnemonic(), o.count, o.cycles, share(o.cycles, total)).unwrap();
    }
    writeln!(s, "{:<8}{:>12}{:>16}", "total", "", total).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "compute {:>16} cycles  ({:.2}%)", report.compute_cycles, share(report.compute_cycles, total)).unwrap();
    writeln!(s, "io      {:>16} cycles  ({:.2}%)", report.io_cycles, share(report.io_cycles, total)).unwrap();
    if report.io_cycles > 0 {
        writeln!(s, "compute/io {:.4}", report.compute_to_io()).unwrap();
    }
    writeln!(s, "passes  {}", report.passes).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "top factors").unwrap();
    for (f, c) in top_factors(report, TOP_FACTORS) {
        writeln!(s, "  factor {:<8}{:>16} cycles  ({:.2}%)", f, c, share(c, total)).unwrap();
    }
    writeln!(s).unwrap();
    let c = &report.cache;
    writeln!(s, "table cache {} bytes, peak {} resident", report.cache_capacity, c.peak_resident_bytes).unwrap();
    writeln!(s, "  loads {}  hits {}  evictions {}  compactions {}", c.loads, c.hits, c.evictions, c.compactions).unwrap();
    s
}
