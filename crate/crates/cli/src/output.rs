//! JSON shapes printed by the commands. Variables are keyed by name.

use fgraph::{BpSolution, FactorGraph};
use serde_json::{json, Map, Value};

pub fn beliefs(graph: &FactorGraph, beliefs: &[Vec<f64>]) -> Value {
    let mut m = Map::new();
    for (v, b) in graph.variables().iter().zip(beliefs) {
        m.insert(v.name().to_string(), json!(b));
    }
    Value::Object(m)
}

/// Value indices rendered as domain values.
pub fn assignment(graph: &FactorGraph, idx: &[usize]) -> Value {
    let mut m = Map::new();
    for (v, &i) in graph.variables().iter().zip(idx) {
        m.insert(v.name().to_string(), json!(v.domain().value(i)));
    }
    Value::Object(m)
}

pub fn bp_solution(out: &mut Map<String, Value>, graph: &FactorGraph, s: &BpSolution) {
    out.insert("beliefs".into(), beliefs(graph, &s.beliefs));
    if let Some(a) = &s.assignment {
        out.insert("assignment".into(), assignment(graph, a));
    }
    out.insert("passes".into(), json!(s.stats.passes));
    out.insert("converged".into(), json!(s.stats.converged));
}

pub fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}
