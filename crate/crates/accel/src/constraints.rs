//! Static checks of a graph against [`AccelLimits`].

use std::fmt;

use fgraph::{FactorGraph, FactorId, FactorTable, VarId};
use serde::Serialize;

use crate::limits::AccelLimits;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    FactorDegree { factor: usize, degree: usize, limit: usize },
    VariableDegree { variable: usize, degree: usize, limit: usize },
    Domain { variable: usize, size: usize, limit: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FactorDegree { factor, degree, limit } => {
                write!(f, "factor {factor} has degree {degree} (limit {limit})")
            }
            Violation::VariableDegree { variable, degree, limit } => {
                write!(f, "variable {variable} connects to {degree} factors (limit {limit})")
            }
            Violation::Domain { variable, size, limit } => {
                write!(f, "variable {variable} has domain size {size} (limit {limit})")
            }
        }
    }
}

/// Lists every factor and variable that exceeds a limit. Variable degrees
/// count the factors of the flattened graph, nested instances included.
pub fn check_constraints(graph: &FactorGraph, limits: &AccelLimits) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (FactorId(id), f) in graph.factors() {
        if f.degree() > limits.max_factor_degree {
            out.push(Violation::FactorDegree { factor: id, degree: f.degree(), limit: limits.max_factor_degree });
        }
    }
    let mut var_degree = vec![0usize; graph.variable_count()];
    for (_, f) in graph.factors() {
        for &VarId(v) in f.vars() {
            var_degree[v] += 1;
        }
    }
    for (v, var) in graph.variables().iter().enumerate() {
        if var.size() > limits.max_domain {
            out.push(Violation::Domain { variable: v, size: var.size(), limit: limits.max_domain });
        }
        if var_degree[v] > limits.max_variable_degree {
            out.push(Violation::VariableDegree {
                variable: v,
                degree: var_degree[v],
                limit: limits.max_variable_degree,
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Multiply-accumulate count of one full update of a factor: `n·d^n` for a
/// dense table, `n·entries` for a sparse one.
pub fn estimate_factor_cost(table: &FactorTable) -> u64 {
    (table.degree() * table.entry_count()) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_formula() {
        let t = FactorTable::dense(vec![10, 10], vec![1.0; 100]).unwrap();
        assert_eq!(estimate_factor_cost(&t), 200);
        let t = FactorTable::dense(vec![2; 16], vec![1.0; 1 << 16]).unwrap();
        assert_eq!(estimate_factor_cost(&t), 1_048_576);
        let eq: Vec<Vec<usize>> = (0..4).map(|i| vec![i, i]).collect();
        let t = FactorTable::sparse(vec![4, 4], &eq, &[1.0; 4]).unwrap();
        assert_eq!(estimate_factor_cost(&t), 8);
    }
}
