//! Message-update kernel shared by every message-passing backend.
//!
//! The software solvers and the accelerator simulator both call these
//! functions with identical argument order, so their floating-point results
//! agree bit for bit. Factor updates accumulate over an entry range, letting
//! callers split a table into chunks without changing the operation order.

use std::ops::Range;

use crate::table::{FactorTable, StorageKind};

/// Stand-in for `-ln(0)` in the negative-log domain. Sums saturate here
/// instead of overflowing to infinity.
pub const SATURATED_COST: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Semiring {
    /// Linear-domain weights, (+, ×).
    SumProduct,
    /// Negative-log costs, (min, +).
    MinSum,
    /// Linear-domain weights, (max, ×).
    MaxProduct,
}

impl Semiring {
    pub fn name(self) -> &'static str {
        match self {
            Semiring::SumProduct => "sum-product",
            Semiring::MinSum => "min-sum",
            Semiring::MaxProduct => "max-product",
        }
    }

    pub fn is_cost_domain(self) -> bool {
        self == Semiring::MinSum
    }

    /// Accumulator start value for a factor update.
    pub fn zero(self) -> f64 {
        match self {
            Semiring::MinSum => SATURATED_COST,
            _ => 0.0,
        }
    }

    /// Neutral element of the product.
    pub fn one(self) -> f64 {
        match self {
            Semiring::MinSum => 0.0,
            _ => 1.0,
        }
    }

    /// Value of a uniform normalized message over `d` states.
    pub fn uniform(self, d: usize) -> f64 {
        match self {
            Semiring::MinSum => 0.0,
            _ => 1.0 / d as f64,
        }
    }

    /// Converts a linear weight into this semiring's representation.
    pub fn encode(self, w: f64) -> f64 {
        match self {
            Semiring::MinSum => weight_to_cost(w),
            _ => w,
        }
    }
}

pub fn weight_to_cost(w: f64) -> f64 {
    if w > 0.0 {
        (-w.ln()).min(SATURATED_COST)
    } else {
        SATURATED_COST
    }
}

#[inline]
fn sat_add(a: f64, b: f64) -> f64 {
    if a >= SATURATED_COST || b >= SATURATED_COST {
        SATURATED_COST
    } else {
        (a + b).min(SATURATED_COST)
    }
}

/// Accumulates the contribution of `entries` of `table` to the outgoing
/// message at position `target`. `incoming[p]` is the message from position
/// `p` (the slot at `target` is ignored). `acc` must start at
/// [`Semiring::zero`] before the first range.
pub fn factor_accumulate(
    table: &FactorTable,
    semiring: Semiring,
    target: usize,
    incoming: &[&[f64]],
    entries: Range<usize>,
    acc: &mut [f64],
) {
    match semiring {
        Semiring::SumProduct | Semiring::MaxProduct => {
            let weights = table.weights();
            let sum = semiring == Semiring::SumProduct;
            for_each_entry(table, entries, |e, idx| {
                let mut term = weights[e];
                for (p, &i) in idx.iter().enumerate() {
                    if term == 0.0 {
                        break;
                    }
                    if p == target {
                        continue;
                    }
                    term *= incoming[p][i];
                }
                let slot = &mut acc[idx[target]];
                if sum {
                    *slot += term;
                } else if term > *slot {
                    *slot = term;
                }
            });
        }
        Semiring::MinSum => {
            let costs = table.costs();
            for_each_entry(table, entries, |e, idx| {
                let mut term = costs[e];
                for (p, &i) in idx.iter().enumerate() {
                    if term >= SATURATED_COST {
                        break;
                    }
                    if p == target {
                        continue;
                    }
                    term = sat_add(term, incoming[p][i]);
                }
                let slot = &mut acc[idx[target]];
                if term < *slot {
                    *slot = term;
                }
            });
        }
    }
}

/// Visits stored entries in order with their index tuples. Dense tables
/// step the tuple like an odometer instead of decoding each offset.
#[inline]
fn for_each_entry(table: &FactorTable, entries: Range<usize>, mut visit: impl FnMut(usize, &[usize])) {
    if entries.is_empty() {
        return;
    }
    let dims = table.dims();
    let mut idx = table.decode(table.offset(entries.start));
    match table.kind() {
        StorageKind::Dense => {
            for e in entries {
                visit(e, &idx);
                for d in (0..dims.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < dims[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
        StorageKind::Sparse => {
            for e in entries {
                let flat = table.offset(e);
                for (d, i) in idx.iter_mut().enumerate() {
                    *i = table.coord(flat, d);
                }
                visit(e, &idx);
            }
        }
    }
}

/// Pointwise product of a variable's input (already in semiring encoding)
/// with incoming messages, in the given order.
pub fn variable_product(semiring: Semiring, input: &[f64], incoming: &[&[f64]], out: &mut [f64]) {
    out.copy_from_slice(input);
    for m in incoming {
        for (o, &v) in out.iter_mut().zip(m.iter()) {
            *o = match semiring {
                Semiring::MinSum => sat_add(*o, v),
                _ => *o * v,
            };
        }
    }
}

/// Error marker: a message or belief has no support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoSupport;

/// Normalizes in place: sum to one for linear semirings, minimum zero for
/// min-sum (saturated entries stay saturated).
pub fn normalize_message(semiring: Semiring, msg: &mut [f64]) -> Result<(), NoSupport> {
    match semiring {
        Semiring::MinSum => {
            let min = msg.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min < SATURATED_COST) {
                return Err(NoSupport);
            }
            for v in msg.iter_mut() {
                *v = if *v >= SATURATED_COST { SATURATED_COST } else { *v - min };
            }
        }
        _ => {
            let sum: f64 = msg.iter().sum();
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(NoSupport);
            }
            for v in msg.iter_mut() {
                *v /= sum;
            }
        }
    }
    Ok(())
}

/// Keeps the `k` best entries of `msg` (largest weights, or smallest costs
/// for min-sum; ties go to the lowest index) and resets the rest to the
/// semiring zero.
pub fn truncate_k_best(semiring: Semiring, msg: &mut [f64], k: usize) {
    if k >= msg.len() {
        return;
    }
    let mut order: Vec<usize> = (0..msg.len()).collect();
    if semiring == Semiring::MinSum {
        order.sort_by(|&a, &b| msg[a].total_cmp(&msg[b]).then(a.cmp(&b)));
    } else {
        order.sort_by(|&a, &b| msg[b].total_cmp(&msg[a]).then(a.cmp(&b)));
    }
    for &i in &order[k..] {
        msg[i] = semiring.zero();
    }
}

/// Converts a normalized min-sum cost vector into probabilities.
pub fn costs_to_probabilities(costs: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = costs
        .iter()
        .map(|&c| if c >= SATURATED_COST { 0.0 } else { (-c).exp() })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Index of the best entry, lowest index on ties.
pub fn best_index(semiring: Semiring, values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let better = if semiring == Semiring::MinSum {
            v < values[best]
        } else {
            v > values[best]
        };
        if better {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_accumulation_matches_full_range() {
        let t = FactorTable::dense(vec![3, 4], (1..=12).map(|x| x as f64 * 0.37).collect()).unwrap();
        let m0 = [0.2, 0.5, 0.3];
        let m1 = [0.1, 0.2, 0.3, 0.4];
        let incoming: [&[f64]; 2] = [&m0, &m1];
        for semiring in [Semiring::SumProduct, Semiring::MinSum, Semiring::MaxProduct] {
            let mut full = vec![semiring.zero(); 4];
            factor_accumulate(&t, semiring, 1, &incoming, 0..12, &mut full);
            let mut chunked = vec![semiring.zero(); 4];
            for r in [0..5, 5..7, 7..12] {
                factor_accumulate(&t, semiring, 1, &incoming, r, &mut chunked);
            }
            assert_eq!(full, chunked);
        }
    }

    #[test]
    fn min_sum_normalization_keeps_saturation() {
        let mut m = vec![3.0, SATURATED_COST, 1.0];
        normalize_message(Semiring::MinSum, &mut m).unwrap();
        assert_eq!(m, vec![2.0, SATURATED_COST, 0.0]);
        let mut dead = vec![SATURATED_COST; 2];
        assert_eq!(normalize_message(Semiring::MinSum, &mut dead), Err(NoSupport));
        let mut zero = vec![0.0; 2];
        assert_eq!(normalize_message(Semiring::SumProduct, &mut zero), Err(NoSupport));
    }

    #[test]
    fn k_best_ties_prefer_low_index() {
        let mut m = vec![0.25, 0.25, 0.25, 0.25];
        truncate_k_best(Semiring::SumProduct, &mut m, 2);
        assert_eq!(m, vec![0.25, 0.25, 0.0, 0.0]);
        let mut c = vec![1.0, 0.0, 0.0, 2.0];
        truncate_k_best(Semiring::MinSum, &mut c, 1);
        assert_eq!(c, vec![SATURATED_COST, 0.0, SATURATED_COST, SATURATED_COST]);
    }
}
