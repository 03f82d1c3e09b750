//! Synthetic models used by benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::DiscreteDomain;
use crate::graph::{FactorGraph, VarId};
use crate::table::FactorTable;

/// The 3×6 parity-check matrix of the toy LDPC code.
pub fn ldpc_toy_matrix() -> Vec<Vec<u8>> {
    vec![
        vec![1, 1, 1, 0, 0, 0],
        vec![1, 0, 1, 0, 1, 0],
        vec![0, 0, 1, 1, 0, 1],
    ]
}

/// Sparse table over `n` bits with weight 1 on even-parity configurations.
pub fn parity_table(n: usize) -> FactorTable {
    let mut indices = Vec::new();
    for bits in 0..1usize << n {
        if bits.count_ones() % 2 == 0 {
            indices.push((0..n).map(|k| (bits >> (n - 1 - k)) & 1).collect());
        }
    }
    let weights = vec![1.0; indices.len()];
    FactorTable::sparse(vec![2; n], &indices, &weights).expect("valid parity table")
}

/// One bit per column of `h` and one parity factor per row. `p_one[i]` is
/// the channel probability that bit `i` is 1.
pub fn ldpc(h: &[Vec<u8>], p_one: &[f64]) -> (FactorGraph, Vec<VarId>) {
    let mut g = FactorGraph::new();
    let bits: Vec<VarId> = (0..p_one.len())
        .map(|i| g.add_named_variable(&format!("x{i}"), &DiscreteDomain::bit()).expect("fresh name"))
        .collect();
    for row in h {
        let vars: Vec<VarId> = row.iter().enumerate().filter(|(_, &m)| m != 0).map(|(i, _)| bits[i]).collect();
        g.add_factor(parity_table(vars.len()), &vars).expect("parity factor");
    }
    for (&b, &p) in bits.iter().zip(p_one) {
        g.set_input(b, &[1.0 - p, p]).expect("valid prior");
    }
    (g, bits)
}

/// All codewords of the code with parity-check matrix `h`, by enumeration.
pub fn codewords(h: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = h[0].len();
    (0..1usize << n)
        .map(|bits| (0..n).map(|k| ((bits >> k) & 1) as u8).collect::<Vec<u8>>())
        .filter(|w| h.iter().all(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<u8>() % 2 == 0))
        .collect()
}

/// Binary denoising on a `size`×`size` image with one degree-16 factor per
/// 4×4 patch (stride 2). All patches share one dense smoothness table with
/// weight `exp(-0.5·d)`, `d` the number of disagreeing 4-neighbour pairs in
/// the patch. Inputs come from a two-region image with 10% of pixels flipped.
pub fn denoise(size: usize, seed: u64) -> FactorGraph {
    assert!(size >= 4, "image must hold at least one patch");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = FactorGraph::new();
    let px = g
        .add_variables(&DiscreteDomain::bit(), &[size, size])
        .expect("nonzero shape");
    for r in 0..size {
        for c in 0..size {
            let clean = (c >= size / 2) as usize;
            let observed = if rng.gen::<f64>() < 0.1 { 1 - clean } else { clean };
            let input = if observed == 1 { [0.2, 0.8] } else { [0.8, 0.2] };
            g.set_input(px.get(&[r, c]), &input).expect("valid input");
        }
    }
    let table = patch_table();
    let id = g.intern_table(table);
    let mut r = 0;
    while r + 4 <= size {
        let mut c = 0;
        while c + 4 <= size {
            let vars: Vec<VarId> = (0..16).map(|k| px.get(&[r + k / 4, c + k % 4])).collect();
            g.add_factor_with_table(id, &vars).expect("patch factor");
            c += 2;
        }
        r += 2;
    }
    g
}

fn patch_table() -> FactorTable {
    let mut w = Vec::with_capacity(1 << 16);
    for bits in 0..1usize << 16 {
        let at = |k: usize| (bits >> (15 - k)) & 1;
        let mut d = 0;
        for k in 0..16 {
            let (i, j) = (k / 4, k % 4);
            if j < 3 && at(k) != at(k + 1) {
                d += 1;
            }
            if i < 3 && at(k) != at(k + 4) {
                d += 1;
            }
        }
        w.push((-0.5 * d as f64).exp());
    }
    FactorTable::dense(vec![2; 16], w).expect("positive weights")
}

/// Stereo-style grid: `disparities`-valued pixels, a shared truncated-linear
/// smoothness table on 4-neighbour pairs, random unary costs.
pub fn stereo_toy(width: usize, height: usize, disparities: usize, seed: u64) -> FactorGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = FactorGraph::new();
    let domain = DiscreteDomain::range(0, disparities as i64 - 1).expect("nonempty");
    let px = g.add_variables(&domain, &[height, width]).expect("nonzero shape");
    let smooth = FactorTable::from_fn(&[&domain, &domain], |x| (-0.5 * (x[0] - x[1]).abs().min(4.0)).exp())
        .expect("positive weights");
    let id = g.intern_table(smooth);
    for r in 0..height {
        for c in 0..width {
            let input: Vec<f64> = (0..disparities).map(|_| (-4.0 * rng.gen::<f64>()).exp()).collect();
            g.set_input(px.get(&[r, c]), &input).expect("valid input");
            if c + 1 < width {
                g.add_factor_with_table(id, &[px.get(&[r, c]), px.get(&[r, c + 1])]).expect("pair");
            }
            if r + 1 < height {
                g.add_factor_with_table(id, &[px.get(&[r, c]), px.get(&[r + 1, c])]).expect("pair");
            }
        }
    }
    g
}

/// Loopy `rows`×`cols` grid with random positive pairwise tables and inputs.
pub fn grid(rows: usize, cols: usize, d: usize, seed: u64) -> FactorGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = FactorGraph::new();
    let domain = DiscreteDomain::range(0, d as i64 - 1).expect("nonempty");
    let v = g.add_variables(&domain, &[rows, cols]).expect("nonzero shape");
    let pair = |g: &mut FactorGraph, a: VarId, b: VarId, rng: &mut ChaCha8Rng| {
        let w: Vec<f64> = (0..d * d).map(|_| 0.1 + rng.gen::<f64>()).collect();
        g.add_factor(FactorTable::dense(vec![d, d], w).expect("positive"), &[a, b]).expect("pair");
    };
    for r in 0..rows {
        for c in 0..cols {
            let input: Vec<f64> = (0..d).map(|_| 0.1 + rng.gen::<f64>()).collect();
            g.set_input(v.get(&[r, c]), &input).expect("valid input");
            if c + 1 < cols {
                pair(&mut g, v.get(&[r, c]), v.get(&[r, c + 1]), &mut rng);
            }
            if r + 1 < rows {
                pair(&mut g, v.get(&[r, c]), v.get(&[r + 1, c]), &mut rng);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_code_has_eight_codewords() {
        let words = codewords(&ldpc_toy_matrix());
        assert_eq!(words.len(), 8);
        assert!(words.contains(&vec![0; 6]));
    }

    #[test]
    fn parity_table_shape() {
        let t = parity_table(3);
        assert_eq!(t.entry_count(), 4);
        assert_eq!(t.weight_at(&[1, 1, 0]), 1.0);
        assert_eq!(t.weight_at(&[1, 0, 0]), 0.0);
    }

    #[test]
    fn denoise_shape() {
        let g = denoise(8, 1);
        assert_eq!(g.variable_count(), 64);
        assert_eq!(g.factor_count(), 9);
        assert_eq!(g.tables().len(), 1);
        assert!(g.factors().all(|(_, f)| f.degree() == 16));
    }

    #[test]
    fn stereo_shares_table() {
        let g = stereo_toy(4, 3, 16, 2);
        assert_eq!(g.factor_count(), 3 * 3 + 2 * 4);
        assert_eq!(g.tables().len(), 1);
    }
}
