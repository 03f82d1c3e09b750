//! N-dimensional arrays of variable ids for vectorized graph construction.

use std::ops::Range;

use crate::error::ModelError;
use crate::graph::VarId;

/// Row-major array of variable ids. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarArray {
    shape: Vec<usize>,
    ids: Vec<VarId>,
}

impl VarArray {
    pub fn new(shape: Vec<usize>, ids: Vec<VarId>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), ids.len(), "shape/len mismatch");
        Self { shape, ids }
    }

    /// One-dimensional array.
    pub fn from_ids(ids: Vec<VarId>) -> Self {
        Self {
            shape: vec![ids.len()],
            ids,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[VarId] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = VarId> + '_ {
        self.ids.iter().copied()
    }

    /// Element at flat (row-major) position `i`.
    pub fn at(&self, i: usize) -> VarId {
        self.ids[i]
    }

    pub fn get(&self, index: &[usize]) -> VarId {
        self.ids[self.flat(index)]
    }

    fn flat(&self, index: &[usize]) -> usize {
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            assert!(i < d, "index {index:?} out of bounds for {:?}", self.shape);
            flat = flat * d + i;
        }
        flat
    }

    /// Keeps `range` along `axis`.
    pub fn slice(&self, axis: usize, range: Range<usize>) -> VarArray {
        let picks: Vec<usize> = range.collect();
        self.select(axis, &picks)
    }

    /// Keeps the listed positions along `axis`, in the given order.
    pub fn select(&self, axis: usize, picks: &[usize]) -> VarArray {
        let mut shape = self.shape.clone();
        shape[axis] = picks.len();
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut ids = Vec::with_capacity(outer * picks.len() * inner);
        for o in 0..outer {
            for &p in picks {
                let base = (o * self.shape[axis] + p) * inner;
                ids.extend_from_slice(&self.ids[base..base + inner]);
            }
        }
        VarArray { shape, ids }
    }

    /// Column `j` of a 2-D array, kept as an `n×1` array.
    pub fn column(&self, j: usize) -> VarArray {
        self.select(1, &[j])
    }

    pub fn row(&self, i: usize) -> VarArray {
        self.select(0, &[i])
    }

    /// Swaps the two axes of a 2-D array (a 1-D array becomes `1×n`).
    pub fn transpose(&self) -> VarArray {
        match self.shape.as_slice() {
            [n] => VarArray {
                shape: vec![1, *n],
                ids: self.ids.clone(),
            },
            [r, c] => {
                let mut ids = Vec::with_capacity(self.ids.len());
                for j in 0..*c {
                    for i in 0..*r {
                        ids.push(self.ids[i * c + j]);
                    }
                }
                VarArray { shape: vec![*c, *r], ids }
            }
            _ => panic!("transpose needs a 1-D or 2-D array"),
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> VarArray {
        VarArray::new(shape.to_vec(), self.ids.clone())
    }

    /// Repeats the array `reps[k]` times along axis `k` (trailing axes of
    /// size one are added as needed).
    pub fn tile(&self, reps: &[usize]) -> VarArray {
        let rank = reps.len().max(self.shape.len());
        let mut shape = self.shape.clone();
        shape.resize(rank, 1);
        let mut reps = reps.to_vec();
        reps.resize(rank, 1);
        let out_shape: Vec<usize> = shape.iter().zip(&reps).map(|(s, r)| s * r).collect();
        let count: usize = out_shape.iter().product();
        let src = VarArray::new(shape.clone(), self.ids.clone());
        let mut ids = Vec::with_capacity(count);
        let mut idx = vec![0; rank];
        for flat in 0..count {
            unflatten(&out_shape, flat, &mut idx);
            for (i, s) in idx.iter_mut().zip(&shape) {
                *i %= s;
            }
            ids.push(src.get(&idx));
        }
        VarArray { shape: out_shape, ids }
    }

    /// Numpy-style broadcast of all argument shapes (aligned at the trailing
    /// axis; size-one axes stretch).
    pub fn broadcast_shape(args: &[VarArray]) -> Result<Vec<usize>, ModelError> {
        let rank = args.iter().map(|a| a.shape.len()).max().unwrap_or(0);
        let mut out = vec![1usize; rank];
        for a in args {
            let pad = rank - a.shape.len();
            for (k, &d) in a.shape.iter().enumerate() {
                let slot = &mut out[pad + k];
                if *slot == 1 {
                    *slot = d;
                } else if d != 1 && d != *slot {
                    return Err(ModelError::ShapeMismatch(
                        args.iter().map(|a| a.shape.clone()).collect(),
                    ));
                }
            }
        }
        Ok(out)
    }

    /// Element of this array seen through the broadcast `batch` shape.
    pub fn broadcast_get(&self, batch: &[usize], flat: usize) -> VarId {
        let mut idx = vec![0; batch.len()];
        unflatten(batch, flat, &mut idx);
        let pad = batch.len() - self.shape.len();
        let mut own = 0;
        for (k, &d) in self.shape.iter().enumerate() {
            let i = if d == 1 { 0 } else { idx[pad + k] };
            own = own * d + i;
        }
        self.ids[own]
    }
}

fn unflatten(shape: &[usize], mut flat: usize, out: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        out[k] = flat % shape[k];
        flat /= shape[k];
    }
}
