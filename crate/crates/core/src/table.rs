//! Weighted tensors over the cartesian product of variable domains.
//!
//! Cells are addressed row-major: the last dimension varies fastest. Dense
//! tables store every cell (zeros included); sparse tables store only the
//! strictly positive cells, sorted by flat offset. Both iterate their stored
//! entries in ascending offset order, which is what makes the two encodings
//! produce bit-identical messages.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;
use std::sync::OnceLock;

use crate::domain::DiscreteDomain;
use crate::error::ModelError;
use crate::kernel::weight_to_cost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StorageKind {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse { offsets: Vec<usize>, weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct FactorTable {
    dims: Vec<usize>,
    strides: Vec<usize>,
    storage: Storage,
    costs: OnceLock<Vec<f64>>,
}

impl PartialEq for FactorTable {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.storage == other.storage
    }
}

fn strides_for(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

fn check_dims(dims: &[usize]) -> Result<(), ModelError> {
    if dims.is_empty() {
        return Err(ModelError::EmptyFactor);
    }
    if dims.contains(&0) {
        return Err(ModelError::ZeroDimension);
    }
    Ok(())
}

fn check_weight(index: impl FnOnce() -> Vec<usize>, w: f64) -> Result<(), ModelError> {
    if !w.is_finite() || w < 0.0 {
        return Err(ModelError::InvalidWeight { index: index(), weight: w });
    }
    Ok(())
}

impl FactorTable {
    /// Dense table from row-major weights.
    pub fn dense(dims: Vec<usize>, weights: Vec<f64>) -> Result<Self, ModelError> {
        check_dims(&dims)?;
        let cells: usize = dims.iter().product();
        if weights.len() != cells {
            return Err(ModelError::LengthMismatch {
                indices: cells,
                weights: weights.len(),
            });
        }
        let strides = strides_for(&dims);
        for (flat, &w) in weights.iter().enumerate() {
            check_weight(|| decode_with(&dims, &strides, flat), w)?;
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(ModelError::AllZeroTable);
        }
        Ok(Self {
            dims,
            strides,
            storage: Storage::Dense(weights),
            costs: OnceLock::new(),
        })
    }

    /// Materializes `f` over the full cartesian product of `domains`.
    pub fn from_fn(
        domains: &[&DiscreteDomain],
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self, ModelError> {
        let dims: Vec<usize> = domains.iter().map(|d| d.size()).collect();
        check_dims(&dims)?;
        let cells: usize = dims.iter().product();
        let strides = strides_for(&dims);
        let mut args = vec![0.0; dims.len()];
        let mut weights = Vec::with_capacity(cells);
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..cells {
            decode_into(&dims, &strides, flat, &mut idx);
            for (p, &i) in idx.iter().enumerate() {
                args[p] = domains[p].value(i);
            }
            weights.push(f(&args));
        }
        Self::dense(dims, weights)
    }

    /// Sparse table from zero-based index tuples. Zero weights are dropped.
    pub fn sparse(
        dims: Vec<usize>,
        indices: &[Vec<usize>],
        weights: &[f64],
    ) -> Result<Self, ModelError> {
        check_dims(&dims)?;
        if indices.len() != weights.len() {
            return Err(ModelError::LengthMismatch {
                indices: indices.len(),
                weights: weights.len(),
            });
        }
        let strides = strides_for(&dims);
        let mut pairs = Vec::with_capacity(indices.len());
        for (idx, &w) in indices.iter().zip(weights) {
            if idx.len() != dims.len() || idx.iter().zip(&dims).any(|(&i, &d)| i >= d) {
                return Err(ModelError::IndexOutOfBounds {
                    index: idx.clone(),
                    dims: dims.clone(),
                });
            }
            check_weight(|| idx.clone(), w)?;
            let flat = idx.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>();
            pairs.push((flat, w));
        }
        pairs.sort_by_key(|&(flat, _)| flat);
        for pair in pairs.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(ModelError::DuplicateIndex(decode_with(&dims, &strides, pair[0].0)));
            }
        }
        pairs.retain(|&(_, w)| w > 0.0);
        if pairs.is_empty() {
            return Err(ModelError::AllZeroTable);
        }
        let (offsets, weights) = pairs.into_iter().unzip();
        Ok(Self {
            dims,
            strides,
            storage: Storage::Sparse { offsets, weights },
            costs: OnceLock::new(),
        })
    }

    pub(crate) fn sparse_from_flat(dims: Vec<usize>, offsets: Vec<usize>, weights: Vec<f64>) -> Self {
        debug_assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        let strides = strides_for(&dims);
        Self {
            dims,
            strides,
            storage: Storage::Sparse { offsets, weights },
            costs: OnceLock::new(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn degree(&self) -> usize {
        self.dims.len()
    }

    /// Size of the full cartesian product.
    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Number of stored entries (all cells for dense storage).
    pub fn entry_count(&self) -> usize {
        match &self.storage {
            Storage::Dense(w) => w.len(),
            Storage::Sparse { offsets, .. } => offsets.len(),
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights().iter().filter(|&&w| w > 0.0).count()
    }

    pub fn kind(&self) -> StorageKind {
        match self.storage {
            Storage::Dense(_) => StorageKind::Dense,
            Storage::Sparse { .. } => StorageKind::Sparse,
        }
    }

    /// Stored weights in entry order.
    pub fn weights(&self) -> &[f64] {
        match &self.storage {
            Storage::Dense(w) => w,
            Storage::Sparse { weights, .. } => weights,
        }
    }

    /// `-ln(weight)` per stored entry, saturated for zero weights.
    pub fn costs(&self) -> &[f64] {
        self.costs
            .get_or_init(|| self.weights().iter().map(|&w| weight_to_cost(w)).collect())
    }

    /// Flat offset of stored entry `entry`.
    #[inline]
    pub fn offset(&self, entry: usize) -> usize {
        match &self.storage {
            Storage::Dense(_) => entry,
            Storage::Sparse { offsets, .. } => offsets[entry],
        }
    }

    /// Index along dimension `dim` of the cell at flat offset `flat`.
    #[inline]
    pub fn coord(&self, flat: usize, dim: usize) -> usize {
        (flat / self.strides[dim]) % self.dims[dim]
    }

    pub fn decode(&self, flat: usize) -> Vec<usize> {
        decode_with(&self.dims, &self.strides, flat)
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Iterates stored `(flat offset, weight)` pairs in ascending offset order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.entry_count()).map(move |e| (self.offset(e), self.weights()[e]))
    }

    /// Weight of the cell at `index` (zero for cells absent from sparse storage).
    pub fn weight_at(&self, index: &[usize]) -> f64 {
        let flat = self.flat_index(index);
        match &self.storage {
            Storage::Dense(w) => w[flat],
            Storage::Sparse { offsets, weights } => match offsets.binary_search(&flat) {
                Ok(e) => weights[e],
                Err(_) => 0.0,
            },
        }
    }

    /// Full row-major weight vector, zeros included.
    pub fn to_dense_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cell_count()];
        for (flat, w) in self.entries() {
            out[flat] = w;
        }
        out
    }

    pub fn to_dense(&self) -> FactorTable {
        Self {
            dims: self.dims.clone(),
            strides: self.strides.clone(),
            storage: Storage::Dense(self.to_dense_weights()),
            costs: OnceLock::new(),
        }
    }

    /// Sparse copy keeping only strictly positive cells.
    pub fn to_sparse(&self) -> FactorTable {
        let (offsets, weights) = self.entries().filter(|&(_, w)| w > 0.0).unzip();
        Self::sparse_from_flat(self.dims.clone(), offsets, weights)
    }

    /// Rescales so that, for every configuration of the other dimensions, the
    /// weights along `dim` sum to one.
    pub fn normalize(&self, dim: usize) -> Result<FactorTable, ModelError> {
        if dim >= self.degree() {
            return Err(ModelError::BadDimension { dim, degree: self.degree() });
        }
        let sums = self.slice_sums(&[dim]);
        for (key, &s) in &sums {
            if s <= 0.0 {
                return Err(ModelError::ZeroSumSlice(self.decode(*key)));
            }
        }
        let slices = self.cell_count() / self.dims[dim];
        if sums.len() < slices {
            // a slice with no stored entry sums to zero
            let missing = (0..self.cell_count())
                .map(|flat| self.slice_key(flat, &[dim]))
                .find(|k| !sums.contains_key(k))
                .expect("missing slice");
            return Err(ModelError::ZeroSumSlice(self.decode(missing)));
        }
        let mut out = self.clone();
        out.costs = OnceLock::new();
        let keys: Vec<usize> = self.entries().map(|(flat, _)| self.slice_key(flat, &[dim])).collect();
        let weights = match &mut out.storage {
            Storage::Dense(w) => w,
            Storage::Sparse { weights, .. } => weights,
        };
        for (w, key) in weights.iter_mut().zip(keys) {
            *w /= sums[&key];
        }
        Ok(out)
    }

    /// True when summing over `positions` yields 1 (within `tol`) for every
    /// configuration of the remaining positions.
    pub fn is_conditional_over(&self, positions: &[usize], tol: f64) -> bool {
        if positions.iter().any(|&p| p >= self.degree()) {
            return false;
        }
        let sums = self.slice_sums(positions);
        let others: usize = (0..self.degree())
            .filter(|p| !positions.contains(p))
            .map(|p| self.dims[p])
            .product();
        // configurations absent from `sums` have total zero
        sums.len() == others && sums.values().all(|&s| (s - 1.0).abs() <= tol)
    }

    /// Flat offset with the coordinates along `positions` zeroed; identifies
    /// the slice an entry belongs to.
    fn slice_key(&self, flat: usize, positions: &[usize]) -> usize {
        positions
            .iter()
            .fold(flat, |acc, &p| acc - self.coord(flat, p) * self.strides[p])
    }

    fn slice_sums(&self, positions: &[usize]) -> std::collections::HashMap<usize, f64> {
        let mut sums = std::collections::HashMap::new();
        if self.kind() == StorageKind::Dense {
            for flat in 0..self.cell_count() {
                sums.entry(self.slice_key(flat, positions)).or_insert(0.0);
            }
        }
        for (flat, w) in self.entries() {
            *sums.entry(self.slice_key(flat, positions)).or_insert(0.0) += w;
        }
        sums
    }

    /// Hash over dimensions, storage kind and exact weight bits.
    pub fn structural_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.dims.hash(&mut h);
        self.kind().hash(&mut h);
        match &self.storage {
            Storage::Dense(w) => w.iter().for_each(|x| x.to_bits().hash(&mut h)),
            Storage::Sparse { offsets, weights } => {
                offsets.hash(&mut h);
                weights.iter().for_each(|x| x.to_bits().hash(&mut h));
            }
        }
        h.finish()
    }

    pub fn entry_range(&self) -> Range<usize> {
        0..self.entry_count()
    }
}

fn decode_into(dims: &[usize], strides: &[usize], flat: usize, out: &mut [usize]) {
    for p in 0..dims.len() {
        out[p] = (flat / strides[p]) % dims[p];
    }
}

fn decode_with(dims: &[usize], strides: &[usize], flat: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    decode_into(dims, strides, flat, &mut out);
    out
}
