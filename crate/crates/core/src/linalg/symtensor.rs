use nalgebra::{DMatrix, DVector};

use super::index::{permutation_count, MultisetRanker, SortedIndices};
use crate::completion::ObservationMask;
use crate::error::{Error, Result};

/// Symmetric order-`m` tensor over `R^n` with a presence flag per entry.
///
/// One value is stored per sorted multi-index, so every permutation of an
/// index reads the same slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    ranker: MultisetRanker,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl SymmetricTensor {
    /// All entries absent.
    pub fn empty(order: usize, dim: usize) -> Self {
        let ranker = MultisetRanker::new(dim, order);
        let len = ranker.len();
        Self {
            ranker,
            values: vec![0.0; len],
            present: vec![false; len],
        }
    }

    /// All entries present, filled from `f` evaluated on sorted indices.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::empty(order, dim);
        for idx in SortedIndices::new(dim, order) {
            let r = t.ranker.rank_sorted(&idx);
            t.values[r] = f(&idx);
            t.present[r] = true;
        }
        t
    }

    /// `sum_i w_i v_i^{(x) order}` with every entry present.
    pub fn from_rank_one_sum(order: usize, weights: &[f64], vectors: &[DVector<f64>]) -> Result<Self> {
        let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
        if weights.len() != vectors.len() {
            return Err(Error::dims("one weight per vector required"));
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::dims("vectors must share a dimension"));
        }
        Ok(Self::from_fn(order, dim, |idx| {
            weights
                .iter()
                .zip(vectors)
                .map(|(w, v)| w * idx.iter().map(|&j| v[j]).product::<f64>())
                .sum()
        }))
    }

    pub fn order(&self) -> usize {
        self.ranker.order()
    }

    pub fn dim(&self) -> usize {
        self.ranker.dim()
    }

    /// Number of canonical (sorted) indices.
    pub fn canonical_len(&self) -> usize {
        self.values.len()
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.order() {
            return Err(Error::dims(format!(
                "index of length {} for order-{} tensor",
                index.len(),
                self.order()
            )));
        }
        if let Some(&s) = index.iter().find(|&&s| s >= self.dim()) {
            return Err(Error::invalid(format!("symbol {s} out of range for dimension {}", self.dim())));
        }
        Ok(())
    }

    #[inline]
    pub fn slot(&self, index: &[usize]) -> usize {
        self.ranker.rank(index)
    }

    /// Value at any permutation of `index`, or `None` when absent.
    pub fn get(&self, index: &[usize]) -> Option<f64> {
        let r = self.slot(index);
        self.present[r].then(|| self.values[r])
    }

    /// Stored value regardless of presence.
    pub fn value(&self, index: &[usize]) -> f64 {
        self.values[self.slot(index)]
    }

    pub fn is_present(&self, index: &[usize]) -> bool {
        self.present[self.slot(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        self.check_index(index)?;
        let r = self.slot(index);
        self.values[r] = value;
        self.present[r] = true;
        Ok(())
    }

    pub fn set_absent(&mut self, index: &[usize]) {
        let r = self.slot(index);
        self.present[r] = false;
        self.values[r] = 0.0;
    }

    pub(crate) fn set_slot(&mut self, slot: usize, value: f64) {
        self.values[slot] = value;
        self.present[slot] = true;
    }

    pub(crate) fn slot_value(&self, slot: usize) -> Option<f64> {
        self.present[slot].then(|| self.values[slot])
    }

    /// Sorted multi-index stored at `slot`.
    pub fn index_of_slot(&self, slot: usize) -> Vec<usize> {
        self.ranker.unrank(slot)
    }

    /// Sorted indices in lexicographic order.
    pub fn canonical_indices(&self) -> SortedIndices {
        SortedIndices::new(self.dim(), self.order())
    }

    /// `(sorted index, value if present)` in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, Option<f64>)> + '_ {
        self.canonical_indices().map(move |idx| {
            let r = self.ranker.rank_sorted(&idx);
            let v = self.present[r].then(|| self.values[r]);
            (idx, v)
        })
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|p| *p)
    }

    /// Keeps only entries whose index satisfies `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&[usize]) -> bool) {
        for idx in SortedIndices::new(self.dim(), self.order()) {
            if !keep(&idx) {
                self.set_absent(&idx);
            }
        }
    }

    /// Frobenius norm of the full `n^m` array over present entries, counting
    /// every permutation of each canonical entry.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries()
            .filter_map(|(idx, v)| v.map(|v| permutation_count(&idx) * v * v))
            .sum::<f64>()
            .sqrt()
    }

    /// Full-array Frobenius distance over entries present in both tensors.
    pub fn frobenius_distance(&self, other: &SymmetricTensor) -> Result<f64> {
        if self.order() != other.order() || self.dim() != other.dim() {
            return Err(Error::dims("tensor shapes differ"));
        }
        Ok(self
            .entries()
            .filter_map(|(idx, a)| {
                let b = other.get(&idx)?;
                a.map(|a| permutation_count(&idx) * (a - b) * (a - b))
            })
            .sum::<f64>()
            .sqrt())
    }

    /// Largest absolute entry difference over entries present in both.
    pub fn max_abs_difference(&self, other: &SymmetricTensor) -> Result<f64> {
        if self.order() != other.order() || self.dim() != other.dim() {
            return Err(Error::dims("tensor shapes differ"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.present.iter().zip(&other.present))
            .filter(|(_, (p, q))| **p && **q)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// The matrix `T(Y, ., .)` and its presence mask, for `|Y| = m - 2`.
    pub fn slice(&self, prefix: &[usize]) -> Result<(DMatrix<f64>, ObservationMask)> {
        let order = self.order();
        if order < 2 || prefix.len() != order - 2 {
            return Err(Error::dims(format!(
                "slice prefix of length {} for order-{order} tensor",
                prefix.len()
            )));
        }
        if let Some(&s) = prefix.iter().find(|&&s| s >= self.dim()) {
            return Err(Error::invalid(format!("symbol {s} out of range")));
        }
        let n = self.dim();
        let mut matrix = DMatrix::zeros(n, n);
        let mut revealed = vec![false; n * n];
        let mut idx = prefix.to_vec();
        idx.extend([0, 0]);
        for a in 0..n {
            for b in a..n {
                idx[order - 2] = a;
                idx[order - 1] = b;
                let r = self.slot(&idx);
                if self.present[r] {
                    matrix[(a, b)] = self.values[r];
                    matrix[(b, a)] = self.values[r];
                    revealed[a * n + b] = true;
                    revealed[b * n + a] = true;
                }
            }
        }
        Ok((matrix, ObservationMask::from_revealed(n, n, revealed)?))
    }
}

/// Dense order-`m` array over `[n]^m`, row-major (last index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(order: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let len = dim.checked_pow(order as u32).ok_or_else(|| Error::invalid("tensor too large"))?;
        if data.len() != len {
            return Err(Error::dims(format!("expected {len} entries, got {}", data.len())));
        }
        Ok(Self { order, dim, data })
    }

    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len = dim.pow(order as u32);
        let mut idx = vec![0; order];
        let mut data = Vec::with_capacity(len);
        for p in 0..len {
            decode_lex(p, dim, &mut idx);
            data.push(f(&idx));
        }
        Self { order, dim, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[encode_lex(index, self.dim)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Position of `index` in the lexicographic enumeration of `[dim]^len`.
#[inline]
pub fn encode_lex(index: &[usize], dim: usize) -> usize {
    index.iter().fold(0, |acc, &s| acc * dim + s)
}

/// Inverse of [`encode_lex`], writing into `out`.
#[inline]
pub fn decode_lex(mut pos: usize, dim: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = pos % dim;
        pos /= dim;
    }
}

/// Averages every entry of a raw array over all orderings of its index.
pub fn symmetrize(raw: &DenseTensor) -> SymmetricTensor {
    let mut out = SymmetricTensor::empty(raw.order(), raw.dim());
    let mut sums = vec![0.0; out.canonical_len()];
    let mut counts = vec![0usize; out.canonical_len()];
    let mut idx = vec![0; raw.order()];
    for (p, &v) in raw.as_slice().iter().enumerate() {
        decode_lex(p, raw.dim(), &mut idx);
        let r = out.slot(&idx);
        sums[r] += v;
        counts[r] += 1;
    }
    for (r, (s, c)) in sums.into_iter().zip(counts).enumerate() {
        out.set_slot(r, s / c as f64);
    }
    out
}
