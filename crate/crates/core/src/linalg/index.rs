//! Index strings over `[n]`, their histograms, and the combinatorial ranking
//! that maps sorted multi-indices to dense storage offsets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A string `X` in `[n]^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexString(Vec<usize>);

impl IndexString {
    /// Checks every symbol is below `dim`.
    pub fn new(symbols: Vec<usize>, dim: usize) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= dim) {
            return Err(Error::invalid(format!("symbol {bad} out of range for dimension {dim}")));
        }
        Ok(Self(symbols))
    }

    /// Wraps symbols without a range check.
    pub fn from_symbols(symbols: Vec<usize>) -> Self {
        Self(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn histogram(&self) -> Histogram {
        histogram(&self.0)
    }

    pub fn is_multilinear(&self) -> bool {
        is_multilinear(&self.0)
    }

    /// The sorted (canonical) form.
    pub fn canonical(&self) -> Self {
        let mut s = self.0.clone();
        s.sort_unstable();
        Self(s)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for IndexString {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for IndexString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// Multiset of repetition counts of the distinct symbols in a string, kept in
/// descending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Histogram(Vec<usize>);

impl Histogram {
    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    /// Number of distinct symbols.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Repetition counts of each distinct symbol, descending.
pub fn histogram(symbols: &[usize]) -> Histogram {
    let mut sorted = symbols.to_vec();
    sorted.sort_unstable();
    let mut counts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        counts.push(j - i);
        i = j;
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    Histogram(counts)
}

/// Number of distinct symbols in `symbols`.
pub fn histogram_len(symbols: &[usize]) -> usize {
    let mut sorted = symbols.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

pub fn is_multilinear(symbols: &[usize]) -> bool {
    histogram_len(symbols) == symbols.len()
}

/// `C(n, k)`; panics on `u64` overflow.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial overflows u64")
}

/// Number of sorted multi-indices of length `m` over `[n]`: `C(n + m - 1, m)`.
pub fn multiset_count(n: usize, m: usize) -> usize {
    if n == 0 {
        return usize::from(m == 0);
    }
    binomial(n + m - 1, m) as usize
}

/// Maps a sorted multi-index over `[n]^m` to `0..multiset_count(n, m)`.
///
/// The sorted index `a_0 <= ... <= a_{m-1}` is shifted to the strictly
/// increasing `b_t = a_t + t` and ranked colexicographically,
/// `sum_t C(b_t, t + 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultisetRanker {
    dim: usize,
    order: usize,
    // table[t][b] = C(b, t + 1)
    table: Vec<Vec<usize>>,
}

impl MultisetRanker {
    pub fn new(dim: usize, order: usize) -> Self {
        let top = dim + order;
        let table = (0..order)
            .map(|t| (0..top).map(|b| binomial(b, t + 1) as usize).collect())
            .collect();
        Self { dim, order, table }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        multiset_count(self.dim, self.order)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rank of an already sorted index.
    #[inline]
    pub fn rank_sorted(&self, sorted: &[usize]) -> usize {
        debug_assert_eq!(sorted.len(), self.order);
        debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        sorted
            .iter()
            .enumerate()
            .map(|(t, &a)| self.table[t][a + t])
            .sum()
    }

    /// Rank of any permutation of a multi-index.
    pub fn rank(&self, index: &[usize]) -> usize {
        let mut sorted = index.to_vec();
        sorted.sort_unstable();
        self.rank_sorted(&sorted)
    }

    /// Inverse of [`rank_sorted`](Self::rank_sorted).
    pub fn unrank(&self, mut rank: usize) -> Vec<usize> {
        let mut out = vec![0; self.order];
        for t in (0..self.order).rev() {
            // largest b with C(b, t + 1) <= rank
            let row = &self.table[t];
            let mut b = t;
            while b + 1 < row.len() && row[b + 1] <= rank {
                b += 1;
            }
            rank -= row[b];
            out[t] = b - t;
        }
        out
    }
}

/// Sorted multi-indices of length `order` over `[dim]`, in lexicographic order.
#[derive(Clone, Debug)]
pub struct SortedIndices {
    dim: usize,
    current: Option<Vec<usize>>,
}

impl SortedIndices {
    pub fn new(dim: usize, order: usize) -> Self {
        let current = if dim == 0 && order > 0 {
            None
        } else {
            Some(vec![0; order])
        };
        Self { dim, current }
    }
}

impl Iterator for SortedIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.take()?;
        let mut next = cur.clone();
        let mut t = next.len();
        while t > 0 && next[t - 1] == self.dim - 1 {
            t -= 1;
        }
        if t > 0 {
            let v = next[t - 1] + 1;
            for slot in &mut next[t - 1..] {
                *slot = v;
            }
            self.current = Some(next);
        }
        Some(cur)
    }
}

/// Strictly increasing index tuples (combinations) of length `order` over
/// `[dim]`, lexicographic.
#[derive(Clone, Debug)]
pub struct Combinations {
    dim: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(dim: usize, order: usize) -> Self {
        let current = (order <= dim).then(|| (0..order).collect());
        Self { dim, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.take()?;
        let k = cur.len();
        let mut next = cur.clone();
        let mut t = k;
        while t > 0 && next[t - 1] == self.dim - k + t - 1 {
            t -= 1;
        }
        if t > 0 {
            next[t - 1] += 1;
            for s in t..k {
                next[s] = next[s - 1] + 1;
            }
            self.current = Some(next);
        }
        Some(cur)
    }
}

/// Number of distinct orderings of a multi-index: `m! / prod(c!)`.
pub fn permutation_count(index: &[usize]) -> f64 {
    let h = histogram(index);
    let mut out = 1.0;
    let mut k = 0usize;
    for &c in h.counts() {
        for j in 1..=c {
            k += 1;
            out *= k as f64 / j as f64;
        }
    }
    out
}
