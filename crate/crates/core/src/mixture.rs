//! Mixtures of product distributions over `{-1, +1}^n`.
//!
//! Center `i` has bias vector `v_i in [-1, 1]^n`: under it, coordinate `j`
//! is `+1` with probability `(1 + v_i(j)) / 2`, independently of the rest.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::index::Combinations;
use crate::linalg::SymmetricTensor;
use crate::rng::{stream, Rng};
use crate::synth::incoherent_factor;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Samples drawn from one generator stream. Fixed so that sample sets do not
/// depend on the number of worker threads.
pub const SAMPLE_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductMixture {
    weights: Vec<f64>,
    vectors: Vec<DVector<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MixtureFile {
    n: usize,
    k: usize,
    weights: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl ProductMixture {
    pub fn new(weights: Vec<f64>, vectors: Vec<DVector<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("a mixture needs at least one center"));
        }
        if weights.len() != vectors.len() {
            return Err(Error::dims(format!(
                "{} weights for {} centers",
                weights.len(),
                vectors.len()
            )));
        }
        let n = vectors[0].len();
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let Some(i) = vectors.iter().position(|v| v.len() != n) {
            return Err(Error::dims(format!("center {i} has length {}, expected {n}", vectors[i].len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        for (i, v) in vectors.iter().enumerate() {
            if let Some(x) = v.iter().find(|x| !(x.abs() <= 1.0)) {
                return Err(Error::invalid(format!("center {i} has bias {x} outside [-1, 1]")));
            }
        }
        Ok(Self { weights, vectors })
    }

    /// Random mixture: biases uniform in `[-1, 1]`, weights proportional to
    /// uniform draws from `[0.5, 1.5]`.
    pub fn random(n: usize, k: usize, rng: &mut Rng) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("dimension and number of centers must be positive"));
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        // absorb rounding so the sum is 1 to the last bit we can manage
        let drift = 1.0 - weights.iter().sum::<f64>();
        weights[0] += drift;
        let vectors = (0..k)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        Self::new(weights, vectors)
    }

    /// Random mixture whose centers span a subspace of incoherence at most
    /// `max_mu`: entries have random signs and magnitudes in `[0.3, 0.9]`.
    /// Weights are drawn as in [`ProductMixture::random`].
    pub fn incoherent(n: usize, k: usize, max_mu: f64, rng: &mut Rng) -> Result<Self> {
        let base = Self::random(n, k, rng)?;
        let factor = incoherent_factor(n, k, max_mu, rng)?;
        let vectors = (0..k).map(|i| factor.column(i) * 0.6).collect();
        Self::new(base.weights, vectors)
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn w_max(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn w_min(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::MAX, f64::min)
    }

    pub fn to_json(&self) -> String {
        let file = MixtureFile {
            n: self.n(),
            k: self.k(),
            weights: self.weights.clone(),
            vectors: self.vectors.iter().map(|v| v.iter().cloned().collect()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("mixture serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MixtureFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        if file.weights.len() != file.k || file.vectors.len() != file.k {
            return Err(Error::dims(format!(
                "k = {} but {} weights and {} vectors",
                file.k,
                file.weights.len(),
                file.vectors.len()
            )));
        }
        if file.vectors.iter().any(|v| v.len() != file.n) {
            return Err(Error::dims(format!("every vector must have n = {} entries", file.n)));
        }
        Self::new(file.weights, file.vectors.into_iter().map(DVector::from_vec).collect())
    }
}

/// `N` points of `{-1, +1}^n`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    data: Vec<i8>,
    seed: Option<u64>,
}

impl SampleSet {
    pub fn from_rows(n: usize, data: Vec<i8>, seed: Option<u64>) -> Result<Self> {
        if n == 0 || !data.len().is_multiple_of(n) {
            return Err(Error::dims(format!("{} values do not form rows of length {n}", data.len())));
        }
        if data.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::invalid("samples must be +1 or -1"));
        }
        Ok(Self { n, data, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, s: usize) -> &[i8] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.data.chunks_exact(self.n)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::with_capacity(3 * self.n);
        for row in self.rows() {
            line.clear();
            for (j, &x) in row.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(if x > 0 { "1" } else { "-1" });
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut n = 0;
        let mut data = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(match tok {
                    "1" | "+1" => 1i8,
                    "-1" => -1,
                    other => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("expected 1 or -1, got `{other}`"),
                        })
                    }
                });
            }
            let width = data.len() - before;
            if n == 0 {
                n = width;
            } else if width != n {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("row has {width} entries, expected {n}"),
                });
            }
        }
        if n == 0 {
            return Err(Error::invalid("no samples"));
        }
        Self::from_rows(n, data, None)
    }
}

/// Draws `count` samples: a center with probability `w_i`, then each bit
/// `+1` with probability `(1 + v_i(j)) / 2`. Chunk `c` of `SAMPLE_CHUNK`
/// samples comes from generator stream `c` of `seed`.
pub fn sample(mix: &ProductMixture, count: usize, seed: u64) -> SampleSet {
    let n = mix.n();
    let cumulative: Vec<f64> = mix
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let thresholds: Vec<Vec<f64>> = mix
        .vectors
        .iter()
        .map(|v| v.iter().map(|b| (1.0 + b) / 2.0).collect())
        .collect();
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<Vec<i8>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let rows = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
            let mut out = Vec::with_capacity(rows * n);
            for _ in 0..rows {
                let u: f64 = rng.random();
                let center = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(cumulative.len() - 1);
                for &p in &thresholds[center] {
                    let x: f64 = rng.random();
                    out.push(if x < p { 1 } else { -1 });
                }
            }
            out
        })
        .collect();
    SampleSet {
        n,
        data: parts.concat(),
        seed: Some(seed),
    }
}

/// `sum_i w_i v_i^{(x) m}`, all entries.
pub fn exact_augmented_moments(mix: &ProductMixture, m: usize) -> Result<SymmetricTensor> {
    if m == 0 {
        return Err(Error::invalid("moment order must be at least 1"));
    }
    SymmetricTensor::from_rank_one_sum(m, &mix.weights, &mix.vectors)
}

/// Empirical order-`m` moments on multilinear entries only:
/// `(1/N) sum_s prod_t x_s(j_t)` for `j_1 < ... < j_m`. Other entries are
/// absent.
pub fn empirical_multilinear_moments(samples: &SampleSet, m: usize) -> Result<SymmetricTensor> {
    let n = samples.n();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("order {m} needs 1 <= m <= n = {n}")));
    }
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let combos = crate::linalg::index::binomial(n, m) as usize;
    // products of +-1 entries are +-1, so integer sums are exact and the
    // reduction is independent of how samples are split across threads
    let sums = samples
        .data
        .par_chunks(samples.n * SAMPLE_CHUNK)
        .map(|block| {
            let mut acc = vec![0i64; combos];
            for row in block.chunks_exact(n) {
                let mut pos = 0;
                accumulate(row, 0, m, 1, &mut acc, &mut pos);
            }
            acc
        })
        .reduce(
            || vec![0i64; combos],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let count = samples.len() as f64;
    let mut t = SymmetricTensor::empty(m, n);
    for (combo, s) in Combinations::new(n, m).zip(sums) {
        t.set(&combo, s as f64 / count)?;
    }
    Ok(t)
}

/// Adds the products over all `remaining`-subsets of `row[start..]`
/// (times `sign`) into `acc`, in lexicographic order starting at `*pos`.
fn accumulate(row: &[i8], start: usize, remaining: usize, sign: i64, acc: &mut [i64], pos: &mut usize) {
    if remaining == 0 {
        acc[*pos] += sign;
        *pos += 1;
        return;
    }
    for j in start..=row.len() - remaining {
        accumulate(row, j + 1, remaining - 1, sign * row[j] as i64, acc, pos);
    }
}

/// `1 - max_{i != j} |<v_i, v_j>| / (|v_i| |v_j|)`.
pub fn separation(mix: &ProductMixture) -> Result<f64> {
    separation_of(&mix.vectors)
}

pub fn separation_of(vectors: &[DVector<f64>]) -> Result<f64> {
    if vectors.len() < 2 {
        return Err(Error::invalid("separation needs at least two centers"));
    }
    let norms: Vec<f64> = vectors.iter().map(|v| v.norm()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroCenter(i));
    }
    let mut worst: f64 = 0.0;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let c = vectors[i].dot(&vectors[j]).abs() / (norms[i] * norms[j]);
            worst = worst.max(c.min(1.0));
        }
    }
    Ok(1.0 - worst)
}

/// Smallest odd `m >= ceil(log_{1/(1 - eta)} k)`; 1 when `eta = 1`.
pub fn min_odd_power(k: usize, eta: f64) -> Result<usize> {
    if !(eta > 0.0) {
        return Err(Error::NotSeparated(eta));
    }
    if eta > 1.0 || k == 0 {
        return Err(Error::invalid(format!("need eta in (0, 1] and k >= 1, got eta {eta}, k {k}")));
    }
    if eta == 1.0 || k == 1 {
        return Ok(1);
    }
    let ratio = (k as f64).ln() / -(1.0 - eta).ln();
    // guard against ln(4)/ln(2) landing a hair above 2
    let lower = (ratio - 1e-9).ceil().max(1.0) as usize;
    Ok(if lower % 2 == 1 { lower } else { lower + 1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRequest {
    pub order: usize,
    pub epsilon: f64,
    pub delta: f64,
}

impl MomentRequest {
    pub fn new(order: usize, epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "accuracy and failure probability must lie in (0, 1), got {epsilon}, {delta}"
            )));
        }
        if order == 0 {
            return Err(Error::invalid("moment order must be at least 1"));
        }
        Ok(Self { order, epsilon, delta })
    }
}

/// `(2 / eps^2) (4 m ln n + ln(1 / delta))` before rounding up.
pub fn sample_bound(epsilon: f64, delta: f64, n: f64, m: usize) -> f64 {
    2.0 / (epsilon * epsilon) * (4.0 * m as f64 * n.ln() + (1.0 / delta).ln())
}

/// Samples after which every order-`m` moment estimate is within `epsilon`
/// of its mean with probability at least `1 - delta`.
pub fn required_samples(req: &MomentRequest, n: usize) -> u64 {
    sample_bound(req.epsilon, req.delta, n as f64, req.order).ceil() as u64
}

/// Accuracy guaranteed by `count` samples: the inverse of `sample_bound`.
pub fn moment_accuracy(count: usize, delta: f64, n: usize, m: usize) -> f64 {
    (2.0 / count as f64 * (4.0 * m as f64 * (n as f64).ln() + (1.0 / delta).ln())).sqrt()
}
