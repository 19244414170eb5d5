//! Completion of a symmetric tensor from its multilinear entries.
//!
//! Missing entries are grouped by their number of distinct symbols `l`.
//! Level `m - 1` entries `Y . a . a` lie on the diagonal of the slice
//! `T(Y, ., .)` restricted to the symbols outside the multilinear `Y`. Lower
//! levels use full `n x n` slices whose only missing entries are those of the
//! current level. Every slice is completed by nuclear-norm minimization.
//!
//! Slices of one level only read entries known before that level starts, so
//! they are solved in parallel and merged in a fixed order. An entry written
//! by several slices keeps the first value; the spread between the copies is
//! reported.

mod schedule;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use schedule::{parent_substring, CompletionSchedule, ScheduleLevel, ScheduledEntry};

use crate::completion::{complete, CompletionSettings, ObservationMask};
use crate::error::{Error, Result};
use crate::linalg::index::{histogram_len, is_multilinear};
use crate::linalg::{SubspaceBasis, SymmetricTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCompletionSettings {
    /// Solver settings used for every slice.
    pub matrix: CompletionSettings,
    /// Rank of the target. Estimated from the multilinear entries if absent.
    pub rank: Option<usize>,
    /// Incoherence of the target's span. Estimated if absent.
    pub mu: Option<f64>,
    /// Entrywise noise level of the input, for the predicted error bounds.
    pub input_noise: f64,
    /// When set (and `matrix.noise_radius` is 0), each slice may deviate
    /// from its revealed entries by `input_noise * sqrt(revealed)` in
    /// Frobenius norm instead of matching them exactly.
    pub fit_within_noise: bool,
    /// Largest accepted spread between two slices' values for one entry.
    pub duplicate_tolerance: f64,
}

impl Default for TensorCompletionSettings {
    fn default() -> Self {
        Self {
            matrix: CompletionSettings::default(),
            rank: None,
            mu: None,
            input_noise: 0.0,
            fit_within_noise: true,
            duplicate_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub slices: usize,
    pub entries: usize,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorCompletionReport {
    #[serde(skip)]
    pub tensor: SymmetricTensor,
    pub order: usize,
    pub dim: usize,
    pub rank: usize,
    pub mu: f64,
    /// True when rank or incoherence were estimated rather than supplied.
    pub structure_estimated: bool,
    /// `4 mu r m / n`; recovery is guaranteed below 1.
    pub feasibility: f64,
    pub feasible: bool,
    pub levels: Vec<LevelReport>,
    pub completions: usize,
    pub max_duplicate_discrepancy: f64,
    pub duplicate_violations: usize,
    pub predicted_slice_error: f64,
    pub predicted_total_error: f64,
}

/// `(4 eps (5 n^{3/2})^{m-1}, 4 eps (5 n^{3/2})^{3m/2 - 2})`: Frobenius error
/// bounds for one completed slice and for the whole tensor when every input
/// entry is off by at most `eps`.
pub fn predicted_error(eps: f64, n: usize, m: usize) -> (f64, f64) {
    let base = 5.0 * (n as f64).powf(1.5);
    let m = m as f64;
    (4.0 * eps * base.powf(m - 1.0), 4.0 * eps * base.powf(1.5 * m - 2.0))
}

/// `4 mu r m / n`.
pub fn feasibility_ratio(mu: f64, rank: usize, order: usize, dim: usize) -> f64 {
    4.0 * mu * rank as f64 * order as f64 / dim as f64
}

/// Rank and incoherence read off a fully multilinear block of the tensor:
/// `T(Y . a . b)` for `a` in one half of the free symbols and `b` in the
/// other. The incoherence is that of the block's row and column spaces (the
/// larger of the two), which only sees part of each coordinate vector.
pub fn estimate_structure(t: &SymmetricTensor, rank_threshold: f64) -> Result<(usize, f64)> {
    let (m, n) = (t.order(), t.dim());
    if m < 2 || n < m {
        return Err(Error::invalid(format!(
            "cannot estimate structure for order {m}, dimension {n}"
        )));
    }
    let prefix: Vec<usize> = (0..m - 2).collect();
    let free: Vec<usize> = (m - 2..n).collect();
    let half = free.len() / 2;
    let (rows, cols) = free.split_at(half);
    let mut idx = prefix.clone();
    idx.extend([0, 0]);
    let mut block = DMatrix::zeros(rows.len(), cols.len());
    for (i, &a) in rows.iter().enumerate() {
        for (j, &b) in cols.iter().enumerate() {
            idx[m - 2] = a;
            idx[m - 1] = b;
            block[(i, j)] = t.get(&idx).ok_or_else(|| {
                Error::invalid(format!("multilinear entry {idx:?} is absent"))
            })?;
        }
    }
    let left = SubspaceBasis::column_space(&block, rank_threshold)?;
    let right = SubspaceBasis::column_space(&block.transpose(), rank_threshold)?;
    let r = left.rank();
    if r == 0 {
        return Ok((0, 1.0));
    }
    Ok((r, left.incoherence()?.max(right.incoherence()?)))
}

/// Fills every absent entry of `t`. Multilinear entries must all be present
/// and `n >= m`.
pub fn complete_symmetric(
    t: &SymmetricTensor,
    settings: &TensorCompletionSettings,
) -> Result<TensorCompletionReport> {
    settings.matrix.validate()?;
    if !(settings.input_noise >= 0.0 && settings.input_noise.is_finite()) {
        return Err(Error::invalid("input noise must be finite and >= 0"));
    }
    if !(settings.duplicate_tolerance >= 0.0) {
        return Err(Error::invalid("duplicate tolerance must be >= 0"));
    }
    let (m, n) = (t.order(), t.dim());
    let schedule = CompletionSchedule::plan(t)?;

    let (rank, mu, structure_estimated) = match (settings.rank, settings.mu) {
        (Some(r), Some(mu)) => (r, mu, false),
        (r, mu) if m >= 2 => {
            let (er, emu) = estimate_structure(t, settings.matrix.rank_threshold)?;
            (r.unwrap_or(er), mu.unwrap_or(emu), true)
        }
        (r, mu) => (r.unwrap_or(0), mu.unwrap_or(1.0), true),
    };
    let feasibility = feasibility_ratio(mu, rank, m, n);
    let (predicted_slice_error, predicted_total_error) = predicted_error(settings.input_noise, n, m);

    let mut tensor = t.clone();
    let mut levels = Vec::with_capacity(schedule.levels.len());
    let mut max_dup = 0.0f64;
    let mut dup_violations = 0;
    for level in &schedule.levels {
        let snapshot = &tensor;
        let top = level.level + 1 == m;
        let results: Vec<Result<SliceFill>> = level
            .slices
            .par_iter()
            .map(|parent| {
                solve_slice(snapshot, parent, level.level, top, settings).map_err(|e| {
                    Error::SliceCompletion {
                        level: level.level,
                        parent: parent.clone(),
                        source: Box::new(e),
                    }
                })
            })
            .collect();
        let mut fills = Vec::with_capacity(results.len());
        for r in results {
            fills.push(r?);
        }

        let mut written = std::collections::HashSet::new();
        let mut max_iterations = 0;
        for fill in fills {
            max_iterations = max_iterations.max(fill.iterations);
            for (idx, value) in fill.values {
                let slot = tensor.slot(&idx);
                if written.insert(slot) {
                    tensor.set_slot(slot, value);
                } else {
                    let diff = (tensor.slot_value(slot).expect("written above") - value).abs();
                    max_dup = max_dup.max(diff);
                    if diff > settings.duplicate_tolerance {
                        dup_violations += 1;
                    }
                }
            }
        }
        for e in &level.entries {
            if !tensor.is_present(&e.index) {
                return Err(Error::invalid(format!(
                    "entry {:?} was not covered by any slice at level {}",
                    e.index, level.level
                )));
            }
        }
        levels.push(LevelReport {
            level: level.level,
            slices: level.slices.len(),
            entries: level.entries.len(),
            max_iterations,
        });
    }

    Ok(TensorCompletionReport {
        tensor,
        order: m,
        dim: n,
        rank,
        mu,
        structure_estimated,
        feasibility,
        feasible: feasibility < 1.0,
        completions: schedule.slice_count(),
        levels,
        max_duplicate_discrepancy: max_dup,
        duplicate_violations: dup_violations,
        predicted_slice_error,
        predicted_total_error,
    })
}

struct SliceFill {
    values: Vec<(Vec<usize>, f64)>,
    iterations: usize,
}

/// Completes the slice `T(parent, ., .)` and returns the values of the
/// entries absent from `snapshot`.
fn solve_slice(
    snapshot: &SymmetricTensor,
    parent: &[usize],
    level: usize,
    top: bool,
    settings: &TensorCompletionSettings,
) -> Result<SliceFill> {
    let n = snapshot.dim();
    let (full, full_mask) = snapshot.slice(parent)?;
    let keep: Vec<usize> = if top {
        (0..n).filter(|a| !parent.contains(a)).collect()
    } else {
        (0..n).collect()
    };
    let k = keep.len();
    let matrix = DMatrix::from_fn(k, k, |i, j| full[(keep[i], keep[j])]);
    let mask = ObservationMask::from_fn(k, k, |i, j| full_mask.is_revealed(keep[i], keep[j]));

    let mut idx = parent.to_vec();
    idx.extend([0, 0]);
    let m = idx.len();
    let entry = |idx: &mut Vec<usize>, a: usize, b: usize| {
        idx[m - 2] = a;
        idx[m - 1] = b;
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted
    };
    for (i, j) in mask.hidden() {
        let x = entry(&mut idx, keep[i], keep[j]);
        let expected = if top { i == j } else { histogram_len(&x) == level };
        if !expected || is_multilinear(&x) {
            return Err(Error::invalid(format!(
                "slice {parent:?} is missing {x:?}, which should be known before level {level}"
            )));
        }
    }
    if mask.hidden_count() == 0 {
        return Ok(SliceFill {
            values: Vec::new(),
            iterations: 0,
        });
    }

    let mut matrix_settings = settings.matrix.clone();
    if settings.fit_within_noise && matrix_settings.noise_radius == 0.0 {
        matrix_settings.noise_radius = settings.input_noise * (mask.revealed_count() as f64).sqrt();
    }
    let report = complete(&matrix, &mask, &matrix_settings)?;
    let out = &report.matrix;
    let mut values = Vec::new();
    for i in 0..k {
        for j in i..k {
            if !mask.is_revealed(i, j) {
                let x = entry(&mut idx, keep[i], keep[j]);
                values.push((x, 0.5 * (out[(i, j)] + out[(j, i)])));
            }
        }
    }
    Ok(SliceFill {
        values,
        iterations: report.iterations,
    })
}
