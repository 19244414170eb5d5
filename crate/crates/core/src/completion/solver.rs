//! Nuclear-norm minimization by alternating-direction iteration.
//!
//! Solves
//!
//! ```text
//! minimize ||X||_*   subject to   ||P_Omega(X - observed)||_F <= delta
//! ```
//!
//! by splitting `X = Z` with `Z` confined to the feasible set. The `X` update
//! is singular-value soft-thresholding, the `Z` update a projection onto the
//! Frobenius ball of radius `delta` around the observed entries (an affine
//! subspace when `delta = 0`). Rank is never an input.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::mask::{recoverability_margin, ObservationMask};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Rank and incoherence of the (unknown) target, used only for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureHint {
    pub rank: usize,
    pub mu_u: f64,
    pub mu_v: f64,
    /// The `lambda` appearing in the noisy-recovery `beta`. `beta` is only
    /// reported when this is supplied.
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionSettings {
    pub max_iterations: usize,
    /// Relative tolerance on both iterate change and constraint violation.
    pub tolerance: f64,
    /// Frobenius radius allowed between the output and the observations.
    pub noise_radius: f64,
    /// Initial penalty of the splitting scheme, relative to the data scale.
    pub penalty: f64,
    /// Singular values below `rank_threshold * sigma_max` do not count toward
    /// the reported numerical rank.
    pub rank_threshold: f64,
    pub structure: Option<StructureHint>,
}

impl Default for CompletionSettings {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tolerance: 1e-9,
            noise_radius: 0.0,
            penalty: 1.0,
            rank_threshold: 1e-8,
            structure: None,
        }
    }
}

impl CompletionSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.noise_radius >= 0.0) || !self.noise_radius.is_finite() {
            return Err(Error::invalid("noise radius must be finite and >= 0"));
        }
        if !(self.penalty > 0.0) || !self.penalty.is_finite() {
            return Err(Error::invalid("penalty must be finite and positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompletionReport {
    #[serde(skip)]
    pub matrix: DenseMatrix,
    pub iterations: usize,
    /// Relative distance of the last splitting iterate to the feasible set.
    pub residual: f64,
    pub numerical_rank: usize,
    pub nuclear_norm: f64,
    pub kappa: usize,
    pub rho: usize,
    pub recoverable: Option<bool>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Set when `alpha >= 1` or `beta >= 1`: the error bound says nothing.
    pub bound_vacuous: bool,
    /// Frobenius error bound for noisy recovery, when `alpha, beta < 1`.
    pub error_bound: Option<f64>,
}

/// `alpha = 3/2 (kappa mu_u / m + rho mu_v / n) r`
pub fn alpha_coefficient(mask: &ObservationMask, hint: &StructureHint) -> f64 {
    0.75 * recoverability_margin(mask, hint.mu_u, hint.mu_v, hint.rank)
}

/// `beta = r / (1 - lambda) * sqrt(kappa rho mu_u mu_v / (m n))`, or `None`
/// without a caller-supplied `lambda`.
pub fn beta_coefficient(mask: &ObservationMask, hint: &StructureHint) -> Option<f64> {
    let lambda = hint.lambda?;
    let m = mask.rows() as f64;
    let n = mask.cols() as f64;
    let root = (mask.kappa() as f64 * mask.rho() as f64 * hint.mu_u * hint.mu_v / (m * n)).sqrt();
    Some(hint.rank as f64 / (1.0 - lambda) * root)
}

/// Frobenius error bound `2 delta + 2 delta sqrt(min(m, n)) / (1 - beta) * sqrt(1 + 1 / (1 - alpha))`.
pub fn noisy_error_bound(delta: f64, rows: usize, cols: usize, alpha: f64, beta: f64) -> f64 {
    let side = (rows.min(cols) as f64).sqrt();
    2.0 * delta + 2.0 * delta * side / (1.0 - beta) * (1.0 + 1.0 / (1.0 - alpha)).sqrt()
}

/// Singular-value soft-thresholding. Returns the shrunk matrix and its
/// nuclear norm. The symmetric path uses an eigendecomposition and keeps the
/// output exactly symmetric.
fn shrink(a: DMatrix<f64>, tau: f64, symmetric: bool) -> (DMatrix<f64>, f64) {
    if symmetric {
        let eig = SymmetricEigen::new(a);
        let mut nuclear = 0.0;
        let n = eig.eigenvalues.len();
        let mut scaled = eig.eigenvectors.clone();
        let mut kept = 0;
        for (c, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = (lam.abs() - tau).max(0.0);
            nuclear += s;
            let shrunk = s.copysign(lam);
            if s > 0.0 {
                kept += 1;
            }
            scaled.column_mut(c).scale_mut(shrunk);
        }
        if kept == 0 {
            return (DMatrix::zeros(n, n), 0.0);
        }
        let mut out = &scaled * eig.eigenvectors.transpose();
        symmetrize_in_place(&mut out);
        (out, nuclear)
    } else {
        let (rows, cols) = a.shape();
        let svd = a.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let mut nuclear = 0.0;
        let mut us = u.clone();
        let mut kept = 0;
        for (c, &s) in svd.singular_values.iter().enumerate() {
            let t = (s - tau).max(0.0);
            nuclear += t;
            if t > 0.0 {
                kept += 1;
            }
            us.column_mut(c).scale_mut(t);
        }
        if kept == 0 {
            return (DMatrix::zeros(rows, cols), 0.0);
        }
        (us * vt, nuclear)
    }
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn numerical_rank(m: &DMatrix<f64>, threshold: f64) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > threshold * top).count()
}

/// Observation-consistent projection: the closest matrix whose revealed part
/// lies within `radius` of `observed`.
fn project_feasible(
    y: &mut DMatrix<f64>,
    observed: &DMatrix<f64>,
    mask: &ObservationMask,
    radius: f64,
) {
    let (rows, cols) = y.shape();
    if radius == 0.0 {
        for i in 0..rows {
            for j in 0..cols {
                if mask.is_revealed(i, j) {
                    y[(i, j)] = observed[(i, j)];
                }
            }
        }
        return;
    }
    let mut dist2 = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            if mask.is_revealed(i, j) {
                let d = y[(i, j)] - observed[(i, j)];
                dist2 += d * d;
            }
        }
    }
    let dist = dist2.sqrt();
    if dist <= radius {
        return;
    }
    let shrink = radius / dist;
    for i in 0..rows {
        for j in 0..cols {
            if mask.is_revealed(i, j) {
                let o = observed[(i, j)];
                y[(i, j)] = o + (y[(i, j)] - o) * shrink;
            }
        }
    }
}

fn observed_distance(x: &DMatrix<f64>, observed: &DMatrix<f64>, mask: &ObservationMask) -> f64 {
    let (rows, cols) = x.shape();
    let mut d2 = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            if mask.is_revealed(i, j) {
                let d = x[(i, j)] - observed[(i, j)];
                d2 += d * d;
            }
        }
    }
    d2.sqrt()
}

/// Completes `observed` on the hidden positions of `mask` by nuclear-norm
/// minimization. Entries of `observed` at hidden positions are ignored.
pub fn complete(
    observed: &DenseMatrix,
    mask: &ObservationMask,
    settings: &CompletionSettings,
) -> Result<CompletionReport> {
    settings.validate()?;
    let (rows, cols) = observed.shape();
    if mask.rows() != rows || mask.cols() != cols {
        return Err(Error::dims(format!(
            "observed is {rows}x{cols}, mask is {}x{}",
            mask.rows(),
            mask.cols()
        )));
    }
    for i in 0..rows {
        for j in 0..cols {
            if mask.is_revealed(i, j) && !observed[(i, j)].is_finite() {
                return Err(Error::invalid(format!("observed entry ({i}, {j}) is not finite")));
            }
        }
    }

    let mut data = DMatrix::zeros(rows, cols);
    let mut scale2 = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            if mask.is_revealed(i, j) {
                data[(i, j)] = observed[(i, j)];
                scale2 += observed[(i, j)] * observed[(i, j)];
            }
        }
    }
    let data_norm = scale2.sqrt();
    let revealed = mask.revealed_count();

    let (solution, iterations, residual) = if mask.hidden_count() == 0 && settings.noise_radius == 0.0
    {
        (data.clone(), 0, 0.0)
    } else if data_norm <= settings.noise_radius || revealed == 0 {
        // Zero is feasible and has the smallest possible nuclear norm.
        (DMatrix::zeros(rows, cols), 0, 0.0)
    } else {
        // Work at unit RMS so the penalty is scale free.
        let scale = data_norm / (revealed as f64).sqrt();
        let scaled = &data / scale;
        let radius = settings.noise_radius / scale;
        let symmetric = mask.is_symmetric() && is_symmetric_on_mask(&scaled, mask);
        run_admm(&scaled, mask, radius, symmetric, settings)
            .map(|(x, it, res)| (x * scale, it, res))
            .map_err(|e| match e {
                Error::NotConverged {
                    iterations,
                    residual,
                    last_iterate,
                } => Error::NotConverged {
                    iterations,
                    residual,
                    last_iterate: Box::new(*last_iterate * scale),
                },
                other => other,
            })?
    };

    let nuclear_norm = solution.singular_values().iter().sum();
    let mut report = CompletionReport {
        numerical_rank: numerical_rank(&solution, settings.rank_threshold),
        matrix: solution,
        iterations,
        residual,
        nuclear_norm,
        kappa: mask.kappa(),
        rho: mask.rho(),
        recoverable: None,
        alpha: None,
        beta: None,
        bound_vacuous: false,
        error_bound: None,
    };
    if let Some(hint) = settings.structure {
        report.recoverable = Some(super::mask::recoverable(mask, hint.mu_u, hint.mu_v, hint.rank));
        let alpha = alpha_coefficient(mask, &hint);
        let beta = beta_coefficient(mask, &hint);
        report.alpha = Some(alpha);
        report.beta = beta;
        report.bound_vacuous = alpha >= 1.0 || beta.is_some_and(|b| b >= 1.0);
        if let Some(beta) = beta {
            if alpha < 1.0 && beta < 1.0 {
                report.error_bound = Some(noisy_error_bound(
                    settings.noise_radius,
                    rows,
                    cols,
                    alpha,
                    beta,
                ));
            }
        }
    }
    Ok(report)
}

fn is_symmetric_on_mask(m: &DMatrix<f64>, mask: &ObservationMask) -> bool {
    let n = m.nrows();
    (0..n).all(|i| {
        (0..i).all(|j| !mask.is_revealed(i, j) || (m[(i, j)] - m[(j, i)]).abs() <= 1e-12)
    })
}

const RELAXATION: f64 = 1.6;
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_EVERY: usize = 10;

fn run_admm(
    data: &DMatrix<f64>,
    mask: &ObservationMask,
    radius: f64,
    symmetric: bool,
    settings: &CompletionSettings,
) -> Result<(DMatrix<f64>, usize, f64)> {
    let (rows, cols) = data.shape();
    let data_norm = observed_distance(&DMatrix::zeros(rows, cols), data, mask);
    let mut rho = settings.penalty;
    let mut z = data.clone();
    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut x_prev = DMatrix::<f64>::zeros(rows, cols);
    let mut residual = f64::INFINITY;

    for it in 1..=settings.max_iterations {
        let (x, _) = shrink(&z - &u, 1.0 / rho, symmetric);

        let relaxed = &x * RELAXATION + &z * (1.0 - RELAXATION);
        let mut z_next = &relaxed + &u;
        project_feasible(&mut z_next, data, mask, radius);
        u += &relaxed - &z_next;

        let x_norm = x.norm().max(f64::MIN_POSITIVE);
        let change = (&x - &x_prev).norm() / x_norm;
        let violation = (observed_distance(&x, data, mask) - radius).max(0.0) / data_norm;
        residual = violation;

        if change < settings.tolerance && violation < settings.tolerance {
            let mut out = x;
            project_feasible(&mut out, data, mask, radius);
            return Ok((out, it, residual));
        }

        if it % BALANCE_EVERY == 0 {
            let primal = (&x - &z_next).norm();
            let dual = rho * (&z_next - &z).norm();
            if primal > BALANCE_RATIO * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > BALANCE_RATIO * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
        z = z_next;
        x_prev = x;
    }

    let mut last = x_prev;
    project_feasible(&mut last, data, mask, radius);
    Err(Error::NotConverged {
        iterations: settings.max_iterations,
        residual,
        last_iterate: Box::new(last),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::synth::{diagonal_mask, incoherent_factor};
    use nalgebra::DVector;
    use rand::Rng as _;

    fn rel_err(a: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
        (a - truth).norm() / truth.norm()
    }

    #[test]
    fn fully_observed_input_is_returned_unchanged() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 7.0]);
        let r = complete(&m, &ObservationMask::full(2, 3), &CompletionSettings::default()).unwrap();
        assert_eq!(r.matrix, m);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn rank_one_with_hidden_diagonal() {
        let v = DVector::from_fn(20, |i, _| 1.0 + 0.1 * i as f64);
        let truth = &v * v.transpose();
        let mut observed = truth.clone();
        observed.fill_diagonal(f64::NAN);
        let r = complete(&observed, &diagonal_mask(20), &CompletionSettings::default()).unwrap();
        assert!((&r.matrix - &truth).amax() <= 1e-6, "max err {}", (&r.matrix - &truth).amax());
        assert_eq!(r.numerical_rank, 1);
    }

    #[test]
    fn rank_three_with_diagonal_and_random_pairs_hidden() {
        let mut rng = seeded(11);
        let n = 40;
        let f = incoherent_factor(n, 3, 2.0, &mut rng).unwrap();
        let truth = &f * f.transpose();
        let mut hidden = vec![false; n * n];
        for i in 0..n {
            hidden[i * n + i] = true;
            let mut picked = 0;
            while picked < 3 {
                let j = rng.random_range(0..n);
                if j != i && !hidden[i * n + j] {
                    hidden[i * n + j] = true;
                    hidden[j * n + i] = true;
                    picked += 1;
                }
            }
        }
        let mask = ObservationMask::from_revealed(n, n, hidden.iter().map(|h| !h).collect()).unwrap();
        let r = complete(&truth, &mask, &CompletionSettings::default()).unwrap();
        assert!((&r.matrix - &truth).amax() <= 1e-6, "max err {}", (&r.matrix - &truth).amax());
        // the truth is feasible, so the minimizer cannot have a larger nuclear norm
        let truth_nuclear: f64 = truth.singular_values().iter().sum();
        assert!(r.nuclear_norm <= truth_nuclear * (1.0 + 1e-8));
    }

    #[test]
    fn noisy_solution_stays_within_the_data_ball() {
        let mut rng = seeded(5);
        let n = 30;
        let f = incoherent_factor(n, 2, 2.5, &mut rng).unwrap();
        let truth = &f * f.transpose();
        let mask = diagonal_mask(n);
        let delta = 1e-3;
        let noise = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut noise = &noise + noise.transpose();
        noise.fill_diagonal(0.0);
        noise *= delta / noise.norm();
        let observed = &truth + &noise;
        let settings = CompletionSettings {
            noise_radius: delta,
            ..Default::default()
        };
        let r = complete(&observed, &mask, &settings).unwrap();
        assert!(observed_distance(&r.matrix, &observed, &mask) <= delta * (1.0 + 1e-6));
        assert!(rel_err(&r.matrix, &truth) < 1e-2);
    }

    #[test]
    fn zero_is_returned_when_the_data_fit_in_the_noise_ball() {
        let m = DMatrix::from_element(3, 3, 1e-4);
        let settings = CompletionSettings {
            noise_radius: 1.0,
            ..Default::default()
        };
        let r = complete(&m, &diagonal_mask(3), &settings).unwrap();
        assert_eq!(r.matrix, DMatrix::zeros(3, 3));
    }

    #[test]
    fn iteration_cap_keeps_the_last_iterate_at_input_scale() {
        let v = DVector::from_fn(10, |i, _| 100.0 + i as f64);
        let truth = &v * v.transpose();
        let settings = CompletionSettings {
            max_iterations: 2,
            ..Default::default()
        };
        let mask = diagonal_mask(10);
        match complete(&truth, &mask, &settings) {
            Err(Error::NotConverged { last_iterate, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert!((last_iterate[(0, 1)] - truth[(0, 1)]).abs() <= 1e-9 * truth[(0, 1)]);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn bound_terms_match_direct_arithmetic() {
        let mask = diagonal_mask(10);
        let hint = StructureHint {
            rank: 2,
            mu_u: 1.5,
            mu_v: 1.5,
            lambda: Some(0.0),
        };
        // kappa = rho = 1 for a hidden diagonal
        let alpha = 1.5 * (1.5 / 10.0 + 1.5 / 10.0) * 2.0;
        assert!((alpha_coefficient(&mask, &hint) - alpha).abs() < 1e-15);
        let beta = 2.0 * (1.5f64 * 1.5 / 100.0).sqrt();
        assert!((beta_coefficient(&mask, &hint).unwrap() - beta).abs() < 1e-15);
        let bound = noisy_error_bound(1e-3, 10, 10, alpha, beta);
        let direct = 2e-3 + 2e-3 * 10f64.sqrt() / (1.0 - beta) * (1.0 + 1.0 / (1.0 - alpha)).sqrt();
        assert!((bound - direct).abs() < 1e-15);
        assert!(beta_coefficient(&mask, &StructureHint { lambda: None, ..hint }).is_none());
    }

    #[test]
    fn bound_grows_with_noise() {
        let mut last = 0.0;
        for delta in [1e-5, 1e-4, 1e-3, 1e-2] {
            let b = noisy_error_bound(delta, 20, 20, 0.3, 0.2);
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn mismatched_shapes_and_non_finite_data_are_rejected() {
        let m = DMatrix::zeros(3, 3);
        assert!(complete(&m, &diagonal_mask(4), &CompletionSettings::default()).is_err());
        let mut m = DMatrix::from_element(3, 3, 1.0);
        m[(0, 1)] = f64::INFINITY;
        assert!(complete(&m, &diagonal_mask(3), &CompletionSettings::default()).is_err());
    }
}
