//! Recovery of `(w_i, x_i)` from `M = sum w_i x_i x_i^T` and
//! `T = sum w_i x_i^{(x)3}` with linearly independent `x_i`: whiten with `M`,
//! decompose the whitened third-order tensor by power iteration, then undo
//! the whitening.

mod matching;
mod pipeline;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use matching::{hungarian, match_and_score, match_centers, Score};
pub use pipeline::{
    learn_mixture_exact, learn_mixture_sampled, CompletionStage, LearnSettings, RecoveryReport,
    SampleDiagnostics, SampledSettings,
};

use crate::error::{Error, Result};
use crate::linalg::Tensor3;
use crate::rng::stream;
use crate::synth::gaussian_vector;

const RANK_TOL: f64 = 1e-12;

/// `U = V_k D_k^{-1/2}` from the top-`k` eigenpairs of `M`, so that
/// `U^T M U = I_k`, together with the un-whitening map `B = V_k D_k^{1/2}`.
#[derive(Clone, Debug)]
pub struct WhiteningMap {
    pub whiten: DMatrix<f64>,
    pub unwhiten: DMatrix<f64>,
    /// Retained eigenvalues, decreasing.
    pub eigenvalues: Vec<f64>,
}

impl WhiteningMap {
    /// Estimate of `sigma_k(M)`.
    pub fn sigma_k(&self) -> f64 {
        *self.eigenvalues.last().expect("k >= 1")
    }
}

pub fn whiten(m: &DMatrix<f64>, k: usize) -> Result<WhiteningMap> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::dims(format!("whitening needs a square matrix, got {}x{}", n, m.ncols())));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot whiten to rank {k} in dimension {n}")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-9 * m.amax().max(1.0) {
        return Err(Error::invalid(format!("matrix is not symmetric (deviation {asym:e})")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let lam_k = eig.eigenvalues[order[k - 1]];
    if !(lam_k > 0.0) || lam_k < RANK_TOL * top {
        return Err(Error::RankDeficient {
            index: k,
            value: lam_k,
            top,
        });
    }
    let mut whiten = DMatrix::zeros(n, k);
    let mut unwhiten = DMatrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &i) in order[..k].iter().enumerate() {
        let lam = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        whiten.set_column(c, &(v / lam.sqrt()));
        unwhiten.set_column(c, &(v * lam.sqrt()));
        eigenvalues.push(lam);
    }
    Ok(WhiteningMap {
        whiten,
        unwhiten,
        eigenvalues,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthogonalDecomposition {
    /// Components in extraction order (decreasing `lambda`).
    pub vectors: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub restarts: usize,
    pub iterations: usize,
    /// `|T'(I, u, u) - lambda u|` for the deflated tensor `T'` each component
    /// was extracted from.
    pub residuals: Vec<f64>,
}

impl OrthogonalDecomposition {
    pub fn vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.vectors[i])
    }
}

/// Default number of random starts per component.
pub fn default_restarts(k: usize) -> usize {
    20 + 10 * k
}

fn power_steps(t: &Tensor3, mut u: DVector<f64>, iterations: usize) -> DVector<f64> {
    for _ in 0..iterations {
        let next = t.contract_two(&u);
        let norm = next.norm();
        if !(norm > 0.0) {
            break;
        }
        let next = next / norm;
        let change = (&next - &u).norm();
        u = next;
        if change < 1e-15 {
            break;
        }
    }
    u
}

/// Greedy deflation: `k` times, run `restarts` power iterations
/// `u <- T(I, u, u) / |T(I, u, u)|` from random unit vectors, keep the one
/// with the largest `lambda = T(u, u, u)`, polish it with another
/// `iterations` steps and subtract `lambda u^{(x)3}`.
pub fn tensor_power_iteration(
    t: &Tensor3,
    k: usize,
    restarts: usize,
    iterations: usize,
    seed: u64,
) -> Result<OrthogonalDecomposition> {
    if !t.is_symmetric(1e-9 * t.frobenius_norm().max(1.0)) {
        return Err(Error::invalid("power iteration needs a symmetric tensor"));
    }
    if k == 0 || k > t.dim() || restarts == 0 {
        return Err(Error::invalid(format!(
            "need 1 <= k <= {} and at least one restart, got k = {k}, restarts = {restarts}",
            t.dim()
        )));
    }
    let d = t.dim();
    let mut current = t.clone();
    let mut out = OrthogonalDecomposition {
        vectors: Vec::with_capacity(k),
        lambdas: Vec::with_capacity(k),
        restarts,
        iterations,
        residuals: Vec::with_capacity(k),
    };
    for c in 0..k {
        let tensor = &current;
        let candidates: Vec<(f64, DVector<f64>)> = (0..restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, (c * restarts + r) as u64);
                let start = gaussian_vector(d, &mut rng).normalize();
                let u = power_steps(tensor, start, iterations);
                (tensor.contract_three(&u), u)
            })
            .collect();
        let mut best = 0;
        for (i, cand) in candidates.iter().enumerate() {
            if cand.0 > candidates[best].0 {
                best = i;
            }
        }
        let u = power_steps(tensor, candidates[best].1.clone(), iterations);
        let lambda = tensor.contract_three(&u);
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveComponent(lambda));
        }
        let residual = (tensor.contract_two(&u) - &u * lambda).norm();
        current.add_rank_one(-lambda, &u);
        out.vectors.push(u.iter().cloned().collect());
        out.lambdas.push(lambda);
        out.residuals.push(residual);
    }
    Ok(out)
}

/// `x_i = lambda_i B u_i` and `w_i = 1 / lambda_i^2`.
pub fn recover_parameters(
    dec: &OrthogonalDecomposition,
    map: &WhiteningMap,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(dec.lambdas.len());
    let mut ws = Vec::with_capacity(dec.lambdas.len());
    for (i, &lambda) in dec.lambdas.iter().enumerate() {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveComponent(lambda));
        }
        let u = dec.vector(i);
        if u.len() != map.unwhiten.ncols() {
            return Err(Error::dims("decomposition and whitening ranks differ"));
        }
        xs.push(&map.unwhiten * u * lambda);
        ws.push(1.0 / (lambda * lambda));
    }
    Ok((xs, ws))
}

/// Reads `v(j)` back from `v^{(x)m}` flattened in lexicographic order: the
/// signed `m`-th root of the entry at `(j, ..., j)`, clamped to `[-1, 1]`.
pub fn unflatten_root(flat: &DVector<f64>, m: usize, n: usize) -> Result<DVector<f64>> {
    if m.is_multiple_of(2) {
        return Err(Error::invalid(format!("root order {m} must be odd")));
    }
    let len = n
        .checked_pow(m as u32)
        .ok_or_else(|| Error::invalid("flattened dimension overflows"))?;
    if flat.len() != len {
        return Err(Error::dims(format!("expected {len} entries, got {}", flat.len())));
    }
    // position of (j, ..., j) is j (1 + n + ... + n^{m-1})
    let stride: usize = (0..m).map(|t| n.pow(t as u32)).sum();
    Ok(DVector::from_fn(n, |j, _| {
        let c = flat[j * stride];
        (c.signum() * c.abs().powf(1.0 / m as f64)).clamp(-1.0, 1.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::subspace::tensor_power;
    use crate::rng::seeded;
    use crate::synth::random_orthonormal;

    fn e(n: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn whitening_identity_and_scalar_case() {
        let w = whiten(&DMatrix::identity(4, 4), 4).unwrap();
        assert!((w.whiten.transpose() * &w.whiten - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
        let m = &e(3, 0) * e(3, 0).transpose() * 4.0;
        let w = whiten(&m, 1).unwrap();
        assert!((w.whiten.column(0).abs() - e(3, 0) / 2.0).amax() < 1e-15);
        assert!(matches!(whiten(&m, 2), Err(Error::RankDeficient { index: 2, .. })));
    }

    #[test]
    fn whitened_weighted_vectors_are_orthonormal() {
        let mut rng = seeded(1);
        let vs: Vec<DVector<f64>> = (0..3).map(|_| gaussian_vector(7, &mut rng)).collect();
        let ws = [0.2, 0.3, 0.5];
        let m = vs
            .iter()
            .zip(ws)
            .fold(DMatrix::zeros(7, 7), |acc, (v, w)| acc + v * v.transpose() * w);
        let map = whiten(&m, 3).unwrap();
        assert!((map.whiten.transpose() * &m * &map.whiten - DMatrix::<f64>::identity(3, 3)).amax() < 1e-8);
        let us: Vec<DVector<f64>> = vs.iter().zip(ws).map(|(v, w)| map.whiten.transpose() * v * w.sqrt()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((us[i].dot(&us[j]) - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn single_component_is_a_fixed_point() {
        let t = Tensor3::from_components(&[2.0], &[e(1, 0)]).unwrap();
        let dec = tensor_power_iteration(&t, 1, 5, 10, 0).unwrap();
        assert!((dec.lambdas[0] - 2.0).abs() < 1e-15);
        assert!((dec.vectors[0][0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn axis_components_are_recovered_in_decreasing_order() {
        let t = Tensor3::from_components(&[1.0, 2.0, 3.0], &[e(3, 0), e(3, 1), e(3, 2)]).unwrap();
        let dec = tensor_power_iteration(&t, 3, default_restarts(3), 100, 7).unwrap();
        for (c, (lambda, axis)) in [(3.0, 2), (2.0, 1), (1.0, 0)].into_iter().enumerate() {
            assert!((dec.lambdas[c] - lambda).abs() < 1e-8);
            assert!((dec.vector(c) - e(3, axis)).norm() < 1e-8);
        }
    }

    #[test]
    fn noisy_components_obey_the_perturbation_bounds() {
        let mut rng = seeded(4);
        let k = 4;
        let u = random_orthonormal(k, k, &mut rng);
        let lambdas = [1.0, 1.5, 2.0, 3.0];
        let us: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
        let clean = Tensor3::from_components(&lambdas, &us).unwrap();
        let raw = Tensor3::from_fn(k, |_, _, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let noise = Tensor3::from_fn(k, |a, b, c| {
            [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
                .iter()
                .map(|&(x, y, z)| raw.get(x, y, z))
                .sum::<f64>()
                / 6.0
        });
        let beta = 1e-4;
        let scale = beta / noise.frobenius_norm();
        let noise = Tensor3::from_fn(k, |a, b, c| noise.get(a, b, c) * scale);
        let dec = tensor_power_iteration(&(&clean + &noise), k, default_restarts(k), 100, 3).unwrap();
        for (i, &lambda) in lambdas.iter().enumerate() {
            let (j, err) = (0..k)
                .map(|j| (j, (dec.vector(j) - &us[i]).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(err <= 8.0 * beta / lambda, "component {i}: {err}");
            assert!((dec.lambdas[j] - lambda).abs() <= 5.0 * beta);
        }
    }

    #[test]
    fn odd_order_absorbs_negative_coefficients_and_zero_is_rejected() {
        // -e0^{(x)3} = (-e0)^{(x)3}
        let t = Tensor3::from_components(&[-1.0], &[e(2, 0)]).unwrap();
        let dec = tensor_power_iteration(&t, 1, 4, 50, 0).unwrap();
        assert!((dec.lambdas[0] - 1.0).abs() < 1e-12);
        assert!((dec.vector(0) + e(2, 0)).norm() < 1e-12);
        assert!(matches!(
            tensor_power_iteration(&Tensor3::zeros(2), 1, 4, 50, 0),
            Err(Error::NonPositiveComponent(_))
        ));
    }

    #[test]
    fn weights_come_back_as_inverse_squares() {
        let ws = [0.2, 0.3, 0.5];
        let dec = OrthogonalDecomposition {
            vectors: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            lambdas: ws.iter().map(|w: &f64| 1.0 / w.sqrt()).collect(),
            restarts: 1,
            iterations: 1,
            residuals: vec![0.0; 3],
        };
        let map = WhiteningMap {
            whiten: DMatrix::identity(3, 3),
            unwhiten: DMatrix::identity(3, 3),
            eigenvalues: vec![1.0; 3],
        };
        let (_, got) = recover_parameters(&dec, &map).unwrap();
        for (a, b) in got.iter().zip(ws) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn roots_of_exact_and_perturbed_powers() {
        let v = DVector::from_vec(vec![0.5, -0.25, 0.0, 1.0]);
        let flat = tensor_power(&v, 3);
        let back = unflatten_root(&flat, 3, 4).unwrap();
        assert!((back - &v).amax() < 1e-15);
        let mut noisy = flat.clone();
        noisy.iter_mut().for_each(|x| *x += 1e-6);
        // d/dc c^{1/3} at c = 1/8 is 4/3
        assert!((unflatten_root(&noisy, 3, 4).unwrap()[0] - 0.5).abs() <= 2e-6);
        let over = DVector::from_element(4, 1.5);
        assert!(unflatten_root(&over, 1, 4).unwrap().iter().all(|&x| x == 1.0));
        assert!(unflatten_root(&flat, 2, 8).is_err());
    }
}
