use serde::{Deserialize, Serialize};

use super::RecoveryReport;
use crate::error::{Error, Result};
use crate::mixture::ProductMixture;

/// Minimum-cost perfect matching of a square cost matrix (row-major,
/// `k x k`). Returns `assignment[row] = column`.
pub fn hungarian(cost: &[f64], k: usize) -> Vec<usize> {
    assert_eq!(cost.len(), k * k, "cost matrix must be k x k");
    // potentials formulation with 1-based sentinels
    let inf = f64::INFINITY;
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; k];
    for j in 1..=k {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// `permutation[i]` is the true center matched to estimate `i`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub vector_errors: Vec<f64>,
    pub weight_errors: Vec<f64>,
    pub max_vector_error: f64,
    pub max_weight_error: f64,
}

/// Matches estimated centers to true ones minimizing
/// `sum_i |s_i v_{pi(i)} - v_hat_i|` over permutations and signs.
pub fn match_and_score(truth: &ProductMixture, est: &RecoveryReport) -> Result<Score> {
    match_centers(truth, &est.centers, &est.weights)
}

/// [`match_and_score`] on bare center and weight lists.
pub fn match_centers(truth: &ProductMixture, centers: &[Vec<f64>], weights: &[f64]) -> Result<Score> {
    let k = truth.k();
    if centers.len() != k || weights.len() != k {
        return Err(Error::dims(format!(
            "{} estimated centers and {} weights for {k} true ones",
            centers.len(),
            weights.len()
        )));
    }
    if centers.iter().any(|c| c.len() != truth.n()) {
        return Err(Error::dims("estimated centers have the wrong dimension"));
    }
    let mut cost = vec![0.0; k * k];
    let mut sign = vec![1.0; k * k];
    for (i, c) in centers.iter().enumerate() {
        for (j, v) in truth.vectors().iter().enumerate() {
            let plus: f64 = c.iter().zip(v.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let minus: f64 = c.iter().zip(v.iter()).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
            if minus < plus {
                cost[i * k + j] = minus;
                sign[i * k + j] = -1.0;
            } else {
                cost[i * k + j] = plus;
            }
        }
    }
    let permutation = hungarian(&cost, k);
    let signs: Vec<f64> = (0..k).map(|i| sign[i * k + permutation[i]]).collect();
    let vector_errors: Vec<f64> = (0..k).map(|i| cost[i * k + permutation[i]]).collect();
    let weight_errors: Vec<f64> = (0..k)
        .map(|i| (weights[i] - truth.weights()[permutation[i]]).abs())
        .collect();
    Ok(Score {
        max_vector_error: vector_errors.iter().cloned().fold(0.0, f64::max),
        max_weight_error: weight_errors.iter().cloned().fold(0.0, f64::max),
        permutation,
        signs,
        vector_errors,
        weight_errors,
    })
}
