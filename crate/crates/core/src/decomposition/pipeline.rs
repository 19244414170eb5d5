//! End-to-end learning: moments (exact or empirical), completion of the
//! order-`2m` and `3m` moment tensors, flattening, whitening, power
//! iteration and `m`-th roots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    default_restarts, recover_parameters, tensor_power_iteration, unflatten_root, whiten, Score,
};
use crate::error::{Error, Result};
use crate::linalg::{flatten_even, flatten_triple, SymmetricTensor};
use crate::mixture::{
    empirical_multilinear_moments, min_odd_power, moment_accuracy, required_samples, MomentRequest,
    SampleSet,
};
use crate::rng::derive_seed;
use crate::tensor_completion::{complete_symmetric, predicted_error, TensorCompletionReport, TensorCompletionSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnSettings {
    pub completion: TensorCompletionSettings,
    /// Random starts per component; `20 + 10 k` when absent.
    pub restarts: Option<usize>,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self {
            completion: TensorCompletionSettings::default(),
            restarts: None,
            iterations: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSettings {
    pub learn: LearnSettings,
    /// Failure probability used for the achieved-accuracy estimate.
    pub delta: f64,
    /// Requested moment accuracy. A warning is recorded when the sample
    /// count is below what it requires.
    pub target_epsilon: Option<f64>,
}

impl Default for SampledSettings {
    fn default() -> Self {
        Self {
            learn: LearnSettings::default(),
            delta: 0.01,
            target_epsilon: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletionStage {
    pub order: usize,
    /// True when the input already had every entry.
    pub skipped: bool,
    pub report: Option<TensorCompletionReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleDiagnostics {
    pub samples: usize,
    pub delta: f64,
    /// Accuracy every moment estimate reaches with probability `1 - delta`.
    pub epsilon: f64,
    pub target_epsilon: Option<f64>,
    pub required_samples: Option<u64>,
    /// Frobenius bounds on the completed order-`2m` and `3m` tensors.
    pub predicted_error_2m: f64,
    pub predicted_error_3m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub weight_sum: f64,
    /// Set when the weights sum outside `[0.5, 1.5]`.
    pub weight_sum_suspicious: bool,
    pub whitening_eigenvalues: Vec<f64>,
    pub sigma_k: f64,
    pub restarts: usize,
    pub power_residuals: Vec<f64>,
    pub completion: Vec<CompletionStage>,
    pub sampling: Option<SampleDiagnostics>,
    pub seeds: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
    pub score: Option<Score>,
}

fn complete_stage(
    t: &SymmetricTensor,
    settings: &TensorCompletionSettings,
    stage: &'static str,
) -> Result<(SymmetricTensor, CompletionStage)> {
    if t.is_complete() {
        return Ok((
            t.clone(),
            CompletionStage {
                order: t.order(),
                skipped: true,
                report: None,
            },
        ));
    }
    let report = complete_symmetric(t, settings).map_err(|e| e.in_stage(stage))?;
    let tensor = report.tensor.clone();
    Ok((
        tensor,
        CompletionStage {
            order: t.order(),
            skipped: false,
            report: Some(report),
        },
    ))
}

/// Recovers `k` centers and weights from the order-`2m` and `3m` moment
/// tensors `sum w_i v_i^{(x)2m}` and `sum w_i v_i^{(x)3m}`. Tensors with
/// absent entries are completed first; complete tensors are used as given.
pub fn learn_mixture_exact(
    t2m: &SymmetricTensor,
    t3m: &SymmetricTensor,
    k: usize,
    m: usize,
    settings: &LearnSettings,
) -> Result<RecoveryReport> {
    if m == 0 || m.is_multiple_of(2) {
        return Err(Error::invalid(format!("power m = {m} must be odd")));
    }
    if t2m.order() != 2 * m || t3m.order() != 3 * m {
        return Err(Error::dims(format!(
            "expected orders {} and {}, got {} and {}",
            2 * m,
            3 * m,
            t2m.order(),
            t3m.order()
        )));
    }
    if t2m.dim() != t3m.dim() {
        return Err(Error::dims("moment tensors have different dimensions"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let n = t2m.dim();
    let (t2, stage2) = complete_stage(t2m, &settings.completion, "completion of order 2m")?;
    let (t3, stage3) = complete_stage(t3m, &settings.completion, "completion of order 3m")?;

    let flat2 = flatten_even(&t2).map_err(|e| e.in_stage("flattening"))?;
    let flat3 = flatten_triple(&t3).map_err(|e| e.in_stage("flattening"))?;
    let map = whiten(&flat2, k).map_err(|e| e.in_stage("whitening"))?;
    let whitened = flat3.apply(&map.whiten).map_err(|e| e.in_stage("whitening"))?;

    let restarts = settings.restarts.unwrap_or_else(|| default_restarts(k));
    let tpi_seed = derive_seed(settings.seed, "power-iteration");
    let dec = tensor_power_iteration(&whitened, k, restarts, settings.iterations, tpi_seed)
        .map_err(|e| e.in_stage("power iteration"))?;
    let (flats, weights) = recover_parameters(&dec, &map).map_err(|e| e.in_stage("recovery"))?;
    let centers = flats
        .iter()
        .map(|x| unflatten_root(x, m, n).map(|v| v.iter().cloned().collect()))
        .collect::<Result<Vec<Vec<f64>>>>()
        .map_err(|e| e.in_stage("roots"))?;

    let weight_sum: f64 = weights.iter().sum();
    let weight_sum_suspicious = !(0.5..=1.5).contains(&weight_sum);
    let mut warnings = Vec::new();
    if weight_sum_suspicious {
        warnings.push(format!("recovered weights sum to {weight_sum}"));
    }
    for stage in [&stage2, &stage3] {
        if let Some(r) = &stage.report {
            if !r.feasible {
                warnings.push(format!(
                    "order-{} completion outside its guarantee: 4 mu r m / n = {}",
                    r.order, r.feasibility
                ));
            }
        }
    }
    let mut seeds = BTreeMap::new();
    seeds.insert("power-iteration".to_string(), tpi_seed);
    Ok(RecoveryReport {
        n,
        k,
        m,
        centers,
        weights,
        lambdas: dec.lambdas.clone(),
        weight_sum,
        weight_sum_suspicious,
        sigma_k: map.sigma_k(),
        whitening_eigenvalues: map.eigenvalues.clone(),
        restarts,
        power_residuals: dec.residuals,
        completion: vec![stage2, stage3],
        sampling: None,
        seeds,
        warnings,
        score: None,
    })
}

/// Estimates the order-`2m` and `3m` multilinear moments from samples, with
/// `m` the smallest odd power for `k` centers at separation `eta_hint`
/// (1 when absent), then runs `learn_mixture_exact`.
pub fn learn_mixture_sampled(
    samples: &SampleSet,
    k: usize,
    eta_hint: Option<f64>,
    settings: &SampledSettings,
) -> Result<RecoveryReport> {
    if !(settings.delta > 0.0 && settings.delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    let m = min_odd_power(k, eta_hint.unwrap_or(1.0))?;
    let n = samples.n();
    if n < 3 * m {
        return Err(Error::invalid(format!(
            "dimension {n} is too small for order-{} moments",
            3 * m
        )));
    }
    let t2 = empirical_multilinear_moments(samples, 2 * m).map_err(|e| e.in_stage("moment estimation"))?;
    let t3 = empirical_multilinear_moments(samples, 3 * m).map_err(|e| e.in_stage("moment estimation"))?;

    let count = samples.len();
    let epsilon = moment_accuracy(count, settings.delta, n, m);
    let (slice2, total2) = predicted_error(epsilon, n, 2 * m);
    let (_, total3) = predicted_error(epsilon, n, 3 * m);
    let mut learn = settings.learn.clone();
    learn.completion.input_noise = epsilon;
    // epsilon bounds every entry at once and is far above the typical error;
    // as a per-slice slack it over-shrinks the completion
    learn.completion.fit_within_noise = false;
    // copies of one entry from different slices may differ by the slice error
    learn.completion.duplicate_tolerance = learn.completion.duplicate_tolerance.max(2.0 * slice2);

    let mut report = learn_mixture_exact(&t2, &t3, k, m, &learn)?;
    let mut required = None;
    if let Some(target) = settings.target_epsilon {
        let req = MomentRequest::new(m, target, settings.delta)?;
        let need = required_samples(&req, n);
        if (count as u64) < need {
            report.warnings.push(format!(
                "{count} samples give moment accuracy {epsilon:.3e}; {need} are needed for {target}"
            ));
        }
        required = Some(need);
    }
    if let Some(seed) = samples.seed() {
        report.seeds.insert("samples".to_string(), seed);
    }
    report.sampling = Some(SampleDiagnostics {
        samples: count,
        delta: settings.delta,
        epsilon,
        target_epsilon: settings.target_epsilon,
        required_samples: required,
        predicted_error_2m: total2,
        predicted_error_3m: total3,
    });
    Ok(report)
}
