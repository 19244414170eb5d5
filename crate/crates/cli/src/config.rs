use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GenMixture,
    Sample,
    Moments,
    CompleteMatrix,
    CompleteTensor,
    Learn,
    LearnExact,
    Eval,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::GenMixture => "gen-mixture",
            Mode::Sample => "sample",
            Mode::Moments => "moments",
            Mode::CompleteMatrix => "complete-matrix",
            Mode::CompleteTensor => "complete-tensor",
            Mode::Learn => "learn",
            Mode::LearnExact => "learn-exact",
            Mode::Eval => "eval",
        }
    }

    /// Modes that draw random numbers and therefore need a seed.
    pub fn is_randomized(self) -> bool {
        matches!(self, Mode::GenMixture | Mode::Sample | Mode::Learn | Mode::LearnExact)
    }
}

/// One experiment. Flat JSON; unknown keys are rejected.
///
/// Field meanings that depend on the mode:
/// * `m`: tensor order for `moments`, odd power for `learn-exact`;
/// * `r`, `mu`: rank and incoherence for the completion modes (`mu` also
///   bounds the span incoherence of `gen-mixture` centers when set);
/// * `epsilon`: input noise level for `complete-tensor`, target moment
///   accuracy for `learn`;
/// * `delta`: failure probability of the moment estimates in `learn`;
/// * `noise_radius`: Frobenius slack of `complete-matrix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Number of samples to draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `learn-exact`: keep only the multilinear moment entries, as sampled
    /// data would provide, and complete the rest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multilinear: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            input: None,
            mask: None,
            mixture: None,
            samples: None,
            out: None,
            report: None,
            n: None,
            k: None,
            r: None,
            m: None,
            count: None,
            eta: None,
            mu: None,
            lambda: None,
            epsilon: None,
            delta: None,
            noise_radius: None,
            seed: None,
            multilinear: None,
            tol: None,
            max_iterations: None,
            restarts: None,
            iterations: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Lowercase hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks that every field the mode needs is present and in range.
    pub fn validate(&self) -> Result<(), CliError> {
        let missing = |field: &str| CliError::Config(format!("`{}` needs `{field}`", self.mode.name()));
        if self.mode.is_randomized() && self.seed.is_none() {
            return Err(missing("seed"));
        }
        match self.mode {
            Mode::GenMixture => {
                self.n.ok_or_else(|| missing("n"))?;
                self.k.ok_or_else(|| missing("k"))?;
            }
            Mode::Sample => {
                self.mixture.as_ref().ok_or_else(|| missing("mixture"))?;
                self.count.ok_or_else(|| missing("count"))?;
            }
            Mode::Moments => {
                self.samples.as_ref().ok_or_else(|| missing("samples"))?;
                self.m.ok_or_else(|| missing("m"))?;
            }
            Mode::CompleteMatrix => {
                self.input.as_ref().ok_or_else(|| missing("input"))?;
                self.mask.as_ref().ok_or_else(|| missing("mask"))?;
            }
            Mode::CompleteTensor => {
                self.input.as_ref().ok_or_else(|| missing("input"))?;
            }
            Mode::Learn => {
                self.samples.as_ref().ok_or_else(|| missing("samples"))?;
                self.k.ok_or_else(|| missing("k"))?;
            }
            Mode::LearnExact => {
                self.mixture.as_ref().ok_or_else(|| missing("mixture"))?;
                self.m.ok_or_else(|| missing("m"))?;
            }
            Mode::Eval => {
                self.mixture.as_ref().ok_or_else(|| missing("mixture"))?;
                self.input.as_ref().ok_or_else(|| missing("input"))?;
            }
        }
        for (name, value) in [
            ("eta", self.eta),
            ("mu", self.mu),
            ("epsilon", self.epsilon),
            ("tol", self.tol),
        ] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("`{name}` must be positive, got {v}")));
                }
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(CliError::Config(format!("`delta` must lie in (0, 1), got {d}")));
            }
        }
        if let Some(r) = self.noise_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(CliError::Config(format!("`noise_radius` must be non-negative, got {r}")));
            }
        }
        for (name, value) in [
            ("n", self.n),
            ("k", self.k),
            ("r", self.r),
            ("m", self.m),
            ("count", self.count),
            ("max_iterations", self.max_iterations),
            ("restarts", self.restarts),
            ("iterations", self.iterations),
        ] {
            if value == Some(0) {
                return Err(CliError::Config(format!("`{name}` must be at least 1")));
            }
        }
        Ok(())
    }
}
