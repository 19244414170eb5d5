//! Low-rank matrix completion with adversarially hidden entries.

mod mask;
mod solver;

pub use mask::{recoverability_margin, recoverable, ObservationMask};
pub use solver::{
    alpha_coefficient, beta_coefficient, complete, noisy_error_bound, CompletionReport,
    CompletionSettings, StructureHint,
};
