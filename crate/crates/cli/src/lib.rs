//! Experiment runner for `symcomplete`: one flat JSON config per run,
//! deterministic outputs, JSON reports with a timing sidecar.

mod config;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, Mode};
pub use run::{run, RunOutput, StageTiming};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: symcomplete::Error,
    },

    #[error(transparent)]
    Core(#[from] symcomplete::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        if self.exit_code() == EXIT_NUMERICAL {
            "numerical"
        } else {
            "validation"
        }
    }

    /// Stage tag of a pipeline failure, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CliError::Core(symcomplete::Error::Stage { stage, .. }) => Some(stage),
            _ => None,
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "stage": self.stage(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}
