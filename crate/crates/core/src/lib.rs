//! Completion of symmetric low-rank tensors from their multilinear entries,
//! and its use for learning mixtures of product distributions over the
//! hypercube `{-1, +1}^n` by the method of moments.

pub mod completion;
pub mod decomposition;
mod error;
pub mod linalg;
pub mod mixture;

pub mod rng;
pub mod synth;
pub mod tensor_completion;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
