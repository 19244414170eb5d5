//! Dense containers, canonical symmetric-tensor storage, slicing,
//! flattening, incoherence and the trilinear transform `T(W, W, W)`.

pub mod flatten;
pub mod index;
pub mod io;
pub mod subspace;
pub mod symtensor;
pub mod tensor3;

pub use flatten::{flatten_even, flatten_triple};
pub use index::{
    histogram, is_multilinear, multiset_count, Combinations, Histogram, IndexString,
    MultisetRanker, SortedIndices,
};
pub use subspace::{incoherence, tensor_power, SubspaceBasis};
pub use symtensor::{symmetrize, DenseTensor, SymmetricTensor};
pub use tensor3::Tensor3;

/// Dense real matrix.
pub type DenseMatrix = nalgebra::DMatrix<f64>;

/// `T(W, W, W)` for a cubic tensor `T` over `R^n` and `W` of shape `n x k`.
pub fn tensor_apply(t: &Tensor3, w: &DenseMatrix) -> crate::Result<Tensor3> {
    t.apply(w)
}
