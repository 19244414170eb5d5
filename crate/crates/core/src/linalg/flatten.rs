//! Reshaping symmetric tensors of order `2m` / `3m` into a matrix / cubic
//! tensor over `R^{n^m}`. Multi-indices in `[n]^m` are enumerated
//! lexicographically.

use nalgebra::DMatrix;

use super::symtensor::{decode_lex, SymmetricTensor};
use super::tensor3::Tensor3;
use crate::error::{Error, Result};

fn block_count(dim: usize, block: usize) -> Result<usize> {
    dim.checked_pow(block as u32)
        .ok_or_else(|| Error::invalid("flattened dimension overflows"))
}

fn require_complete(t: &SymmetricTensor) -> Result<()> {
    if !t.is_complete() {
        return Err(Error::invalid("cannot flatten a tensor with absent entries"));
    }
    Ok(())
}

/// `n^m x n^m` matrix with entry `(A, B) = T(A . B)` for an order-`2m` tensor.
pub fn flatten_even(t: &SymmetricTensor) -> Result<DMatrix<f64>> {
    if !t.order().is_multiple_of(2) {
        return Err(Error::dims(format!("order {} is not even", t.order())));
    }
    require_complete(t)?;
    let m = t.order() / 2;
    let n = t.dim();
    let side = block_count(n, m)?;
    let mut out = DMatrix::zeros(side, side);
    let mut idx = vec![0; 2 * m];
    for a in 0..side {
        decode_lex(a, n, &mut idx[..m]);
        for b in a..side {
            decode_lex(b, n, &mut idx[m..]);
            let v = t.value(&idx);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Cubic tensor over `R^{n^m}` with entry `(A, B, C) = T(A . B . C)` for an
/// order-`3m` tensor.
pub fn flatten_triple(t: &SymmetricTensor) -> Result<Tensor3> {
    if !t.order().is_multiple_of(3) {
        return Err(Error::dims(format!("order {} is not a multiple of 3", t.order())));
    }
    require_complete(t)?;
    let m = t.order() / 3;
    let n = t.dim();
    let side = block_count(n, m)?;
    side.checked_pow(3)
        .ok_or_else(|| Error::invalid("flattened tensor too large"))?;
    let mut out = Tensor3::zeros(side);
    let mut idx = vec![0; 3 * m];
    for a in 0..side {
        decode_lex(a, n, &mut idx[..m]);
        for b in a..side {
            decode_lex(b, n, &mut idx[m..2 * m]);
            for c in b..side {
                decode_lex(c, n, &mut idx[2 * m..]);
                let v = t.value(&idx);
                for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    out.set(x, y, z, v);
                }
            }
        }
    }
    Ok(out)
}
