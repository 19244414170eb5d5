use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal basis (as columns) of an `r`-dimensional subspace of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Accepts columns that are orthonormal to within `1e-10`.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let r = basis.ncols();
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::<f64>::identity(r, r)).amax();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("columns are not orthonormal (deviation {dev:e})")));
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis of the span of the given vectors. Directions with
    /// singular value below `rel_tol * sigma_max` are dropped.
    pub fn span_of(vectors: &[DVector<f64>], rel_tol: f64) -> Result<Self> {
        let n = vectors.first().map(|v| v.len()).ok_or(Error::EmptySubspace)?;
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::dims("spanning vectors must share a dimension"));
        }
        let stacked = DMatrix::from_columns(vectors);
        Self::column_space(&stacked, rel_tol)
    }

    /// Orthonormal basis of the column space of `m`.
    pub fn column_space(m: &DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| top > 0.0 && s > rel_tol * top)
            .map(|(i, _)| i)
            .collect();
        let cols: Vec<DVector<f64>> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
        if cols.is_empty() {
            return Ok(Self {
                basis: DMatrix::zeros(m.nrows(), 0),
            });
        }
        Ok(Self {
            basis: DMatrix::from_columns(&cols),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `||Proj_U(e_i)||^2`, the squared norm of row `i` of the basis.
    pub fn leverage(&self, i: usize) -> f64 {
        self.basis.row(i).norm_squared()
    }

    /// `(n / r) max_i ||Proj_U(e_i)||^2`, in `[1, n / r]`.
    pub fn incoherence(&self) -> Result<f64> {
        incoherence(self)
    }
}

/// Incoherence of a subspace: `(n / r) max_i ||Proj_U(e_i)||^2`.
pub fn incoherence(basis: &SubspaceBasis) -> Result<f64> {
    let r = basis.rank();
    if r == 0 {
        return Err(Error::EmptySubspace);
    }
    let n = basis.ambient_dim();
    let max_leverage = (0..n).map(|i| basis.leverage(i)).fold(0.0, f64::max);
    Ok(n as f64 / r as f64 * max_leverage)
}

/// `v^{(x) t}` flattened in lexicographic index order.
pub fn tensor_power(v: &DVector<f64>, t: usize) -> DVector<f64> {
    let mut out = DVector::from_element(1, 1.0);
    for _ in 0..t {
        out = out.kronecker(v);
    }
    out
}
