use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense cubic order-3 tensor in `R^{d x d x d}`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim * dim {
            return Err(Error::dims(format!(
                "order-3 tensor of dimension {dim} needs {} entries, got {}",
                dim * dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    data.push(f(a, b, c));
                }
            }
        }
        Self { dim, data }
    }

    /// `sum_i lambda_i u_i^{(x)3}`.
    pub fn from_components(lambdas: &[f64], vectors: &[DVector<f64>]) -> Result<Self> {
        let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
        if lambdas.len() != vectors.len() || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::dims("components must share a dimension"));
        }
        let mut t = Self::zeros(dim);
        for (l, v) in lambdas.iter().zip(vectors) {
            t.add_rank_one(*l, v);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let d = self.dim;
        for a in 0..d {
            for b in a..d {
                for c in b..d {
                    let v = self.get(a, b, c);
                    let others = [
                        self.get(a, c, b),
                        self.get(b, a, c),
                        self.get(b, c, a),
                        self.get(c, a, b),
                        self.get(c, b, a),
                    ];
                    if others.iter().any(|o| (o - v).abs() > tol) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// `self += lambda * u (x) u (x) u`.
    pub fn add_rank_one(&mut self, lambda: f64, u: &DVector<f64>) {
        let d = self.dim;
        for a in 0..d {
            let la = lambda * u[a];
            for b in 0..d {
                let lab = la * u[b];
                let row = &mut self.data[(a * d + b) * d..(a * d + b + 1) * d];
                for (c, slot) in row.iter_mut().enumerate() {
                    *slot += lab * u[c];
                }
            }
        }
    }

    /// The vector `T(I, u, u)`.
    pub fn contract_two(&self, u: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        DVector::from_fn(d, |a, _| {
            let mut acc = 0.0;
            for b in 0..d {
                let row = &self.data[(a * d + b) * d..(a * d + b + 1) * d];
                let inner: f64 = row.iter().zip(u.iter()).map(|(t, x)| t * x).sum();
                acc += u[b] * inner;
            }
            acc
        })
    }

    /// The scalar `T(u, u, u)`.
    pub fn contract_three(&self, u: &DVector<f64>) -> f64 {
        self.contract_two(u).dot(u)
    }

    /// `T(W, W, W)` for `W` of shape `dim x k`:
    /// `out(a, b, c) = sum W(a', a) W(b', b) W(c', c) T(a', b', c')`.
    pub fn apply(&self, w: &DMatrix<f64>) -> Result<Tensor3> {
        let d = self.dim;
        if w.nrows() != d {
            return Err(Error::dims(format!(
                "transform has {} rows, tensor dimension is {d}",
                w.nrows()
            )));
        }
        let k = w.ncols();
        // contract the last mode: s1[a', b', c] = sum_c' T[a', b', c'] W[c', c]
        let mut s1 = vec![0.0; d * d * k];
        for ab in 0..d * d {
            let row = &self.data[ab * d..(ab + 1) * d];
            let out = &mut s1[ab * k..(ab + 1) * k];
            for (cp, &t) in row.iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                for (c, o) in out.iter_mut().enumerate() {
                    *o += t * w[(cp, c)];
                }
            }
        }
        // middle mode: s2[a', b, c] = sum_b' s1[a', b', c] W[b', b]
        let mut s2 = vec![0.0; d * k * k];
        for ap in 0..d {
            for bp in 0..d {
                let src = &s1[(ap * d + bp) * k..(ap * d + bp + 1) * k];
                for b in 0..k {
                    let wb = w[(bp, b)];
                    if wb == 0.0 {
                        continue;
                    }
                    let dst = &mut s2[(ap * k + b) * k..(ap * k + b + 1) * k];
                    for (o, s) in dst.iter_mut().zip(src) {
                        *o += wb * s;
                    }
                }
            }
        }
        // first mode
        let mut out = vec![0.0; k * k * k];
        for ap in 0..d {
            let src = &s2[ap * k * k..(ap + 1) * k * k];
            for a in 0..k {
                let wa = w[(ap, a)];
                if wa == 0.0 {
                    continue;
                }
                let dst = &mut out[a * k * k..(a + 1) * k * k];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += wa * s;
                }
            }
        }
        Tensor3::from_vec(k, out)
    }
}

impl std::ops::Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.dim, rhs.dim, "tensor dimensions differ");
        Tensor3 {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl std::ops::Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.dim, rhs.dim, "tensor dimensions differ");
        Tensor3 {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}
