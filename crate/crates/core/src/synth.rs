//! Random problem instances: incoherent low-rank factors, structured hidden
//! patterns and orthonormal frames.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::completion::ObservationMask;
use crate::error::{Error, Result};
use crate::linalg::SubspaceBasis;
use crate::rng::Rng;

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(n: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Uniformly random `n x r` matrix with orthonormal columns.
pub fn random_orthonormal(n: usize, r: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = gaussian_matrix(n, r, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    // Fix column signs so the distribution is Haar.
    for c in 0..r {
        if rr[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Matrix of random signs with magnitudes uniform in `[0.5, 1.5]`.
pub fn bounded_sign_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let mag = rng.random_range(0.5..1.5);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    })
}

/// Random `n x r` factor (bounded entries with random signs) whose column
/// space has incoherence at most `max_mu`, by rejection.
pub fn incoherent_factor(n: usize, r: usize, max_mu: f64, rng: &mut Rng) -> Result<DMatrix<f64>> {
    const MAX_TRIES: usize = 10_000;
    for _ in 0..MAX_TRIES {
        let f = bounded_sign_matrix(n, r, rng);
        let basis = SubspaceBasis::column_space(&f, 1e-10)?;
        if basis.rank() == r && basis.incoherence()? <= max_mu {
            return Ok(f);
        }
    }
    Err(Error::invalid(format!(
        "no rank-{r} factor in R^{n} with incoherence <= {max_mu} after {MAX_TRIES} draws"
    )))
}

/// Hides `(i, (i + s) mod n)` for every row `i` and offset `s`; each row and
/// column then has exactly `offsets.len()` hidden entries.
pub fn circulant_mask(n: usize, offsets: &[usize]) -> ObservationMask {
    ObservationMask::from_fn(n, n, |i, j| !offsets.contains(&((j + n - i) % n)))
}

/// Diagonal hidden.
pub fn diagonal_mask(n: usize) -> ObservationMask {
    circulant_mask(n, &[0])
}

/// Four centers in a random 3-dimensional subspace of `R^n`, along the
/// vertex directions of a randomly rotated regular tetrahedron. Pairwise
/// `|cos|` is 1/3, so the separation is 2/3. Each center is scaled to
/// max-entry `0.9`.
pub fn tetrahedral_centers(n: usize, rng: &mut Rng) -> Result<Vec<DVector<f64>>> {
    if n < 3 {
        return Err(Error::invalid(format!("need n >= 3 for a 3-dimensional span, got {n}")));
    }
    let q = random_orthonormal(n, 3, rng);
    let rot = random_orthonormal(3, 3, rng);
    let vertices = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    Ok(vertices
        .iter()
        .map(|v| {
            let d = &q * (&rot * DVector::from_row_slice(v));
            let scale = 0.9 / d.amax();
            d * scale
        })
        .collect())
}
