use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Revealed/hidden pattern of an `rows x cols` matrix.
///
/// `kappa` is the largest number of hidden entries in any column and `rho`
/// the largest number in any row; both are kept in sync with the pattern.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    revealed: Vec<bool>,
    kappa: usize,
    rho: usize,
}

impl ObservationMask {
    /// Builds a mask from a row-major revealed flag per entry.
    pub fn from_revealed(rows: usize, cols: usize, revealed: Vec<bool>) -> Result<Self> {
        if revealed.len() != rows * cols {
            return Err(Error::dims(format!(
                "mask has {} flags, expected {rows}x{cols}",
                revealed.len()
            )));
        }
        let mut col_hidden = vec![0usize; cols];
        let mut row_hidden = vec![0usize; rows];
        for i in 0..rows {
            for j in 0..cols {
                if !revealed[i * cols + j] {
                    row_hidden[i] += 1;
                    col_hidden[j] += 1;
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            revealed,
            kappa: col_hidden.into_iter().max().unwrap_or(0),
            rho: row_hidden.into_iter().max().unwrap_or(0),
        })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            revealed: vec![true; rows * cols],
            kappa: 0,
            rho: 0,
        }
    }

    /// Everything revealed except the listed positions.
    pub fn from_hidden<I>(rows: usize, cols: usize, hidden: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut revealed = vec![true; rows * cols];
        for (i, j) in hidden {
            if i >= rows || j >= cols {
                return Err(Error::dims(format!(
                    "hidden position ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            revealed[i * cols + j] = false;
        }
        Self::from_revealed(rows, cols, revealed)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut revealed = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                revealed.push(f(i, j));
            }
        }
        Self::from_revealed(rows, cols, revealed).expect("sized by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_revealed(&self, i: usize, j: usize) -> bool {
        self.revealed[i * self.cols + j]
    }

    /// Max hidden entries in any column.
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Max hidden entries in any row.
    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn hidden_count(&self) -> usize {
        self.revealed.iter().filter(|r| !**r).count()
    }

    pub fn revealed_count(&self) -> usize {
        self.revealed.len() - self.hidden_count()
    }

    pub fn hidden(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.revealed
            .iter()
            .enumerate()
            .filter(|(_, r)| !**r)
            .map(move |(p, _)| (p / self.cols, p % self.cols))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| self.is_revealed(i, j) == self.is_revealed(j, i)))
    }

    /// Row-major flags, `true` = revealed.
    pub fn as_slice(&self) -> &[bool] {
        &self.revealed
    }
}

/// Left-hand side of the adversarial recoverability inequality,
/// `2 (kappa mu_u / m + rho mu_v / n) r`.
pub fn recoverability_margin(mask: &ObservationMask, mu_u: f64, mu_v: f64, rank: usize) -> f64 {
    let m = mask.rows() as f64;
    let n = mask.cols() as f64;
    2.0 * (mask.kappa() as f64 * mu_u / m + mask.rho() as f64 * mu_v / n) * rank as f64
}

/// Whether the hidden pattern is within the budget that guarantees exact
/// recovery of a rank-`rank` matrix with the given incoherences.
pub fn recoverable(mask: &ObservationMask, mu_u: f64, mu_v: f64, rank: usize) -> bool {
    recoverability_margin(mask, mu_u, mu_v, rank) < 1.0
}
