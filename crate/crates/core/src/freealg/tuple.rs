use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym};

/// Entries of a tuple must equal their transpose to within this.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A `g`-tuple of symmetric `n × n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatTuple {
    mats: Vec<DMatrix<f64>>,
    level: usize,
}

impl MatTuple {
    /// Checks squareness, a common size and symmetry within [`SYMMETRY_TOL`].
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let level = mats.first().map(|m| m.nrows()).unwrap_or(0);
        for (j, m) in mats.iter().enumerate() {
            if m.nrows() != level || m.ncols() != level {
                return Err(Error::Dimension(format!(
                    "entry {} is {}x{}, expected {level}x{level}",
                    j + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if max_abs(&(m - m.transpose())) > SYMMETRY_TOL {
                return Err(Error::Malformed(format!("entry {} is not symmetric", j + 1)));
            }
        }
        Ok(MatTuple { mats, level })
    }

    /// Replace each entry by its symmetric part.
    pub fn symmetrized(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        MatTuple::new(mats.iter().map(sym).collect())
    }

    pub fn zeros(nvars: usize, level: usize) -> Self {
        MatTuple {
            mats: vec![DMatrix::zeros(level, level); nvars],
            level,
        }
    }

    /// Level-1 tuple from a point of `R^g`.
    pub fn from_point(x: &[f64]) -> Self {
        MatTuple {
            mats: x.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            level: 1,
        }
    }

    /// Gaussian symmetric entries (GOE-like, off-diagonals scaled by 1/√2).
    pub fn random_gaussian<R: Rng + ?Sized>(nvars: usize, level: usize, rng: &mut R) -> Self {
        let mats = (0..nvars)
            .map(|_| {
                let a = DMatrix::from_fn(level, level, |_, _| rng.sample::<f64, _>(StandardNormal));
                sym(&a)
            })
            .collect();
        MatTuple { mats, level }
    }

    pub fn mats(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn nvars(&self) -> usize {
        self.mats.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `(Σ_j ‖X_j‖_F²)^{1/2}`.
    pub fn frobenius_norm(&self) -> f64 {
        self.mats.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, t: f64) -> MatTuple {
        MatTuple {
            mats: self.mats.iter().map(|m| m * t).collect(),
            level: self.level,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_ragged() {
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        assert!(MatTuple::new(vec![a.clone()]).is_err());
        assert!(MatTuple::symmetrized(vec![a]).is_ok());
        assert!(MatTuple::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(3, 3)]).is_err());
    }
}
