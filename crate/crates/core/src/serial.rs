//! JSON shapes shared by the file formats.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freealg::{MatPoly, MatTuple, Word};

/// A dense matrix as nested rows, or a flat row-major list when the shape is known.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixJson {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

pub fn matrix_to_json(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn vector_to_json(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Accept nested rows, or a flat row-major list of `rows·cols` numbers.
pub fn matrix_from_json(m: &MatrixJson, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    match m {
        MatrixJson::Rows(r) => {
            if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                return Err(Error::Dimension(format!("expected a {rows}x{cols} matrix")));
            }
            Ok(DMatrix::from_fn(rows, cols, |i, j| r[i][j]))
        }
        MatrixJson::Flat(v) => {
            if v.len() != rows * cols {
                return Err(Error::Dimension(format!("expected {} row-major entries", rows * cols)));
            }
            Ok(DMatrix::from_row_slice(rows, cols, v))
        }
    }
}

/// Square matrix of unknown size from nested rows.
pub fn square_from_json(m: &MatrixJson) -> Result<DMatrix<f64>> {
    match m {
        MatrixJson::Rows(r) => matrix_from_json(m, r.len(), r.len()),
        MatrixJson::Flat(v) => {
            let n = (v.len() as f64).sqrt().round() as usize;
            matrix_from_json(m, n, n)
        }
    }
}

/// `{"shape": [ℓ, ν], "nvars": g, "terms": {"x1*x2": [[…]]}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatPolyJson {
    pub shape: [usize; 2],
    #[serde(default)]
    pub nvars: Option<usize>,
    pub terms: BTreeMap<String, MatrixJson>,
}

impl From<&MatPoly> for MatPolyJson {
    fn from(p: &MatPoly) -> Self {
        MatPolyJson {
            shape: [p.nrows(), p.ncols()],
            nvars: Some(p.nvars()),
            terms: p
                .terms()
                .iter()
                .map(|(w, c)| (w.to_string(), MatrixJson::Rows(matrix_to_json(c))))
                .collect(),
        }
    }
}

impl MatPolyJson {
    /// `default_nvars` is used when the document omits `nvars`.
    pub fn to_poly(&self, default_nvars: usize) -> Result<MatPoly> {
        let g = self.nvars.unwrap_or(default_nvars);
        let [r, c] = self.shape;
        let terms = self
            .terms
            .iter()
            .map(|(k, m)| Ok((Word::parse(k)?, matrix_from_json(m, r, c)?)))
            .collect::<Result<Vec<_>>>()?;
        MatPoly::from_terms(r, c, g, terms)
    }
}

/// `{"X": [matrices]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TupleJson {
    #[serde(rename = "X")]
    pub x: Vec<MatrixJson>,
}

impl TupleJson {
    pub fn to_tuple(&self) -> Result<MatTuple> {
        MatTuple::new(self.x.iter().map(square_from_json).collect::<Result<Vec<_>>>()?)
    }
}

impl From<&MatTuple> for TupleJson {
    fn from(t: &MatTuple) -> Self {
        TupleJson {
            x: t.mats().iter().map(|m| MatrixJson::Rows(matrix_to_json(m))).collect(),
        }
    }
}
