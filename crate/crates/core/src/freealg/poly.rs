use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use super::tuple::MatTuple;
use super::word::Word;
use crate::error::{Error, Result};
use crate::linalg::{kron, max_abs};

/// Coefficient matrices whose entries are all at or below this are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

/// A matrix-valued noncommutative polynomial `P = Σ_w B_w w` with
/// `B_w ∈ R^{nrows × ncols}` in `nvars` letters.
#[derive(Clone, Debug, PartialEq)]
pub struct MatPoly {
    nrows: usize,
    ncols: usize,
    nvars: usize,
    terms: BTreeMap<Word, DMatrix<f64>>,
}

impl MatPoly {
    pub fn zero(nrows: usize, ncols: usize, nvars: usize) -> Self {
        MatPoly {
            nrows,
            ncols,
            nvars,
            terms: BTreeMap::new(),
        }
    }

    /// Build from explicit terms; words are checked against `nvars` and shapes
    /// against `(nrows, ncols)`. Repeated words accumulate.
    pub fn from_terms<I>(nrows: usize, ncols: usize, nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, DMatrix<f64>)>,
    {
        let mut p = MatPoly::zero(nrows, ncols, nvars);
        for (w, c) in terms {
            w.check_vars(nvars)?;
            if c.nrows() != nrows || c.ncols() != ncols {
                return Err(Error::Dimension(format!(
                    "coefficient of {w} is {}x{}, expected {nrows}x{ncols}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            p.add_term(w, &c);
        }
        p.prune();
        Ok(p)
    }

    pub fn constant(c: DMatrix<f64>, nvars: usize) -> Self {
        let (r, k) = c.shape();
        let mut p = MatPoly::zero(r, k, nvars);
        p.terms.insert(Word::empty(), c);
        p.prune();
        p
    }

    pub fn identity(size: usize, nvars: usize) -> Self {
        MatPoly::constant(DMatrix::identity(size, size), nvars)
    }

    pub fn scalar(c: f64, nvars: usize) -> Self {
        MatPoly::constant(DMatrix::from_element(1, 1, c), nvars)
    }

    /// The scalar polynomial `x_{j+1}` (zero-based `j`).
    pub fn var(j: usize, nvars: usize) -> Self {
        let mut p = MatPoly::zero(1, 1, nvars);
        p.terms.insert(Word::letter(j), DMatrix::from_element(1, 1, 1.0));
        p
    }

    /// `c · w` for a scalar coefficient.
    pub fn monomial(c: f64, w: Word, nvars: usize) -> Self {
        let mut p = MatPoly::zero(1, 1, nvars);
        p.terms.insert(w, DMatrix::from_element(1, 1, c));
        p.prune();
        p
    }

    /// Assemble a block polynomial from a grid of equally-shaped-per-row/column blocks.
    pub fn from_blocks(grid: &[Vec<MatPoly>]) -> Result<Self> {
        if grid.is_empty() || grid[0].is_empty() {
            return Err(Error::Dimension("empty block grid".into()));
        }
        let nvars = grid[0][0].nvars;
        let row_h: Vec<usize> = grid.iter().map(|r| r[0].nrows).collect();
        let col_w: Vec<usize> = grid[0].iter().map(|b| b.ncols).collect();
        let (nr, nc) = (row_h.iter().sum(), col_w.iter().sum());
        let mut out = MatPoly::zero(nr, nc, nvars);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            if row.len() != col_w.len() {
                return Err(Error::Dimension("ragged block grid".into()));
            }
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                if blk.nrows != row_h[bi] || blk.ncols != col_w[bj] || blk.nvars != nvars {
                    return Err(Error::Dimension(format!("block ({bi},{bj}) does not conform")));
                }
                for (w, c) in &blk.terms {
                    let e = out.terms.entry(w.clone()).or_insert_with(|| DMatrix::zeros(nr, nc));
                    e.view_mut((r0, c0), c.shape()).copy_from(c);
                }
                c0 += col_w[bj];
            }
            r0 += row_h[bi];
        }
        Ok(out)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Word, DMatrix<f64>> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `None` stands for the degree of the zero polynomial (−∞).
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Word::degree).max()
    }

    /// Coefficient of `w` (a zero matrix if absent).
    pub fn coeff(&self, w: &Word) -> DMatrix<f64> {
        self.terms
            .get(w)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.nrows, self.ncols))
    }

    pub fn constant_term(&self) -> DMatrix<f64> {
        self.coeff(&Word::empty())
    }

    /// The scalar polynomial in entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> MatPoly {
        let mut p = MatPoly::zero(1, 1, self.nvars);
        for (w, c) in &self.terms {
            p.terms.insert(w.clone(), DMatrix::from_element(1, 1, c[(i, j)]));
        }
        p.prune();
        p
    }

    /// Homogeneous part of degree `k`.
    pub fn homogeneous_part(&self, k: usize) -> MatPoly {
        let mut p = MatPoly::zero(self.nrows, self.ncols, self.nvars);
        for (w, c) in self.terms.iter().filter(|(w, _)| w.degree() == k) {
            p.terms.insert(w.clone(), c.clone());
        }
        p
    }

    pub fn with_nvars(mut self, nvars: usize) -> Result<Self> {
        for w in self.terms.keys() {
            w.check_vars(nvars)?;
        }
        self.nvars = nvars;
        Ok(self)
    }

    /// Rows `start..start + len` of every coefficient.
    pub fn row_block(&self, start: usize, len: usize) -> Result<MatPoly> {
        if start + len > self.nrows {
            return Err(Error::Dimension(format!(
                "rows {start}..{} of a {}-row polynomial",
                start + len,
                self.nrows
            )));
        }
        let mut out = MatPoly::zero(len, self.ncols, self.nvars);
        for (w, c) in &self.terms {
            out.terms.insert(w.clone(), c.rows(start, len).into_owned());
        }
        out.prune();
        Ok(out)
    }

    fn add_term(&mut self, w: Word, c: &DMatrix<f64>) {
        match self.terms.get_mut(&w) {
            Some(e) => *e += c,
            None => {
                self.terms.insert(w, c.clone());
            }
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| max_abs(c) > PRUNE_TOL);
    }

    fn check_same(&self, other: &MatPoly, op: &str) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::Dimension(format!(
                "{op}: {} vs {} variables",
                self.nvars, other.nvars
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &MatPoly) -> Result<MatPoly> {
        self.check_same(other, "add")?;
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "add: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c);
        }
        out.prune();
        Ok(out)
    }

    pub fn try_sub(&self, other: &MatPoly) -> Result<MatPoly> {
        self.try_add(&other.scale(-1.0))
    }

    pub fn try_mul(&self, other: &MatPoly) -> Result<MatPoly> {
        self.check_same(other, "mul")?;
        if self.ncols != other.nrows {
            return Err(Error::Dimension(format!(
                "mul: {:?} times {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = MatPoly::zero(self.nrows, other.ncols, self.nvars);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                out.add_term(w1.concat(w2), &(c1 * c2));
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> MatPoly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.prune();
        out
    }

    /// Left-multiply every coefficient by a constant matrix.
    pub fn left_mul_const(&self, m: &DMatrix<f64>) -> Result<MatPoly> {
        self.try_mul_const(m, true)
    }

    /// Right-multiply every coefficient by a constant matrix.
    pub fn right_mul_const(&self, m: &DMatrix<f64>) -> Result<MatPoly> {
        self.try_mul_const(m, false)
    }

    fn try_mul_const(&self, m: &DMatrix<f64>, left: bool) -> Result<MatPoly> {
        let ok = if left {
            m.ncols() == self.nrows
        } else {
            m.nrows() == self.ncols
        };
        if !ok {
            return Err(Error::Dimension("constant factor does not conform".into()));
        }
        let (r, c) = if left {
            (m.nrows(), self.ncols)
        } else {
            (self.nrows, m.ncols())
        };
        let mut out = MatPoly::zero(r, c, self.nvars);
        for (w, b) in &self.terms {
            let prod = if left { m * b } else { b * m };
            out.terms.insert(w.clone(), prod);
        }
        out.prune();
        Ok(out)
    }

    /// `P* = Σ B_wᵀ w*`.
    pub fn adjoint(&self) -> MatPoly {
        let mut out = MatPoly::zero(self.ncols, self.nrows, self.nvars);
        for (w, c) in &self.terms {
            out.terms.insert(w.star(), c.transpose());
        }
        out
    }

    /// `P` square with `B_{w*} = B_wᵀ` up to `tol` in every entry.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.max_coeff_diff(&self.adjoint()) <= tol
    }

    /// Max over words and entries of `|[self]_w − [other]_w|`.
    pub fn max_coeff_diff(&self, other: &MatPoly) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        let words: BTreeSet<&Word> = self.terms.keys().chain(other.terms.keys()).collect();
        words
            .into_iter()
            .map(|w| max_abs(&(self.coeff(w) - other.coeff(w))))
            .fold(0.0, f64::max)
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(max_abs).fold(0.0, f64::max)
    }

    /// `Σ_w B_w ⊗ w(X)`, an `(nrows·n) × (ncols·n)` matrix.
    pub fn evaluate(&self, x: &MatTuple) -> Result<DMatrix<f64>> {
        if x.nvars() != self.nvars {
            return Err(Error::Dimension(format!(
                "evaluate: polynomial in {} variables, tuple of {}",
                self.nvars,
                x.nvars()
            )));
        }
        let n = x.level();
        let mut cache: HashMap<Word, DMatrix<f64>> = HashMap::new();
        let mut out = DMatrix::zeros(self.nrows * n, self.ncols * n);
        for (w, c) in &self.terms {
            let wx = word_value(w, x, &mut cache);
            out += kron(c, &wx);
        }
        Ok(out)
    }
}

/// `w(X)`, the product of the letter matrices, memoized over prefixes.
pub(crate) fn word_value(w: &Word, x: &MatTuple, cache: &mut HashMap<Word, DMatrix<f64>>) -> DMatrix<f64> {
    if let Some(v) = cache.get(w) {
        return v.clone();
    }
    let letters: Vec<usize> = w.letters().collect();
    let v = match letters.split_last() {
        None => DMatrix::identity(x.level(), x.level()),
        Some((&last, rest)) => {
            let prefix = Word::from_letters(rest.iter().copied());
            word_value(&prefix, x, cache) * &x.mats()[last]
        }
    };
    cache.insert(w.clone(), v.clone());
    v
}

impl Add for &MatPoly {
    type Output = MatPoly;
    fn add(self, rhs: &MatPoly) -> MatPoly {
        self.try_add(rhs).expect("shape mismatch in +")
    }
}

impl Sub for &MatPoly {
    type Output = MatPoly;
    fn sub(self, rhs: &MatPoly) -> MatPoly {
        self.try_sub(rhs).expect("shape mismatch in -")
    }
}

impl Mul for &MatPoly {
    type Output = MatPoly;
    fn mul(self, rhs: &MatPoly) -> MatPoly {
        self.try_mul(rhs).expect("shape mismatch in *")
    }
}

impl Neg for &MatPoly {
    type Output = MatPoly;
    fn neg(self) -> MatPoly {
        self.scale(-1.0)
    }
}
