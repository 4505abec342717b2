//! Moment functionals on `R^{ν×ν}⟨x⟩`, their Hankel and localizing matrices,
//! the reference functional used for strict positivity, and flatness.
//!
//! A functional `λ` is stored by the `ν×ν` matrices `M_w` with
//! `M_w[s, t] = λ(E_st ⊗ w)`, so `λ(Σ B_w ⊗ w) = Σ_w ⟨B_w, M_w⟩`.

mod gns;
mod refute;

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freealg::{enumerate_basis, word_value, MatPoly, MatTuple, Word};
use crate::linalg::{max_abs, min_eig, numerical_rank, sym_eigenvalues};
use crate::pencil::MonicPencil;
use crate::serial::{matrix_from_json, matrix_to_json, MatrixJson};

pub use gns::{gns_extract, verify_witness, MomentMatch, Witness, WitnessJson, WitnessResiduals};
pub use refute::{assemble_refutation_sdp, default_trace_bound, refute, Refutation, RefutationSdp, RefuteOptions};

/// Symmetry tolerance `λ(E_st ⊗ w) = λ(E_ts ⊗ w*)`.
pub const FUNCTIONAL_SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentFunctional {
    nvars: usize,
    nu: usize,
    degree: usize,
    values: BTreeMap<Word, DMatrix<f64>>,
}

impl MomentFunctional {
    /// The zero functional on words of degree at most `degree`.
    pub fn zero(nvars: usize, nu: usize, degree: usize) -> Self {
        MomentFunctional {
            nvars,
            nu,
            degree,
            values: BTreeMap::new(),
        }
    }

    /// Build from `(word, M_w)` pairs; words above `degree` are rejected.
    pub fn from_values<I>(nvars: usize, nu: usize, degree: usize, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, DMatrix<f64>)>,
    {
        let mut out = MomentFunctional::zero(nvars, nu, degree);
        for (w, m) in values {
            w.check_vars(nvars)?;
            if w.degree() > degree {
                return Err(Error::Dimension(format!("moment of {w} beyond degree {degree}")));
            }
            if m.shape() != (nu, nu) {
                return Err(Error::Dimension(format!("moment of {w} is not {nu}x{nu}")));
            }
            out.values.insert(w, m);
        }
        Ok(out)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `M_w`; zero for unstored words within the degree bound.
    pub fn moment(&self, w: &Word) -> Result<DMatrix<f64>> {
        if w.degree() > self.degree {
            return Err(Error::MissingMoment(format!(
                "word {w} has degree {} > {}",
                w.degree(),
                self.degree
            )));
        }
        Ok(self
            .values
            .get(w)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.nu, self.nu)))
    }

    /// `λ(E_st ⊗ w)`.
    pub fn entry(&self, w: &Word, s: usize, t: usize) -> Result<f64> {
        Ok(self.moment(w)?[(s, t)])
    }

    /// `λ(P)` for a `ν×ν` polynomial.
    pub fn apply(&self, p: &MatPoly) -> Result<f64> {
        if p.shape() != (self.nu, self.nu) {
            return Err(Error::Dimension(format!(
                "functional acts on {0}x{0} polynomials",
                self.nu
            )));
        }
        let mut acc = 0.0;
        for (w, b) in p.terms() {
            acc += b.dot(&self.moment(w)?);
        }
        Ok(acc)
    }

    /// Largest violation of `λ(E_st ⊗ w) = λ(E_ts ⊗ w*)`.
    pub fn symmetry_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|(w, m)| {
                let mirror = self
                    .values
                    .get(&w.star())
                    .cloned()
                    .unwrap_or_else(|| DMatrix::zeros(self.nu, self.nu));
                max_abs(&(m - mirror.transpose()))
            })
            .fold(0.0, f64::max)
    }

    /// `λ + μ·other`.
    pub fn mixed(&self, other: &MomentFunctional, mu: f64) -> Result<MomentFunctional> {
        if (self.nvars, self.nu) != (other.nvars, other.nu) {
            return Err(Error::Dimension("functionals act on different spaces".into()));
        }
        let degree = self.degree.min(other.degree);
        let mut values = BTreeMap::new();
        for w in self.values.keys().chain(other.values.keys()) {
            if w.degree() <= degree && !values.contains_key(w) {
                values.insert(w.clone(), self.moment(w)? + other.moment(w)? * mu);
            }
        }
        Ok(MomentFunctional {
            nvars: self.nvars,
            nu: self.nu,
            degree,
            values,
        })
    }

    pub fn to_json(&self) -> MomentFunctionalJson {
        MomentFunctionalJson {
            nvars: self.nvars,
            nu: self.nu,
            degree: self.degree,
            values: self
                .values
                .iter()
                .map(|(w, m)| (w.to_string(), MatrixJson::Rows(matrix_to_json(m))))
                .collect(),
        }
    }
}

/// `{"nvars": g, "nu": ν, "degree": D, "values": {"word": ν×ν matrix}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MomentFunctionalJson {
    pub nvars: usize,
    pub nu: usize,
    pub degree: usize,
    pub values: BTreeMap<String, MatrixJson>,
}

impl MomentFunctionalJson {
    pub fn to_functional(&self) -> Result<MomentFunctional> {
        let values = self
            .values
            .iter()
            .map(|(k, m)| Ok((Word::parse(k)?, matrix_from_json(m, self.nu, self.nu)?)))
            .collect::<Result<Vec<_>>>()?;
        MomentFunctional::from_values(self.nvars, self.nu, self.degree, values)
    }
}

/// `M[(v,s),(u,t)] = λ(E_st ⊗ v*u)` over words of degree at most `k`,
/// flattened word-major at `i·ν + s`.
pub fn moment_matrix(lambda: &MomentFunctional, k: usize) -> Result<DMatrix<f64>> {
    let basis = enumerate_basis(lambda.nvars, k);
    let nu = lambda.nu;
    let n = basis.len() * nu;
    let mut out = DMatrix::zeros(n, n);
    for (i, v) in basis.iter().enumerate() {
        for (j, u) in basis.iter().enumerate() {
            let m = lambda.moment(&Word::star_concat(v, u))?;
            for s in 0..nu {
                for t in 0..nu {
                    out[(i * nu + s, j * nu + t)] = m[(s, t)];
                }
            }
        }
    }
    Ok(out)
}

/// `[(v,c,a),(u,d,b)] = Σ_w (Q_w)_cd λ(E_ab ⊗ v* w u)` over words of degree at
/// most `k`, flattened at `(i·ℓ + c)·ν + a`.
pub fn localizing_matrix(lambda: &MomentFunctional, q: &MatPoly, k: usize) -> Result<DMatrix<f64>> {
    if q.nrows() != q.ncols() || q.nvars() != lambda.nvars {
        return Err(Error::Dimension("localizing polynomial does not conform".into()));
    }
    let basis = enumerate_basis(lambda.nvars, k);
    let (nu, l) = (lambda.nu, q.nrows());
    let n = basis.len() * l * nu;
    let idx = |i: usize, c: usize, a: usize| (i * l + c) * nu + a;
    let mut out = DMatrix::zeros(n, n);
    for (i, v) in basis.iter().enumerate() {
        for (j, u) in basis.iter().enumerate() {
            for (w, qw) in q.terms() {
                let m = lambda.moment(&Word::sandwich(v, w, u))?;
                for c in 0..l {
                    for d in 0..l {
                        let coef = qw[(c, d)];
                        if coef == 0.0 {
                            continue;
                        }
                        for a in 0..nu {
                            for b in 0..nu {
                                out[(idx(i, c, a), idx(j, d, b))] += coef * m[(a, b)];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `λ(E_st ⊗ w) = ⟨w(X)γ_t, γ_s⟩` for words of degree at most `degree`, with
/// `γ` the concatenation of `ν` blocks of length `n`.
pub fn functional_from_witness(
    x: &MatTuple,
    gamma: &DVector<f64>,
    nu: usize,
    degree: usize,
) -> Result<MomentFunctional> {
    let n = x.level();
    if gamma.len() != n * nu {
        return Err(Error::Dimension(format!(
            "γ has length {}, expected {}·{}",
            gamma.len(),
            nu,
            n
        )));
    }
    let blocks: Vec<DVector<f64>> = (0..nu).map(|s| gamma.rows(s * n, n).into_owned()).collect();
    let mut cache = HashMap::new();
    let mut values = BTreeMap::new();
    for w in enumerate_basis(x.nvars(), degree) {
        let wx = word_value(&w, x, &mut cache);
        let m = DMatrix::from_fn(nu, nu, |s, t| blocks[s].dot(&(&wx * &blocks[t])));
        values.insert(w, m);
    }
    Ok(MomentFunctional {
        nvars: x.nvars(),
        nu,
        degree,
        values,
    })
}

/// Gaussian direction rescaled to `max_j ‖X_j‖₂ = radius · u^{1/dim}` with
/// `u` uniform, so the radius is distributed as in a uniform ball sample.
fn sample_ball(rng: &mut ChaCha8Rng, nvars: usize, level: usize, radius: f64) -> MatTuple {
    let x = MatTuple::random_gaussian(nvars, level, rng);
    let top = x
        .mats()
        .iter()
        .map(|m| sym_eigenvalues(m).iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let dim = (nvars * level * (level + 1) / 2) as f64;
    let u: f64 = rng.random::<f64>();
    x.scaled(radius * u.powf(1.0 / dim) / top)
}

/// `λ̂(P) = Σ_i 2^{-i} tr P(X^(i))` for tuples `X^(i)` at level `k + 1` with
/// `I − Λ_A(X^(i)) ⪰ ½`. The degree-`k` Hankel block is positive definite;
/// up to five seeds are tried.
pub fn reference_functional(
    pencil: &MonicPencil,
    nu: usize,
    k: usize,
    nsamples: usize,
    seed: u64,
) -> Result<MomentFunctional> {
    let g = pencil.nvars();
    let level = k + 1;
    let radius = 0.5 / pencil.coefficient_norm_sum().max(1e-12);
    let degree = 2 * k + 2;
    let basis = enumerate_basis(g, degree);
    for attempt in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)));
        let mut traces = vec![0.0; basis.len()];
        for i in 0..nsamples {
            let x = sample_ball(&mut rng, g, level, radius);
            let weight = 0.5_f64.powi(i as i32 + 1);
            let mut cache = HashMap::new();
            for (slot, w) in traces.iter_mut().zip(&basis) {
                *slot += weight * word_value(w, &x, &mut cache).trace();
            }
        }
        let values = basis
            .iter()
            .zip(&traces)
            .map(|(w, &t)| (w.clone(), DMatrix::identity(nu, nu) * t));
        let lambda = MomentFunctional::from_values(g, nu, degree, values)?;
        if min_eig(&moment_matrix(&lambda, k)?) >= 1e-10 {
            return Ok(lambda);
        }
    }
    Err(Error::Sampling(format!(
        "reference functional stayed singular at degree {k} after 5 seeds"
    )))
}

/// `λ + μ·λ̂`.
pub fn mix(lambda: &MomentFunctional, reference: &MomentFunctional, mu: f64) -> Result<MomentFunctional> {
    lambda.mixed(reference, mu)
}

/// Smallest decade `μ ≥ 1e-8` for which the degree-`k` Hankel block of
/// `λ + μλ̂` has smallest eigenvalue at least `1e-9`, while `λ_μ(p)` stays
/// below half of the (negative) `λ(p)`.
pub fn choose_mixing_weight(
    lambda: &MomentFunctional,
    reference: &MomentFunctional,
    p: &MatPoly,
    k: usize,
) -> Result<f64> {
    let base = lambda.apply(p)?;
    let mut mu = 1e-8;
    while mu <= 1e4 {
        let m = lambda.mixed(reference, mu)?;
        let value = m.apply(p)?;
        // negated so NaN fails too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(value < 0.5 * base) {
            return Err(Error::MarginDestroyed(format!(
                "λ(p) = {base:.3e} but λ + {mu:.0e}·λ̂ gives {value:.3e}"
            )));
        }
        if min_eig(&moment_matrix(&m, k)?) >= 1e-9 {
            return Ok(mu);
        }
        mu *= 10.0;
    }
    Err(Error::MarginDestroyed(
        "no mixing weight up to 1e4 makes the Hankel block definite".into(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flatness {
    pub flat: bool,
    pub rank_k: usize,
    pub rank_k1: usize,
}

/// Compare numerical ranks of the degree-`k` and degree-`k+1` Hankel blocks.
pub fn flatness_check(lambda: &MomentFunctional, k: usize, rank_tol: f64) -> Result<Flatness> {
    let rank_k = numerical_rank(&moment_matrix(lambda, k)?, rank_tol);
    let rank_k1 = numerical_rank(&moment_matrix(lambda, k + 1)?, rank_tol);
    Ok(Flatness {
        flat: rank_k == rank_k1,
        rank_k,
        rank_k1,
    })
}
