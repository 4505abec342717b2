//! GNS extraction of a finite-dimensional witness from a moment functional.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{moment_matrix, MomentFunctional};
use crate::error::{Error, Result};
use crate::freealg::{enumerate_basis, word_value, MatTuple, Word};
use crate::linalg::{min_eig, sym};
use crate::serial::{matrix_to_json, square_from_json, MatrixJson};

/// Smallest eigenvalue accepted for the Hankel block factored by GNS.
pub const GNS_DEFINITE_TOL: f64 = 1e-10;

/// A tuple `X` with vector `γ = (γ_1, …, γ_ν)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub x: MatTuple,
    pub gamma: DVector<f64>,
    pub nu: usize,
    /// `⟨p(X)γ, γ⟩` for the target `p`, when known.
    pub value: f64,
    pub residuals: WitnessResiduals,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WitnessResiduals {
    /// Max moment mismatch over words of degree at most `2k+1`.
    pub moment_match: Option<f64>,
    /// Mismatch at degree `2k+2` (informational).
    pub top_degree_mismatch: Option<f64>,
    /// Smallest eigenvalue of the constraint evaluated at `X`.
    pub domain_min_eig: Option<f64>,
    /// Smallest eigenvalue of the target evaluated at `X`.
    pub target_min_eig: Option<f64>,
    /// Mixing weight used to make the Hankel block definite.
    pub mixing_weight: Option<f64>,
}

impl Witness {
    /// Level `n` of the tuple.
    pub fn level(&self) -> usize {
        self.x.level()
    }

    pub fn gamma_blocks(&self) -> Vec<DVector<f64>> {
        let n = self.level();
        (0..self.nu).map(|s| self.gamma.rows(s * n, n).into_owned()).collect()
    }

    pub fn to_json(&self) -> WitnessJson {
        WitnessJson {
            n: self.level(),
            x: self
                .x
                .mats()
                .iter()
                .map(|m| MatrixJson::Rows(matrix_to_json(m)))
                .collect(),
            gamma: self.gamma.iter().copied().collect(),
            value: self.value,
            residuals: self.residuals.clone(),
        }
    }
}

/// `{"n": N, "X": [matrices], "gamma": vector, "value": v, "residuals": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WitnessJson {
    pub n: usize,
    #[serde(rename = "X")]
    pub x: Vec<MatrixJson>,
    pub gamma: Vec<f64>,
    pub value: f64,
    #[serde(default)]
    pub residuals: WitnessResiduals,
}

impl WitnessJson {
    pub fn to_witness(&self) -> Result<Witness> {
        let x = MatTuple::new(self.x.iter().map(square_from_json).collect::<Result<Vec<_>>>()?)?;
        if x.level() != self.n || self.n == 0 || !self.gamma.len().is_multiple_of(self.n) {
            return Err(Error::Dimension("witness sizes are inconsistent".into()));
        }
        Ok(Witness {
            nu: self.gamma.len() / self.n,
            x,
            gamma: DVector::from_vec(self.gamma.clone()),
            value: self.value,
            residuals: self.residuals.clone(),
        })
    }
}

/// GNS construction on the degree-`k` Hankel block: with `M_k = RᵀR`,
/// `X_j = R^{-T} S_j R^{-1}` where `S_j[(v,s),(u,t)] = λ(E_st ⊗ v* x_j u)`,
/// and `γ_t = R e_{(∅,t)}`. The tuple has size `ν·σ(k)` and reproduces `λ` on
/// words of degree at most `2k+1`.
pub fn gns_extract(lambda: &MomentFunctional, k: usize) -> Result<Witness> {
    if lambda.degree() < 2 * k + 1 {
        return Err(Error::MissingMoment(format!(
            "GNS at degree {k} needs moments to degree {}",
            2 * k + 1
        )));
    }
    let mk = moment_matrix(lambda, k)?;
    let lo = min_eig(&mk);
    if lo < GNS_DEFINITE_TOL {
        return Err(Error::Singular(format!(
            "Hankel block has smallest eigenvalue {lo:.3e}"
        )));
    }
    let chol = Cholesky::new(sym(&mk))
        .ok_or_else(|| Error::Singular("Cholesky factorization of the Hankel block failed".into()))?;
    let lower = chol.l();
    let basis = enumerate_basis(lambda.nvars(), k);
    let nu = lambda.nu();
    let n = basis.len() * nu;
    let mut mats = Vec::with_capacity(lambda.nvars());
    for j in 0..lambda.nvars() {
        let xj = Word::letter(j);
        let mut s = DMatrix::zeros(n, n);
        for (i, v) in basis.iter().enumerate() {
            for (l, u) in basis.iter().enumerate() {
                let m = lambda.moment(&Word::sandwich(v, &xj, u))?;
                for a in 0..nu {
                    for b in 0..nu {
                        s[(i * nu + a, l * nu + b)] = m[(a, b)];
                    }
                }
            }
        }
        let y = lower
            .solve_lower_triangular(&s)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let x = lower
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        mats.push(sym(&x));
    }
    let upper = lower.transpose();
    let mut gamma = DVector::zeros(n * nu);
    for t in 0..nu {
        gamma.rows_mut(t * n, n).copy_from(&upper.column(t));
    }
    Ok(Witness {
        x: MatTuple::new(mats)?,
        gamma,
        nu,
        value: f64::NAN,
        residuals: WitnessResiduals::default(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentMatch {
    /// Max over words of degree at most `2k+1` and entries.
    pub low_degree: f64,
    /// Max over words of degree `2k+2` (0 when the functional stops earlier).
    pub top_degree: f64,
}

/// Compare `⟨w(X)γ_t, γ_s⟩` with `λ(E_st ⊗ w)`.
pub fn verify_witness(lambda: &MomentFunctional, witness: &Witness, k: usize) -> Result<MomentMatch> {
    if witness.nu != lambda.nu() || witness.x.nvars() != lambda.nvars() {
        return Err(Error::Dimension("witness and functional do not conform".into()));
    }
    let blocks = witness.gamma_blocks();
    let top = (2 * k + 2).min(lambda.degree());
    let mut cache: HashMap<Word, DMatrix<f64>> = HashMap::new();
    let mut worst: BTreeMap<bool, f64> = BTreeMap::new();
    for w in enumerate_basis(lambda.nvars(), top) {
        let wx = word_value(&w, &witness.x, &mut cache);
        let m = lambda.moment(&w)?;
        let mut err = 0.0_f64;
        for s in 0..witness.nu {
            for t in 0..witness.nu {
                let got = blocks[s].dot(&(&wx * &blocks[t]));
                err = err.max((got - m[(s, t)]).abs());
            }
        }
        let slot = worst.entry(w.degree() > 2 * k + 1).or_insert(0.0);
        *slot = slot.max(err);
    }
    Ok(MomentMatch {
        low_degree: worst.get(&false).copied().unwrap_or(0.0),
        top_degree: worst.get(&true).copied().unwrap_or(0.0),
    })
}
