//! Inclusion of LMI domains: `𝔇_L ⊆ 𝔇_{L′}` holds iff
//! `L′ = S + Σ V_j* L V_j` with `S ⪰ 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certify::{solve_membership, Membership, MembershipSdpOptions, QuadModuleSpec};
use crate::error::{Error, Result};
use crate::linalg::{min_eig, psd_factor};
use crate::moment::{refute, Refutation, RefuteOptions, Witness};
use crate::pencil::{congruence_sum, unit_certificate, MonicPencil, UnitOutcome};
use crate::sdp::SdpOptions;
use crate::serial::{matrix_from_json, matrix_to_json, square_from_json, MatrixJson};

/// Accepted residual of the identity `L′ − S − Σ V*LV`.
pub const DOMINATION_TOL: f64 = 1e-8;

/// `L′ = S + Σ V_j* L V_j` with `S` (ℓ′×ℓ′) PSD and `V_j` ℓ×ℓ′.
#[derive(Clone, Debug, PartialEq)]
pub struct DominationCertificate {
    pub s: DMatrix<f64>,
    pub v: Vec<DMatrix<f64>>,
}

impl DominationCertificate {
    /// Max coefficient of `L′ − S − Σ V*LV`.
    pub fn residual(&self, l: &MonicPencil, lp: &MonicPencil) -> Result<f64> {
        if self.s.shape() != (lp.size(), lp.size()) {
            return Err(Error::Dimension("S does not match the dominated pencil".into()));
        }
        let mut rhs = congruence_sum(l, &self.v, lp.size())?;
        rhs = rhs.try_add(&crate::freealg::MatPoly::constant(self.s.clone(), l.nvars()))?;
        Ok(lp.to_poly().max_coeff_diff(&rhs))
    }

    pub fn to_json(&self) -> DominationJson {
        DominationJson {
            s: MatrixJson::Rows(matrix_to_json(&self.s)),
            v: self.v.iter().map(|m| MatrixJson::Rows(matrix_to_json(m))).collect(),
        }
    }
}

/// `{"S": matrix, "V": [matrices]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DominationJson {
    #[serde(rename = "S")]
    pub s: MatrixJson,
    #[serde(rename = "V")]
    pub v: Vec<MatrixJson>,
}

impl DominationJson {
    /// `rows` is the size `ℓ` of the dominating pencil.
    pub fn to_certificate(&self, rows: usize) -> Result<DominationCertificate> {
        let s = square_from_json(&self.s)?;
        let v = self
            .v
            .iter()
            .map(|m| matrix_from_json(m, rows, s.nrows()))
            .collect::<Result<Vec<_>>>()?;
        Ok(DominationCertificate { s, v })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domination {
    Dominates {
        certificate: DominationCertificate,
        residual: f64,
    },
    /// `L(X) ⪰ 0` while `L′(X)` has a negative direction `γ`.
    Witness(Witness),
    Indeterminate(String),
}

/// Decide `𝔇_L ⊆ 𝔇_{L′}` through constant Gram matrices, refuting at degree
/// zero when no certificate exists.
pub fn check_domination(
    l: &MonicPencil,
    lp: &MonicPencil,
    sdp_opts: &SdpOptions,
    refute_opts: &RefuteOptions,
) -> Result<Domination> {
    if l.nvars() != lp.nvars() {
        return Err(Error::Dimension("pencils use different variable counts".into()));
    }
    let target = lp.to_poly();
    let spec = QuadModuleSpec::new(vec![l.to_poly()], 0, 0, lp.size(), l.nvars())?;
    let module = MembershipSdpOptions {
        trace_cap: Some(crate::certify::default_trace_cap(&target)),
    };
    let reason = match solve_membership(&target, &spec, &module, sdp_opts, DOMINATION_TOL)? {
        Membership::Member { certificate, .. } => {
            let mut s = DMatrix::zeros(lp.size(), lp.size());
            for f in &certificate.sos {
                let c = f.constant_term();
                s += c.transpose() * c;
            }
            let v = certificate
                .weighted
                .first()
                .map(|fs| fs.iter().map(|f| f.constant_term()).collect())
                .unwrap_or_default();
            let certificate = DominationCertificate { s, v };
            let residual = certificate.residual(l, lp)?;
            if residual <= DOMINATION_TOL {
                return Ok(Domination::Dominates { certificate, residual });
            }
            format!("constant certificate has residual {residual:.3e}")
        }
        Membership::NotMember => String::from("no constant certificate"),
        Membership::Indeterminate(r) => r,
    };
    match refute(&target, l, 0, refute_opts)? {
        Refutation::Witness { witness, .. } => {
            let dominated = min_eig(&lp.evaluate(&witness.x)?);
            if dominated <= -refute_opts.witness_tol {
                Ok(Domination::Witness(witness))
            } else {
                Ok(Domination::Indeterminate(format!(
                    "{reason}; witness leaves L′(X) with smallest eigenvalue {dominated:.3e}"
                )))
            }
        }
        Refutation::NoRefutation { optimum, .. } => Ok(Domination::Indeterminate(format!(
            "{reason}; refutation optimum {optimum:.3e}"
        ))),
        Refutation::Indeterminate(r) => Ok(Domination::Indeterminate(format!("{reason}; {r}"))),
    }
}

/// Absorb `S` into the congruence part: with `S = Σ c_k c_kᵀ` and a unit
/// certificate `Σ h_i* L h_i = 1`, append `h_i c_kᵀ`.
pub fn strengthen_bounded(l: &MonicPencil, cert: &DominationCertificate) -> Result<DominationCertificate> {
    let columns = psd_factor(&cert.s, 1e-12);
    if columns.is_empty() {
        return Ok(cert.clone());
    }
    let unit = match unit_certificate(l)? {
        UnitOutcome::Exists(u) => u,
        UnitOutcome::Nonexistent { combination, .. } => {
            return Err(Error::Nonexistence(format!(
                "the coefficient span contains a positive definite matrix (smallest eigenvalue {:.3e}), \
                 so S cannot be absorbed",
                min_eig(&combination)
            )))
        }
    };
    let mut v = cert.v.clone();
    for h in &unit.vectors {
        for c in &columns {
            v.push(h * c.transpose());
        }
    }
    Ok(DominationCertificate {
        s: DMatrix::zeros(cert.s.nrows(), cert.s.ncols()),
        v,
    })
}

/// Chain `L → L′` and `L′ → L″` into `L → L″`:
/// `S = S₂ + Σ W*S₁W` and factors `V_i W_j`.
pub fn compose(first: &DominationCertificate, second: &DominationCertificate) -> Result<DominationCertificate> {
    let mid = first.s.nrows();
    if second.v.iter().any(|w| w.nrows() != mid) {
        return Err(Error::Dimension("certificates do not chain".into()));
    }
    let mut s = second.s.clone();
    let mut v = Vec::with_capacity(first.v.len() * second.v.len());
    for w in &second.v {
        s += w.transpose() * &first.s * w;
        for vi in &first.v {
            v.push(vi * w);
        }
    }
    Ok(DominationCertificate { s, v })
}
