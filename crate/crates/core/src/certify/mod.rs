//! Certify-or-refute for positivity of a matrix polynomial on the domain of a
//! monic constraint.
//!
//! A linear constraint is handled in `M_{d,d}(L)`, a concave quadratic through
//! its linearization in `M_{d+1,d}`. When the module SDP has no solution the
//! dual refutation pipeline is run and its witness is verified against the
//! original constraint.

mod checks;
mod gram;

use nalgebra::DMatrix;

pub use checks::{certify_general, projected_localizing_check, random_eval_check, EvalReport, GeneralOutcome};
pub use gram::{
    assemble_membership_sdp, default_trace_cap, extract_certificate, verify_certificate, Certificate, CertificateJson,
    GramLayout, MembershipSdpOptions, QuadModuleSpec, GRAM_RANK_TOL,
};

use crate::error::{Error, Result};
use crate::freealg::MatPoly;
use crate::linalg::min_eig;
use crate::moment::{refute, Refutation, RefuteOptions, Witness};
use crate::pencil::{check_monic, concave_decompose, pullback_certificate, MonicPencil};
use crate::sdp::{self, SdpOptions, SdpStatus};

/// Outcome of one membership SDP.
#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    Member { certificate: Certificate, residual: f64 },
    NotMember,
    Indeterminate(String),
}

/// Solve the membership SDP and verify the extracted certificate. A raw
/// solution whose residual exceeds `residual_tol` is projected onto the
/// coefficient-matching equations and re-factored.
///
/// The trace cap in `module` is applied only when the uncapped program ends
/// indeterminate: its large slack degrades conditioning, while on boundary
/// (closure-only) instances it is what turns a stall into a Farkas ray.
pub fn solve_membership(
    p: &MatPoly,
    spec: &QuadModuleSpec,
    module: &MembershipSdpOptions,
    sdp_opts: &SdpOptions,
    residual_tol: f64,
) -> Result<Membership> {
    let uncapped = MembershipSdpOptions { trace_cap: None };
    let first = solve_membership_once(p, spec, &uncapped, sdp_opts, residual_tol)?;
    match (&first, module.trace_cap) {
        (Membership::Indeterminate(_), Some(_)) => solve_membership_once(p, spec, module, sdp_opts, residual_tol),
        _ => Ok(first),
    }
}

fn solve_membership_once(
    p: &MatPoly,
    spec: &QuadModuleSpec,
    module: &MembershipSdpOptions,
    sdp_opts: &SdpOptions,
    residual_tol: f64,
) -> Result<Membership> {
    let problem = assemble_membership_sdp(p, spec, module)?;
    let sol = sdp::solve(&problem, sdp_opts)?;
    // an indeterminate run still offers its best iterate; only a verified
    // certificate is accepted from it
    let stalled = match sol.status {
        SdpStatus::Optimal => None,
        SdpStatus::Infeasible => return Ok(Membership::NotMember),
        other => Some(format!(
            "membership SDP ended with {other:?} after {} iterations",
            sol.iterations
        )),
    };
    let mut best: Option<(Certificate, f64)> = None;
    let projected = sdp::project_onto_constraints(&problem, &sol.z);
    for blocks in [&sol.z, &projected] {
        let Ok(cert) = extract_certificate(blocks, spec) else {
            continue;
        };
        let residual = verify_certificate(p, spec.constraints(), &cert)?;
        if best.as_ref().is_none_or(|(_, r)| residual < *r) {
            best = Some((cert, residual));
        }
        if residual <= residual_tol {
            break;
        }
    }
    match (best, stalled) {
        (Some((certificate, residual)), _) if residual <= residual_tol => {
            Ok(Membership::Member { certificate, residual })
        }
        (_, Some(reason)) => Ok(Membership::Indeterminate(reason)),
        (Some((_, residual)), None) => Ok(Membership::Indeterminate(format!(
            "extracted certificate has residual {residual:.3e} above {residual_tol:.1e}"
        ))),
        (None, None) => Ok(Membership::Indeterminate("Gram blocks are indefinite".into())),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CertifyMode {
    /// Linear when `deg q ≤ 1`, concave otherwise.
    #[default]
    Auto,
    Linear,
    Concave,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    pub mode: CertifyMode,
    /// Overrides `d = ⌈(deg p − 1)/2⌉`.
    pub degree: Option<usize>,
    /// Accepted certificate residual.
    pub residual_tol: f64,
    /// Gram trace cap; `None` uses [`default_trace_cap`].
    pub trace_cap: Option<f64>,
    pub sdp: SdpOptions,
    pub refute: RefuteOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            mode: CertifyMode::Auto,
            degree: None,
            residual_tol: 1e-6,
            trace_cap: None,
            sdp: SdpOptions::default(),
            refute: RefuteOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// `p` lies in the module of `q`; `residual` is the symbolic check against `q`.
    Certificate {
        certificate: Certificate,
        residual: f64,
        degree: usize,
    },
    /// `⟨p(X)γ,γ⟩ < 0` with `q(X) ⪰ 0` up to tolerance.
    Witness {
        witness: Witness,
        constraint_min_eig: f64,
        degree: usize,
    },
    Indeterminate(String),
}

impl Verdict {
    pub fn is_certificate(&self) -> bool {
        matches!(self, Verdict::Certificate { .. })
    }

    pub fn is_witness(&self) -> bool {
        matches!(self, Verdict::Witness { .. })
    }
}

/// Half-degree `d` with `deg p ≤ 2d + 1`.
pub fn default_degree(p: &MatPoly) -> usize {
    p.degree().map(|k| k.saturating_sub(1).div_ceil(2)).unwrap_or(0)
}

/// Decide positivity of `p` on `{X : q(X) ⪰ 0}` for monic linear or concave `q`.
pub fn certify_nonneg(p: &MatPoly, q: &MatPoly, opts: &CertifyOptions) -> Result<Verdict> {
    if p.nrows() != p.ncols() {
        return Err(Error::Dimension("target must be square".into()));
    }
    if p.nvars() != q.nvars() {
        return Err(Error::Dimension(
            "target and constraint use different variable counts".into(),
        ));
    }
    if !q.is_symmetric(1e-10) {
        return Err(Error::Malformed("constraint polynomial is not symmetric".into()));
    }
    check_monic(q)?;
    let d = opts.degree.unwrap_or_else(|| default_degree(p));
    if let Some(deg) = p.degree() {
        if deg > 2 * d + 1 {
            return Err(Error::DegreeOverflow(format!(
                "deg p = {deg} exceeds 2d+1 = {}",
                2 * d + 1
            )));
        }
    }
    let nu = p.nrows();
    let module = MembershipSdpOptions {
        trace_cap: Some(opts.trace_cap.unwrap_or_else(|| default_trace_cap(p))),
    };
    let linear = match opts.mode {
        CertifyMode::Auto => q.degree().unwrap_or(0) <= 1,
        CertifyMode::Linear => true,
        CertifyMode::Concave => false,
    };

    let (pencil, membership) = if linear {
        let pencil = MonicPencil::from_poly(q)?;
        let spec = QuadModuleSpec::new(vec![pencil.to_poly()], d, d, nu, p.nvars())?;
        let m = solve_membership(p, &spec, &module, &opts.sdp, opts.residual_tol)?;
        (pencil, m)
    } else {
        let decomp = concave_decompose(q)?;
        let pencil = decomp.linearize();
        let spec = QuadModuleSpec::new(vec![pencil.to_poly()], d + 1, d, nu, p.nvars())?;
        let m = match solve_membership(p, &spec, &module, &opts.sdp, opts.residual_tol)? {
            Membership::Member { certificate, .. } => {
                let pulled = pullback_certificate(&certificate, &decomp)?;
                let residual = verify_certificate(p, std::slice::from_ref(q), &pulled)?;
                if residual <= opts.residual_tol {
                    Membership::Member {
                        certificate: pulled,
                        residual,
                    }
                } else {
                    Membership::Indeterminate(format!("pulled-back certificate has residual {residual:.3e}"))
                }
            }
            other => other,
        };
        (pencil, m)
    };

    let reason = match membership {
        Membership::Member { certificate, residual } => {
            return Ok(Verdict::Certificate {
                certificate,
                residual,
                degree: d,
            })
        }
        Membership::NotMember => String::from("membership SDP infeasible"),
        Membership::Indeterminate(r) => r,
    };
    match refute(p, &pencil, d, &opts.refute)? {
        Refutation::Witness { witness, .. } => {
            let constraint_min_eig = min_eig(&q.evaluate(&witness.x)?);
            if constraint_min_eig >= -opts.refute.domain_tol {
                Ok(Verdict::Witness {
                    witness,
                    constraint_min_eig,
                    degree: d,
                })
            } else {
                Ok(Verdict::Indeterminate(format!(
                    "{reason}; witness violates the constraint (min eig {constraint_min_eig:.3e})"
                )))
            }
        }
        Refutation::NoRefutation { optimum, near_boundary } => Ok(Verdict::Indeterminate(format!(
            "{reason}; refutation optimum {optimum:.3e}{}",
            if near_boundary { " (near boundary)" } else { "" }
        ))),
        Refutation::Indeterminate(r) => Ok(Verdict::Indeterminate(format!("{reason}; {r}"))),
    }
}

/// `p(X)` for a witness, with `⟨p(X)γ,γ⟩`.
pub fn witness_value(p: &MatPoly, witness: &Witness) -> Result<(DMatrix<f64>, f64)> {
    let px = p.evaluate(&witness.x)?;
    if px.nrows() != witness.gamma.len() {
        return Err(Error::Dimension("witness vector does not conform to p(X)".into()));
    }
    let value = witness.gamma.dot(&(&px * &witness.gamma));
    Ok((px, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freealg::{parse_matrix_poly, parse_poly};

    fn ball() -> MatPoly {
        parse_matrix_poly(r#"[["1","x1"],["x1","1"]]"#, 1).unwrap()
    }

    #[test]
    fn degree_choice() {
        assert_eq!(default_degree(&parse_poly("1", 1).unwrap()), 0);
        assert_eq!(default_degree(&parse_poly("x1", 1).unwrap()), 0);
        assert_eq!(default_degree(&parse_poly("2 - x1*x1", 1).unwrap()), 1);
        assert_eq!(default_degree(&parse_poly("x1*x1*x1", 1).unwrap()), 1);
        assert_eq!(default_degree(&parse_poly("x1*x1*x1*x1", 1).unwrap()), 2);
    }

    #[test]
    fn concave_pipeline() {
        let p = parse_poly("2 - x1*x1", 1).unwrap();
        let q = parse_poly("1 - x1*x1", 1).unwrap();
        match certify_nonneg(&p, &q, &CertifyOptions::default()).unwrap() {
            Verdict::Certificate {
                certificate, residual, ..
            } => {
                assert!(residual <= 1e-7);
                assert!(certificate.max_sos_degree().unwrap_or(0) <= 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_target_is_refuted() {
        let p = parse_poly("x1", 1).unwrap();
        match certify_nonneg(&p, &ball(), &CertifyOptions::default()).unwrap() {
            Verdict::Witness {
                witness,
                constraint_min_eig,
                ..
            } => {
                assert!(witness.value <= -0.9);
                assert!(constraint_min_eig >= -1e-8);
                assert!((witness_value(&p, &witness).unwrap().1 - witness.value).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pencil_is_certified() {
        let v = certify_nonneg(&ball(), &ball(), &CertifyOptions::default()).unwrap();
        match v {
            Verdict::Certificate { residual, .. } => assert!(residual <= 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monic_rejected() {
        for q in [r#"[["x1","1"],["1","0"]]"#, r#"[["1","x1"],["x1","0"]]"#] {
            let q = parse_matrix_poly(q, 1).unwrap();
            let p = parse_poly("x1", 1).unwrap();
            assert!(matches!(
                certify_nonneg(&p, &q, &CertifyOptions::default()),
                Err(Error::NonMonic(_))
            ));
        }
    }

    #[test]
    fn degree_overflow() {
        let p = parse_poly("x1*x1*x1", 1).unwrap();
        let opts = CertifyOptions {
            degree: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            certify_nonneg(&p, &ball(), &opts),
            Err(Error::DegreeOverflow(_))
        ));
    }

    #[test]
    fn concave_mode_rejects_convex() {
        let p = parse_poly("1", 1).unwrap();
        let q = parse_poly("1 + x1*x1", 1).unwrap();
        let opts = CertifyOptions {
            mode: CertifyMode::Concave,
            ..Default::default()
        };
        assert!(matches!(certify_nonneg(&p, &q, &opts), Err(Error::NotConcave(_))));
    }
}
