//! Modules beyond the concave case, the projected localizing test and the
//! sampling falsifier.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{default_trace_cap, solve_membership, Membership, MembershipSdpOptions, QuadModuleSpec};
use crate::error::{Error, Result};
use crate::freealg::{basis_len, enumerate_basis, word_value, MatPoly, MatTuple};
use crate::linalg::{min_eig, orthonormal_span};
use crate::moment::{Witness, WitnessResiduals};
use crate::sdp::SdpOptions;

const SPAN_RANK_TOL: f64 = 1e-10;
const PROJECTED_PSD_TOL: f64 = 1e-9;
const FALSIFY_TOL: f64 = 1e-7;
const MAX_SAMPLE_LEVEL: usize = 12;

/// Membership of `p` in `M_{d+a,β}(Q)` for `Q = {I − s*s}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralOutcome {
    /// The constraints `I − s*s`, in the order of the certificate's weights.
    pub constraints: Vec<MatPoly>,
    pub sos_degree: usize,
    pub membership: Membership,
}

/// `p` of degree at most `2d` against `M_{d+a,β}({I − s*s : s ∈ S})`, where
/// `a` bounds the degrees of the `s` and `β < d`.
pub fn certify_general(
    p: &MatPoly,
    squares: &[MatPoly],
    d: usize,
    beta: usize,
    sdp_opts: &SdpOptions,
) -> Result<GeneralOutcome> {
    if beta >= d {
        return Err(Error::DegreeOverflow(format!(
            "weight degree {beta} must be below d = {d}"
        )));
    }
    if let Some(deg) = p.degree() {
        if deg > 2 * d {
            return Err(Error::DegreeOverflow(format!("deg p = {deg} exceeds 2d = {}", 2 * d)));
        }
    }
    let g = p.nvars();
    let mut constraints = Vec::with_capacity(squares.len());
    for s in squares {
        if s.nvars() != g {
            return Err(Error::Dimension(
                "constraint and target use different variable counts".into(),
            ));
        }
        let q = MatPoly::identity(s.ncols(), g).try_sub(&s.adjoint().try_mul(s)?)?;
        constraints.push(q);
    }
    let a = squares.iter().filter_map(|s| s.degree()).max().unwrap_or(0);
    let spec = QuadModuleSpec::new(constraints.clone(), d + a, beta, p.nrows(), g)?;
    let module = MembershipSdpOptions {
        trace_cap: Some(default_trace_cap(p)),
    };
    let membership = solve_membership(p, &spec, &module, sdp_opts, 1e-6)?;
    Ok(GeneralOutcome {
        constraints,
        sos_degree: d + a,
        membership,
    })
}

/// Whether `P (1 − s(X)ᵀs(X)) P ⪰ 0` for every `s`, with `P` the projection
/// onto `span{w(X)ζ : deg w ≤ β}`. Each `s` has one column.
pub fn projected_localizing_check(x: &MatTuple, zeta: &DVector<f64>, beta: usize, squares: &[MatPoly]) -> Result<bool> {
    let n = x.level();
    if zeta.len() != n {
        return Err(Error::Dimension(format!(
            "ζ has length {}, tuple level is {n}",
            zeta.len()
        )));
    }
    if zeta.norm() == 0.0 {
        return Err(Error::Malformed("ζ must be nonzero".into()));
    }
    let words = enumerate_basis(x.nvars(), beta);
    let mut cache = HashMap::new();
    let mut spanning = DMatrix::zeros(n, words.len());
    for (k, w) in words.iter().enumerate() {
        spanning.set_column(k, &(word_value(w, x, &mut cache) * zeta));
    }
    let basis = orthonormal_span(&spanning, SPAN_RANK_TOL);
    for s in squares {
        if s.ncols() != 1 || s.nvars() != x.nvars() {
            return Err(Error::Dimension(
                "each s must be a column polynomial in the tuple's variables".into(),
            ));
        }
        let sx = s.evaluate(x)?;
        let q = DMatrix::identity(n, n) - sx.transpose() * &sx;
        let compressed = basis.transpose() * q * &basis;
        if min_eig(&compressed) < -PROJECTED_PSD_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of sampling `p` on the domain of `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub trials: usize,
    /// Largest level sampled.
    pub max_level: usize,
    /// Most negative eigenvalue of `p(X)` seen (`+inf` without samples).
    pub min_eig: f64,
    pub falsified: bool,
    /// The sample attaining `min_eig` when it falsifies, with a bottom eigenvector.
    pub witness: Option<Witness>,
}

/// Draw `X` in `{q(X) ⪰ 0}` at levels up to `min(ν σ(d+1), 12)` and track the
/// smallest eigenvalue of `p(X)`. Samples outside the domain are pulled toward
/// the origin by bisection on `t ↦ q(tX)`.
pub fn random_eval_check(p: &MatPoly, q: &MatPoly, trials: usize, seed: u64) -> Result<EvalReport> {
    if p.nvars() != q.nvars() {
        return Err(Error::Dimension(
            "target and constraint use different variable counts".into(),
        ));
    }
    let g = q.nvars();
    let d = super::default_degree(p);
    let max_level = (p.nrows() * basis_len(g, d + 1)).clamp(1, MAX_SAMPLE_LEVEL);
    let mut report = EvalReport {
        trials,
        max_level,
        min_eig: f64::INFINITY,
        falsified: false,
        witness: None,
    };
    if trials == 0 {
        return Ok(report);
    }
    if min_eig(&q.evaluate(&MatTuple::zeros(g, 1))?) < 0.0 {
        return Err(Error::Sampling(
            "the origin is outside the domain; no sampling path".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let n = 1 + t % max_level;
        let radius = 2f64.powf(rng.random_range(-3.0..3.0));
        let raw = MatTuple::random_gaussian(g, n, &mut rng);
        let norm = raw.mats().iter().map(|m| m.norm()).fold(0.0, f64::max).max(1e-300);
        let x = pull_into_domain(q, raw.scaled(radius / norm))?;
        let px = p.evaluate(&x)?;
        let eig = SymmetricEigen::new(crate::linalg::sym(&px));
        let (k, &lo) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty evaluation");
        if lo < report.min_eig {
            report.min_eig = lo;
            if lo < -FALSIFY_TOL {
                report.falsified = true;
                report.witness = Some(Witness {
                    gamma: eig.eigenvectors.column(k).into_owned(),
                    nu: p.nrows(),
                    value: lo,
                    residuals: WitnessResiduals {
                        domain_min_eig: Some(min_eig(&q.evaluate(&x)?)),
                        target_min_eig: Some(lo),
                        ..Default::default()
                    },
                    x,
                });
            }
        }
    }
    Ok(report)
}

fn pull_into_domain(q: &MatPoly, x: MatTuple) -> Result<MatTuple> {
    if min_eig(&q.evaluate(&x)?) >= 0.0 {
        return Ok(x);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if min_eig(&q.evaluate(&x.scaled(mid))?) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(x.scaled(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freealg::parse_poly;

    #[test]
    fn general_with_constant_weights() {
        let p = parse_poly("2 - x1*x1", 1).unwrap();
        let s = parse_poly("x1", 1).unwrap();
        let out = certify_general(&p, &[s], 1, 0, &SdpOptions::default()).unwrap();
        match out.membership {
            Membership::Member { residual, .. } => assert!(residual <= 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_constant_is_not_sos() {
        let p = parse_poly("-1", 1).unwrap();
        let out = certify_general(&p, &[], 1, 0, &SdpOptions::default()).unwrap();
        assert_eq!(out.membership, Membership::NotMember);
    }

    #[test]
    fn quartic_with_unit_weight() {
        let p = parse_poly("1 - x1*x1*x1*x1", 1).unwrap();
        let s = parse_poly("x1*x1", 1).unwrap();
        let out = certify_general(&p, &[s], 2, 0, &SdpOptions::default()).unwrap();
        assert!(
            matches!(out.membership, Membership::Member { .. }),
            "{:?}",
            out.membership
        );
    }

    #[test]
    fn general_degree_rules() {
        let p = parse_poly("1", 1).unwrap();
        assert!(matches!(
            certify_general(&p, &[], 1, 1, &SdpOptions::default()),
            Err(Error::DegreeOverflow(_))
        ));
        let p = parse_poly("x1*x1*x1*x1", 1).unwrap();
        assert!(matches!(
            certify_general(&p, &[], 1, 0, &SdpOptions::default()),
            Err(Error::DegreeOverflow(_))
        ));
    }

    #[test]
    fn projected_check_examples() {
        let s = parse_poly("x1", 1).unwrap();
        let one = DVector::from_element(1, 1.0);
        assert!(!projected_localizing_check(&MatTuple::from_point(&[2.0]), &one, 0, std::slice::from_ref(&s)).unwrap());
        assert!(projected_localizing_check(&MatTuple::from_point(&[0.5]), &one, 0, std::slice::from_ref(&s)).unwrap());
        let zero = MatTuple::zeros(1, 3);
        let zeta = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!(projected_localizing_check(&zero, &zeta, 2, std::slice::from_ref(&s)).unwrap());
        assert!(matches!(
            projected_localizing_check(&zero, &DVector::zeros(3), 0, &[s]),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn projected_check_matches_quadratic_form_at_level_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = parse_poly("x1*x2 + x2*x1", 2).unwrap();
        for _ in 0..20 {
            let x = MatTuple::random_gaussian(2, 3, &mut rng).scaled(0.7);
            let zeta = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let sx = s.evaluate(&x).unwrap();
            let form = zeta.norm_squared() - (&sx * &zeta).norm_squared();
            let got = projected_localizing_check(&x, &zeta, 0, std::slice::from_ref(&s)).unwrap();
            if form.abs() > 1e-6 {
                assert_eq!(got, form >= 0.0);
            }
        }
    }

    #[test]
    fn sampling_examples() {
        let q = parse_poly("1 - x1*x1", 1).unwrap();
        let r = random_eval_check(&parse_poly("2 - x1*x1", 1).unwrap(), &q, 100, 1).unwrap();
        assert!(!r.falsified && r.min_eig >= 1.0 - 1e-6);
        let r = random_eval_check(&parse_poly("x1", 1).unwrap(), &q, 100, 1).unwrap();
        assert!(r.falsified);
        let w = r.witness.unwrap();
        assert!(w.residuals.domain_min_eig.unwrap() >= 0.0);
        let r = random_eval_check(&parse_poly("x1", 1).unwrap(), &q, 0, 1).unwrap();
        assert_eq!((r.trials, r.falsified, r.witness), (0, false, None));
    }
}
