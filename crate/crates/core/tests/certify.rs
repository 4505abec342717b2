mod common;

use nalgebra::DMatrix;
use ncpsatz::certify::{
    certify_nonneg, default_trace_cap, solve_membership, verify_certificate, CertifyMode, CertifyOptions, Membership,
    MembershipSdpOptions, QuadModuleSpec, Verdict,
};
use ncpsatz::freealg::{parse_matrix_poly, parse_poly, MatPoly};
use ncpsatz::moment::{refute, Refutation, RefuteOptions};
use ncpsatz::pencil::{concave_decompose, pullback_certificate, MonicPencil};
use ncpsatz::sdp::SdpOptions;
use ncpsatz::Error;
use proptest::prelude::*;
use rand::Rng;

const RESIDUAL_TOL: f64 = 1e-6;

fn membership(p: &MatPoly, pencil: &MonicPencil, alpha: usize, beta: usize) -> Membership {
    let spec = QuadModuleSpec::new(vec![pencil.to_poly()], alpha, beta, p.nrows(), pencil.nvars()).unwrap();
    let module = MembershipSdpOptions {
        trace_cap: Some(default_trace_cap(p)),
    };
    solve_membership(p, &spec, &module, &SdpOptions::default(), RESIDUAL_TOL).unwrap()
}

fn decided(m: &Membership) -> Option<bool> {
    match m {
        Membership::Member { .. } => Some(true),
        Membership::NotMember => Some(false),
        Membership::Indeterminate(_) => None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn module_elements_are_certified(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let g = rng.random_range(1..=2);
        let l = rng.random_range(1..=3);
        let nu = rng.random_range(1..=2);
        let d = rng.random_range(0..=1);
        let pencil = common::random_pencil(&mut rng, g, l);
        let (p, _) = common::module_element(&mut rng, &pencil, nu, d);
        match membership(&p, &pencil, d, d) {
            Membership::Member { certificate, residual } => {
                let r = verify_certificate(&p, &[pencil.to_poly()], &certificate).unwrap();
                prop_assert!(r <= RESIDUAL_TOL);
                prop_assert!((r - residual).abs() <= 1e-12);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

#[test]
fn degree_policy_levels_agree() {
    // with a linear constraint and deg p ≤ 2d+1, M_{d+1,d} and M_{d,d} decide alike
    let mut rng = common::rng(27);
    let mut compared = 0;
    for _ in 0..16 {
        let g = rng.random_range(1..=2);
        let pencil = common::ball_type(&mut rng, g);
        let deg = rng.random_range(1..=3);
        let p = common::shifted_target(&mut rng, 1, g, deg);
        let d = 1;
        let low = decided(&membership(&p, &pencil, d, d));
        let high = decided(&membership(&p, &pencil, d + 1, d));
        if let (Some(a), Some(b)) = (low, high) {
            assert_eq!(a, b, "M_(d,d) and M_(d+1,d) disagree on {p:?}");
            compared += 1;
        }
    }
    assert_eq!(compared, 16);
}

#[test]
fn membership_and_refutation_are_complementary() {
    let mut rng = common::rng(28);
    for _ in 0..12 {
        let g = rng.random_range(1..=2);
        let nu = rng.random_range(1..=2);
        let deg = rng.random_range(1..=3);
        let pencil = common::ball_type(&mut rng, g);
        let p = common::shifted_target(&mut rng, nu, g, deg);
        let d = deg.saturating_sub(1).div_ceil(2);
        let feasible = decided(&membership(&p, &pencil, d, d)).expect("membership decided");
        let optimum = match refute(&p, &pencil, d, &RefuteOptions::default()).unwrap() {
            Refutation::Witness { optimum, .. } | Refutation::NoRefutation { optimum, .. } => optimum,
            Refutation::Indeterminate(reason) => panic!("{reason}"),
        };
        assert_eq!(
            feasible,
            optimum >= -1e-7,
            "membership {feasible}, refutation optimum {optimum:.3e}"
        );
    }
}

#[test]
fn concave_certificates_pull_back() {
    let mut rng = common::rng(29);
    for _ in 0..20 {
        let g = rng.random_range(1..=2);
        let l = rng.random_range(1..=2);
        let lp = rng.random_range(1..=2);
        let q = common::random_concave(&mut rng, g, l, lp);
        let decomp = concave_decompose(&q).unwrap();
        let big = decomp.linearize();
        let (p, _) = common::module_element(&mut rng, &big, 1, 1);
        let Membership::Member { certificate, residual } = membership(&p, &big, 2, 1) else {
            panic!("module element of the linearization not certified");
        };
        let pulled = pullback_certificate(&certificate, &decomp).unwrap();
        let r = verify_certificate(&p, std::slice::from_ref(&q), &pulled).unwrap();
        assert!(
            r <= 1e-7 && r <= residual + 1e-9,
            "pulled back residual {r:.3e} from {residual:.3e}"
        );
        for s in &pulled.sos {
            assert!(s.degree().unwrap_or(0) <= 2);
        }
    }
}

#[test]
fn verdicts_are_verified() {
    let mut rng = common::rng(30);
    for _ in 0..10 {
        let g = rng.random_range(1..=2);
        let pencil = common::ball_type(&mut rng, g);
        let p = common::shifted_target(&mut rng, 1, g, 2);
        match certify_nonneg(&p, &pencil.to_poly(), &CertifyOptions::default()).unwrap() {
            Verdict::Certificate {
                certificate, residual, ..
            } => {
                assert!(residual <= RESIDUAL_TOL);
                assert!(verify_certificate(&p, &[pencil.to_poly()], &certificate).unwrap() <= RESIDUAL_TOL);
            }
            Verdict::Witness {
                witness,
                constraint_min_eig,
                ..
            } => {
                assert!(constraint_min_eig >= -1e-8);
                let px = p.evaluate(&witness.x).unwrap();
                let value = witness.gamma.dot(&(&px * &witness.gamma));
                assert!(value < -1e-7);
            }
            Verdict::Indeterminate(reason) => panic!("{reason}"),
        }
    }
}

#[test]
fn non_monic_constraints_are_rejected() {
    let p = parse_poly("x1", 1).unwrap();
    for q in [r#"[["x1","1"],["1","0"]]"#, r#"[["1","x1"],["x1","0"]]"#] {
        let q = parse_matrix_poly(q, 1).unwrap();
        for mode in [CertifyMode::Auto, CertifyMode::Linear, CertifyMode::Concave] {
            let opts = CertifyOptions {
                mode,
                ..CertifyOptions::default()
            };
            assert!(matches!(certify_nonneg(&p, &q, &opts), Err(Error::NonMonic(_))));
        }
    }
}

#[test]
fn two_minus_square_over_the_disc_both_ways() {
    let p = parse_poly("2 - x1*x1", 1).unwrap();
    let q = parse_poly("1 - x1*x1", 1).unwrap();
    let Verdict::Certificate { residual, .. } = certify_nonneg(&p, &q, &CertifyOptions::default()).unwrap() else {
        panic!("concave route failed");
    };
    assert!(residual <= 1e-7);
    let ball = MonicPencil::new(2, vec![DMatrix::from_row_slice(2, 2, &[0., -1., -1., 0.])]).unwrap();
    let verdict = certify_nonneg(&p, &ball.to_poly(), &CertifyOptions::default()).unwrap();
    assert!(verdict.is_certificate());
}
