mod common;

use nalgebra::DMatrix;
use ncpsatz::domination::{check_domination, compose, strengthen_bounded, Domination, DOMINATION_TOL};
use ncpsatz::linalg::min_eig;
use ncpsatz::moment::RefuteOptions;
use ncpsatz::pencil::{is_bounded, Boundedness, MonicPencil};
use ncpsatz::sdp::SdpOptions;
use rand::Rng;

/// `I − t·Λ_A`: the domain scaled by `1/t`.
fn scaled(l: &MonicPencil, t: f64) -> MonicPencil {
    MonicPencil::new(l.size(), l.coeffs().iter().map(|a| a * t).collect()).unwrap()
}

fn dominate(l: &MonicPencil, lp: &MonicPencil) -> Domination {
    check_domination(l, lp, &SdpOptions::default(), &RefuteOptions::default()).unwrap()
}

#[test]
fn relaxations_are_dominated_and_certificates_compose() {
    let mut rng = common::rng(40);
    for _ in 0..10 {
        let g = rng.random_range(1..=2);
        let l = if rng.random_bool(0.5) {
            common::ball_type(&mut rng, g)
        } else {
            let size = rng.random_range(1..=3);
            common::random_pencil(&mut rng, g, size)
        };
        let mid = scaled(&l, 0.5);
        let outer = scaled(&l, 0.25);
        for (a, b) in [(&l, &l), (&l, &mid), (&mid, &outer)] {
            let Domination::Dominates { certificate, residual } = dominate(a, b) else {
                panic!("relaxation not certified");
            };
            assert!(residual <= DOMINATION_TOL);
            assert!(certificate.residual(a, b).unwrap() <= DOMINATION_TOL);
            assert!(min_eig(&certificate.s) >= -1e-9);
        }
        let (
            Domination::Dominates { certificate: first, .. },
            Domination::Dominates {
                certificate: second, ..
            },
        ) = (dominate(&l, &mid), dominate(&mid, &outer))
        else {
            unreachable!()
        };
        let chained = compose(&first, &second).unwrap();
        assert!(chained.residual(&l, &outer).unwrap() <= 2e-8);
    }
}

#[test]
fn failed_dominations_carry_verified_witnesses() {
    let mut rng = common::rng(41);
    for _ in 0..8 {
        let g = rng.random_range(1..=2);
        let l = common::ball_type(&mut rng, g);
        let inner = scaled(&l, 2.0);
        match dominate(&l, &inner) {
            Domination::Witness(w) => {
                assert!(l.min_eig_at(&w.x).unwrap() >= -1e-8);
                assert!(inner.min_eig_at(&w.x).unwrap() <= -1e-7);
                assert!(w.x.level() <= inner.size() * (1 + g));
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn bounded_pencils_absorb_the_constant_part() {
    let mut rng = common::rng(42);
    for _ in 0..8 {
        let g = rng.random_range(1..=2);
        let l = common::ball_type(&mut rng, g);
        assert!(matches!(is_bounded(&l, 1e-8).unwrap(), Boundedness::Bounded));
        let Domination::Dominates { certificate, .. } = dominate(&l, &scaled(&l, 0.5)) else {
            panic!("relaxation not certified");
        };
        let pure = strengthen_bounded(&l, &certificate).unwrap();
        assert_eq!(pure.s, DMatrix::zeros(l.size(), l.size()));
        assert!(pure.residual(&l, &scaled(&l, 0.5)).unwrap() <= DOMINATION_TOL);
    }
}
