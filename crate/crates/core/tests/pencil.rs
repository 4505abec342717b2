mod common;

use nalgebra::DMatrix;
use ncpsatz::freealg::{MatPoly, MatTuple};
use ncpsatz::linalg::min_eig;
use ncpsatz::pencil::{concave_decompose, congruence_sum, is_bounded, unit_certificate, Boundedness, UnitOutcome};
use rand::Rng;

#[test]
fn boundedness_and_unit_certificates_agree() {
    // bounded iff the coefficient span has no definite element iff a unit certificate exists
    let mut rng = common::rng(60);
    let (mut bounded, mut unbounded) = (0, 0);
    for _ in 0..40 {
        let g = rng.random_range(1..=3);
        let l = rng.random_range(1..=4);
        let pencil = common::random_pencil(&mut rng, g, l);
        let unit = unit_certificate(&pencil).unwrap();
        match is_bounded(&pencil, 1e-8).unwrap() {
            Boundedness::Bounded => {
                bounded += 1;
                let UnitOutcome::Exists(cert) = unit else {
                    panic!("bounded pencil without a unit certificate");
                };
                let sum = congruence_sum(&pencil, &cert.factors(1), 1).unwrap();
                assert!(sum.max_coeff_diff(&MatPoly::identity(1, g)) <= 1e-8);
                let w = cert.factors(3);
                let gram: DMatrix<f64> = w.iter().map(|wj| wj.transpose() * wj).sum();
                assert!((gram - DMatrix::identity(3, 3)).amax() <= 1e-8);
            }
            Boundedness::Unbounded { direction } => {
                unbounded += 1;
                let ray: DMatrix<f64> = pencil.coeffs().iter().zip(&direction).map(|(a, x)| a * *x).sum();
                assert!(min_eig(&(-ray)) >= -1e-8);
                if let UnitOutcome::Nonexistent { combination, .. } = unit {
                    assert!((min_eig(&combination) - 1.0).abs() <= 1e-9);
                }
            }
            Boundedness::Indeterminate(reason) => panic!("{reason}"),
        }
    }
    assert!(bounded > 0 && unbounded > 0, "bounded {bounded}, unbounded {unbounded}");
}

#[test]
fn linearization_preserves_the_domain() {
    let mut rng = common::rng(61);
    let mut compared = 0;
    for _ in 0..10 {
        let g = rng.random_range(1..=2);
        let l = rng.random_range(1..=2);
        let lp = rng.random_range(1..=2);
        let q = common::random_concave(&mut rng, g, l, lp);
        let decomp = concave_decompose(&q).unwrap();
        assert!(decomp.reconstruct().max_coeff_diff(&q) <= 1e-8);
        let big = decomp.linearize();
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let x = MatTuple::random_gaussian(g, n, &mut rng).scaled(rng.random_range(0.1..2.0));
            let small = min_eig(&q.evaluate(&x).unwrap());
            let lin = big.min_eig_at(&x).unwrap();
            if small.abs() < 1e-6 || lin.abs() < 1e-6 {
                continue;
            }
            assert_eq!(small > 0.0, lin > 0.0, "q: {small:.3e}, Q: {lin:.3e}");
            compared += 1;
        }
    }
    assert!(compared > 300);
}
