mod common;

use ncpsatz::freealg::{basis_len, enumerate_basis, format_poly, parse_matrix_poly, parse_poly, MatPoly, MatTuple};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-9;

fn max_abs(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Square polynomial with a few random words; sparse so products stay small.
fn sparse_poly(rng: &mut rand_chacha::ChaCha8Rng, n: usize, g: usize, deg: usize) -> MatPoly {
    let basis = enumerate_basis(g, deg);
    let count = rng.random_range(1..=4);
    let terms = (0..count)
        .map(|_| {
            let w = basis[rng.random_range(0..basis.len())].clone();
            (w, nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0)))
        })
        .collect::<Vec<_>>();
    MatPoly::from_terms(n, n, g, terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(seed in any::<u64>(), g in 1usize..=3, n in 1usize..=2) {
        let mut rng = common::rng(seed);
        let p = sparse_poly(&mut rng, n, g, 2);
        let q = sparse_poly(&mut rng, n, g, 2);
        let r = sparse_poly(&mut rng, n, g, 2);
        let distributive = &(&p + &q) * &r;
        let expanded = &(&p * &r) + &(&q * &r);
        prop_assert!(distributive.max_coeff_diff(&expanded) <= TOL);
        let left = &(&p * &q) * &r;
        let right = &p * &(&q * &r);
        prop_assert!(left.max_coeff_diff(&right) <= TOL);
        let anti = (&p * &q).adjoint();
        let swapped = &q.adjoint() * &p.adjoint();
        prop_assert!(anti.max_coeff_diff(&swapped) <= TOL);
        prop_assert!(p.adjoint().adjoint().max_coeff_diff(&p) == 0.0);
    }

    #[test]
    fn evaluation_is_a_homomorphism(seed in any::<u64>(), g in 1usize..=2, n in 1usize..=2, level in 1usize..=3) {
        let mut rng = common::rng(seed);
        let p = sparse_poly(&mut rng, n, g, 2);
        let q = sparse_poly(&mut rng, n, g, 2);
        let x = MatTuple::random_gaussian(g, level, &mut rng);
        let px = p.evaluate(&x).unwrap();
        let qx = q.evaluate(&x).unwrap();
        let pq = (&p * &q).evaluate(&x).unwrap();
        prop_assert!(max_abs(&(&pq - &px * &qx)) <= TOL * (1.0 + max_abs(&pq)));
        let adj = p.adjoint().evaluate(&x).unwrap();
        prop_assert!(max_abs(&(&adj - px.transpose())) <= TOL * (1.0 + max_abs(&px)));
    }

    #[test]
    fn symmetric_polynomials_evaluate_symmetric(seed in any::<u64>(), g in 1usize..=3, level in 1usize..=4) {
        let mut rng = common::rng(seed);
        let p = common::symmetric_part(&common::random_poly(&mut rng, 2, 2, g, 3));
        let x = MatTuple::random_gaussian(g, level, &mut rng);
        let px = p.evaluate(&x).unwrap();
        prop_assert!(max_abs(&(&px - px.transpose())) <= 1e-10 * (1.0 + max_abs(&px)));
    }
}

#[test]
fn basis_length_is_geometric_sum() {
    for g in 1..=4_usize {
        for d in 0..=5 {
            let expected: usize = (0..=d as u32).map(|j| g.pow(j)).sum();
            assert_eq!(basis_len(g, d), expected);
            let basis = enumerate_basis(g, d);
            assert_eq!(basis.len(), expected);
            for pair in basis.windows(2) {
                assert!(
                    pair[0].degree() < pair[1].degree() || (pair[0].degree() == pair[1].degree() && pair[0] < pair[1])
                );
            }
        }
    }
}

#[test]
fn format_then_parse_is_exact_on_a_seeded_corpus() {
    let mut rng = common::rng(100);
    for _ in 0..100 {
        let g = rng.random_range(1..=3);
        let deg = rng.random_range(0..=3);
        let p = common::random_poly(&mut rng, 1, 1, g, deg);
        let text = format_poly(&p);
        let back = parse_poly(&text, g).unwrap();
        assert_eq!(back, p, "{text}");
    }
}

#[test]
fn matrix_polynomials_round_trip() {
    let mut rng = common::rng(101);
    for _ in 0..20 {
        let p = common::random_poly(&mut rng, 2, 3, 2, 2);
        let text = format_poly(&p);
        assert_eq!(parse_matrix_poly(&text, 2).unwrap(), p, "{text}");
    }
}

#[test]
fn involution_example_reverses_letters() {
    let p = parse_poly("2 - 3*x1*x1*x2*x3", 3).unwrap();
    let q = parse_poly("2 - 3*x3*x2*x1*x1", 3).unwrap();
    assert_eq!(p.adjoint(), q);
    assert_eq!(parse_poly("(2 - 3*x1*x1*x2*x3)'", 3).unwrap(), q);
}
