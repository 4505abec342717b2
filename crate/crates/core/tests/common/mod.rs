//! Seeded generators shared by the integration suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ncpsatz::certify::Certificate;
use ncpsatz::freealg::{enumerate_basis, MatPoly};
use ncpsatz::pencil::MonicPencil;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sym_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// `[[1, x1], [x1, 1]]`.
pub fn ball() -> MonicPencil {
    MonicPencil::new(2, vec![DMatrix::from_row_slice(2, 2, &[0., -1., -1., 0.])]).unwrap()
}

/// `1 − x1`.
pub fn halfline() -> MonicPencil {
    MonicPencil::new(1, vec![DMatrix::from_element(1, 1, 1.0)]).unwrap()
}

/// Arrow pencil `[[1, r·xᵀ], [r·x, I]]` with random positive radii: a
/// bounded ellipsoid `Σ r_j² x_j² ≤ 1` at level one.
pub fn ball_type(rng: &mut ChaCha8Rng, g: usize) -> MonicPencil {
    let l = g + 1;
    let coeffs = (0..g)
        .map(|j| {
            let r = rng.random_range(0.5..2.0);
            let mut a = DMatrix::zeros(l, l);
            a[(0, j + 1)] = -r;
            a[(j + 1, 0)] = -r;
            a
        })
        .collect();
    MonicPencil::new(l, coeffs).unwrap()
}

/// Random symmetric coefficients, scaled so that `Σ‖A_j‖ = 1`.
pub fn random_pencil(rng: &mut ChaCha8Rng, g: usize, l: usize) -> MonicPencil {
    let mats: Vec<DMatrix<f64>> = (0..g).map(|_| sym_matrix(rng, l)).collect();
    let total: f64 = mats.iter().map(|a| a.norm()).sum::<f64>().max(1e-12);
    MonicPencil::new(l, mats.into_iter().map(|a| a / total).collect()).unwrap()
}

/// Random `rows×cols` polynomial with all words of degree at most `deg`.
pub fn random_poly(rng: &mut ChaCha8Rng, rows: usize, cols: usize, g: usize, deg: usize) -> MatPoly {
    let terms = enumerate_basis(g, deg)
        .into_iter()
        .map(|w| (w, DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))))
        .collect::<Vec<_>>();
    MatPoly::from_terms(rows, cols, g, terms).unwrap()
}

pub fn symmetric_part(p: &MatPoly) -> MatPoly {
    (p + &p.adjoint()).scale(0.5)
}

/// A random element of `M_{d,d}^ν(L)` with its certificate.
pub fn module_element(rng: &mut ChaCha8Rng, pencil: &MonicPencil, nu: usize, d: usize) -> (MatPoly, Certificate) {
    let g = pencil.nvars();
    let l = pencil.size();
    let sos: Vec<MatPoly> = (0..rng.random_range(1..=2))
        .map(|_| random_poly(rng, nu, nu, g, d))
        .collect();
    let weighted: Vec<MatPoly> = (0..rng.random_range(1..=2))
        .map(|_| random_poly(rng, l, nu, g, d))
        .collect();
    let cert = Certificate {
        sos,
        weighted: vec![weighted],
    };
    let p = cert.reconstruct(&[pencil.to_poly()], nu, g).unwrap();
    (p, cert)
}

/// Symmetric target of degree at most `deg` with a random constant shift;
/// positive on small domains for large shifts and negative somewhere for
/// negative ones.
pub fn shifted_target(rng: &mut ChaCha8Rng, nu: usize, g: usize, deg: usize) -> MatPoly {
    let h = symmetric_part(&random_poly(rng, nu, nu, g, deg));
    let shift = rng.random_range(-1.0..3.0);
    &h + &MatPoly::identity(nu, g).scale(shift)
}

/// Monic concave quadratic `I − Λ(x) − s(x)* s(x)` with linear `Λ` and `s`.
pub fn random_concave(rng: &mut ChaCha8Rng, g: usize, l: usize, lp: usize) -> MatPoly {
    let lambda = random_pencil(rng, g, l).to_poly();
    let s_terms = (0..g)
        .map(|j| {
            let m = DMatrix::from_fn(lp, l, |_, _| rng.random_range(-0.5..0.5));
            (ncpsatz::freealg::Word::letter(j), m)
        })
        .collect::<Vec<_>>();
    let s = MatPoly::from_terms(lp, l, g, s_terms).unwrap();
    &lambda - &(&s.adjoint() * &s)
}
