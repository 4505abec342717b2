//! Monic linear pencils `L(x) = I − Σ A_j x_j`, concave quadratics and their
//! linearization, boundedness of LMI domains and unit certificates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certify::Certificate;
use crate::error::{Error, Result};
use crate::freealg::{MatPoly, MatTuple, Word};
use crate::linalg::{max_abs, min_eig, psd_factor, sym_eigenvalues};
use crate::sdp::{self, SdpOptions, SdpProblem, SdpStatus, SparseSym};
use crate::serial::{matrix_to_json, square_from_json, MatrixJson};

const SYMMETRY_TOL: f64 = 1e-12;
const MONIC_TOL: f64 = 1e-12;
const CONCAVITY_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;

/// `I_ℓ − Σ A_j x_j` with symmetric `A_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonicPencil {
    size: usize,
    coeffs: Vec<DMatrix<f64>>,
}

impl MonicPencil {
    pub fn new(size: usize, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Malformed("a pencil needs at least one variable".into()));
        }
        for (j, a) in coeffs.iter().enumerate() {
            if a.shape() != (size, size) {
                return Err(Error::Dimension(format!(
                    "A_{} is {}x{}, expected {size}x{size}",
                    j + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
            if max_abs(&(a - a.transpose())) > SYMMETRY_TOL {
                return Err(Error::Malformed(format!("A_{} is not symmetric", j + 1)));
            }
        }
        let coeffs = coeffs.into_iter().map(|a| (&a + a.transpose()) * 0.5).collect();
        Ok(MonicPencil { size, coeffs })
    }

    /// Read a pencil off a polynomial of degree at most one with constant term `I`.
    pub fn from_poly(q: &MatPoly) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::Dimension("a pencil is square".into()));
        }
        if q.degree().unwrap_or(0) > 1 {
            return Err(Error::Malformed("a linear pencil has degree at most one".into()));
        }
        check_monic(q)?;
        let coeffs = (0..q.nvars()).map(|j| -q.coeff(&Word::letter(j))).collect();
        MonicPencil::new(q.nrows(), coeffs)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn to_poly(&self) -> MatPoly {
        let g = self.nvars();
        let terms = std::iter::once((Word::empty(), DMatrix::identity(self.size, self.size)))
            .chain(self.coeffs.iter().enumerate().map(|(j, a)| (Word::letter(j), -a)));
        MatPoly::from_terms(self.size, self.size, g, terms).expect("pencil terms conform")
    }

    /// `L(X) = I − Σ A_j ⊗ X_j`.
    pub fn evaluate(&self, x: &MatTuple) -> Result<DMatrix<f64>> {
        self.to_poly().evaluate(x)
    }

    /// Smallest eigenvalue of `L(X)`.
    pub fn min_eig_at(&self, x: &MatTuple) -> Result<f64> {
        Ok(min_eig(&self.evaluate(x)?))
    }

    /// `Σ_j ‖A_j‖₂`.
    pub fn coefficient_norm_sum(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|a| sym_eigenvalues(a).iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .sum()
    }

    pub fn to_json(&self) -> PencilJson {
        PencilJson {
            size: self.size,
            nvars: self.nvars(),
            a: self
                .coeffs
                .iter()
                .map(|m| MatrixJson::Rows(matrix_to_json(m)))
                .collect(),
        }
    }
}

/// `{"size": ℓ, "nvars": g, "A": [matrices]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PencilJson {
    pub size: usize,
    pub nvars: usize,
    #[serde(rename = "A")]
    pub a: Vec<MatrixJson>,
}

impl PencilJson {
    pub fn to_pencil(&self) -> Result<MonicPencil> {
        if self.a.len() != self.nvars {
            return Err(Error::Dimension(format!(
                "{} coefficient matrices for {} variables",
                self.a.len(),
                self.nvars
            )));
        }
        let coeffs = self
            .a
            .iter()
            .map(|m| crate::serial::matrix_from_json(m, self.size, self.size))
            .collect::<Result<Vec<_>>>()?;
        MonicPencil::new(self.size, coeffs)
    }
}

/// Accept `square_from_json`-style matrices when the size is implied.
pub fn pencil_from_matrices(mats: &[MatrixJson]) -> Result<MonicPencil> {
    let coeffs = mats.iter().map(square_from_json).collect::<Result<Vec<_>>>()?;
    let size = coeffs.first().map(|m| m.nrows()).unwrap_or(0);
    MonicPencil::new(size, coeffs)
}

pub(crate) fn check_monic(q: &MatPoly) -> Result<()> {
    let c = q.constant_term();
    let dev = max_abs(&(c - DMatrix::<f64>::identity(q.nrows(), q.ncols())));
    if q.nrows() != q.ncols() || dev > MONIC_TOL {
        return Err(Error::NonMonic(format!("constant term deviates from I by {dev:.3e}")));
    }
    Ok(())
}

/// `q = I − Λ − s*s` with `Λ` (ℓ×ℓ) and `s` (ℓ′×ℓ) homogeneous linear.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcaveDecomposition {
    pub lambda: MatPoly,
    pub s: MatPoly,
}

impl ConcaveDecomposition {
    pub fn size(&self) -> usize {
        self.lambda.nrows()
    }

    /// Number of rows of `s`.
    pub fn extra_rows(&self) -> usize {
        self.s.nrows()
    }

    pub fn nvars(&self) -> usize {
        self.lambda.nvars()
    }

    /// `I − Λ − s*s`.
    pub fn reconstruct(&self) -> MatPoly {
        let id = MatPoly::identity(self.size(), self.nvars());
        &(&id - &self.lambda) - &(&self.s.adjoint() * &self.s)
    }

    /// `[[I, s], [s*, I − Λ]]` as a monic pencil of size `ℓ + ℓ′`.
    pub fn linearize(&self) -> MonicPencil {
        let (l, lp) = (self.size(), self.extra_rows());
        let coeffs = (0..self.nvars())
            .map(|j| {
                let w = Word::letter(j);
                let mut a = DMatrix::zeros(l + lp, l + lp);
                let sj = self.s.coeff(&w);
                a.view_mut((0, lp), (lp, l)).copy_from(&(-&sj));
                a.view_mut((lp, 0), (l, lp)).copy_from(&(-sj.transpose()));
                a.view_mut((lp, lp), (l, l)).copy_from(&self.lambda.coeff(&w));
                a
            })
            .collect();
        MonicPencil::new(l + lp, coeffs).expect("linearization is symmetric")
    }
}

/// Split a monic concave quadratic into its linear part and a square.
pub fn concave_decompose(q: &MatPoly) -> Result<ConcaveDecomposition> {
    if !q.is_symmetric(1e-10) {
        return Err(Error::Malformed("constraint polynomial is not symmetric".into()));
    }
    check_monic(q)?;
    let deg = q.degree().unwrap_or(0);
    if deg > 2 {
        return Err(Error::NotConcave(format!("degree {deg} exceeds 2")));
    }
    let (l, g) = (q.nrows(), q.nvars());
    let mut lambda = MatPoly::zero(l, l, g);
    for j in 0..g {
        let w = Word::letter(j);
        lambda = &lambda + &MatPoly::from_terms(l, l, g, [(w.clone(), -q.coeff(&w))])?;
    }
    let mut block = DMatrix::zeros(l * g, l * g);
    for i in 0..g {
        for j in 0..g {
            let w = Word::from_letters([i, j]);
            block.view_mut((i * l, j * l), (l, l)).copy_from(&(-q.coeff(&w)));
        }
    }
    let lo = min_eig(&block);
    if lo < -CONCAVITY_TOL {
        return Err(Error::NotConcave(format!(
            "quadratic part has eigenvalue {lo:.3e} of the wrong sign"
        )));
    }
    let rows = psd_factor(&block, RANK_TOL);
    let lp = rows.len();
    let mut s = MatPoly::zero(lp, l, g);
    for i in 0..g {
        let mut si = DMatrix::zeros(lp, l);
        for (r, c) in rows.iter().enumerate() {
            for col in 0..l {
                si[(r, col)] = c[i * l + col];
            }
        }
        s = &s + &MatPoly::from_terms(lp, l, g, [(Word::letter(i), si)])?;
    }
    Ok(ConcaveDecomposition { lambda, s })
}

/// Pencil `Q` with the same LMI domain as the concave `q`.
pub fn linearize(q: &MatPoly) -> Result<MonicPencil> {
    Ok(concave_decompose(q)?.linearize())
}

/// Turn a certificate against the linearization into one against `q`:
/// each weighted factor `[f; g]` becomes the square `f + s g` plus the
/// weighted factor `g`.
pub fn pullback_certificate(cert: &Certificate, decomp: &ConcaveDecomposition) -> Result<Certificate> {
    if cert.weighted.len() > 1 {
        return Err(Error::Dimension("expected a certificate with one constraint".into()));
    }
    let (l, lp) = (decomp.size(), decomp.extra_rows());
    let mut sos = cert.sos.clone();
    let mut weighted = Vec::new();
    for fg in cert.weighted.first().into_iter().flatten() {
        if fg.nrows() != l + lp {
            return Err(Error::Dimension(format!(
                "weighted factor has {} rows, linearization has {}",
                fg.nrows(),
                l + lp
            )));
        }
        let g = fg.row_block(lp, l)?;
        if lp > 0 {
            let f = fg.row_block(0, lp)?;
            let square = f.try_add(&decomp.s.try_mul(&g)?)?;
            if !square.is_zero() {
                sos.push(square);
            }
        }
        if !g.is_zero() {
            weighted.push(g);
        }
    }
    Ok(Certificate {
        sos,
        weighted: vec![weighted],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Boundedness {
    Bounded,
    /// A nonzero `x` with `Σ x_j A_j ⪯ 0`: the ray `t·x` stays in the domain.
    Unbounded {
        direction: Vec<f64>,
    },
    Indeterminate(String),
}

/// Decide boundedness of `{x : L(x) ⪰ 0}` through its recession cone
/// `{x : Σ x_j A_j ⪯ 0}`, which is `{0}` iff every `±x_j` has maximum 0 over
/// the cone intersected with the unit box.
pub fn is_bounded(pencil: &MonicPencil, tol: f64) -> Result<Boundedness> {
    let g = pencil.nvars();
    let l = pencil.size();
    let mut blocks = vec![l];
    blocks.extend(std::iter::repeat_n(1, 2 * g));
    let mut constant = SparseSym::new();
    for k in 0..2 * g {
        constant.add(1 + k, 0, 0, 1.0);
    }
    let coefficients: Vec<SparseSym> = (0..g)
        .map(|k| {
            let mut c = SparseSym::new();
            c.add_dense(0, &pencil.coeffs[k])
                .expect("pencil coefficients are symmetric");
            c.add(1 + k, 0, 0, 1.0);
            c.add(1 + g + k, 0, 0, -1.0);
            c
        })
        .collect();
    let opts = SdpOptions::default();
    for j in 0..g {
        for sign in [1.0, -1.0] {
            let mut b = vec![0.0; g];
            b[j] = sign;
            let problem = SdpProblem::from_lmi(blocks.clone(), constant.clone(), coefficients.clone(), &b)?;
            let sol = sdp::solve(&problem, &opts)?;
            if sol.status != SdpStatus::Optimal {
                return Ok(Boundedness::Indeterminate(format!(
                    "recession-cone SDP for {}x{} ended with {:?}",
                    if sign > 0.0 { "+" } else { "-" },
                    j + 1,
                    sol.status
                )));
            }
            if sol.dual_objective > tol {
                return Ok(Boundedness::Unbounded {
                    direction: sol.y.iter().copied().collect(),
                });
            }
        }
    }
    Ok(Boundedness::Bounded)
}

/// `H = Σ h_k h_kᵀ ⪰ 0` with `tr H = 1` and `tr(A_j H) = 0`, so that
/// `Σ_k h_kᵀ L(x) h_k = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitCertificate {
    pub vectors: Vec<DVector<f64>>,
}

impl UnitCertificate {
    /// `W_{k,s} = h_k e_sᵀ ∈ R^{ℓ×target}` with `Σ W*LW = I_target`.
    pub fn factors(&self, target: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.vectors.len() * target);
        for h in &self.vectors {
            for s in 0..target {
                let mut w = DMatrix::zeros(h.len(), target);
                w.set_column(s, h);
                out.push(w);
            }
        }
        out
    }

    /// `H = Σ h_k h_kᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.vectors.first().map(|h| h.len()).unwrap_or(0);
        self.vectors
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, h| acc + h * h.transpose())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UnitOutcome {
    Exists(UnitCertificate),
    /// `Σ c_j A_j` is positive definite (smallest eigenvalue normalized to 1).
    Nonexistent {
        coefficients: Vec<f64>,
        combination: DMatrix<f64>,
    },
}

/// `Σ W_j* L W_j` as a polynomial.
pub fn congruence_sum(pencil: &MonicPencil, factors: &[DMatrix<f64>], target: usize) -> Result<MatPoly> {
    let l = pencil.to_poly();
    let mut acc = MatPoly::zero(target, target, pencil.nvars());
    for w in factors {
        if w.shape() != (pencil.size(), target) {
            return Err(Error::Dimension("congruence factor does not conform".into()));
        }
        acc = acc.try_add(&l.left_mul_const(&w.transpose())?.right_mul_const(w)?)?;
    }
    Ok(acc)
}

/// Orthonormal basis `B_k = Σ_j A_j T[j,k]` of `span{A_j}` (Frobenius inner
/// product), so that the trace conditions are linearly independent rows.
fn span_basis(coeffs: &[DMatrix<f64>], l: usize) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    let g = coeffs.len();
    if g == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let stacked = DMatrix::from_fn(l * l, g, |r, j| coeffs[j][(r / l, r % l)]);
    let svd = stacked.svd(true, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-12 * top.max(1e-300))
        .collect();
    let t = DMatrix::from_fn(g, kept.len(), |j, c| v_t[(kept[c], j)] / svd.singular_values[kept[c]]);
    let basis = (0..kept.len())
        .map(|c| {
            let b = coeffs
                .iter()
                .enumerate()
                .fold(DMatrix::zeros(l, l), |acc, (j, a)| acc + a * t[(j, c)]);
            (&b + b.transpose()) * 0.5
        })
        .collect();
    (basis, t)
}

/// Search for `I = Σ W_j* L(x) W_j`.
pub fn unit_certificate(pencil: &MonicPencil) -> Result<UnitOutcome> {
    let l = pencil.size();
    let (basis, t) = span_basis(&pencil.coeffs, l);
    let mut problem = SdpProblem::new(vec![l]);
    let mut trace = SparseSym::new();
    trace.add_identity(0, l, 1.0);
    problem.objective = trace.clone();
    problem.add_constraint(trace, 1.0);
    for b in &basis {
        let mut c = SparseSym::new();
        c.add_dense(0, b)?;
        problem.add_constraint(c, 0.0);
    }
    let sol = sdp::solve(&problem, &SdpOptions::default())?;
    match sol.status {
        SdpStatus::Optimal => {
            let raw = sol.z[0].clone();
            let projected = sdp::project_onto_constraints(&problem, &sol.z)[0].clone();
            let pick = if min_eig(&projected) >= 0.0 { projected } else { raw };
            Ok(UnitOutcome::Exists(UnitCertificate {
                vectors: psd_factor(&pick, RANK_TOL),
            }))
        }
        SdpStatus::Infeasible => {
            let y0 = sol.y[0];
            let on_basis = DVector::from_fn(basis.len(), |k, _| -sol.y[k + 1] / y0);
            let coefficients: Vec<f64> = (&t * on_basis).iter().copied().collect();
            let combination = pencil
                .coeffs
                .iter()
                .zip(&coefficients)
                .fold(DMatrix::zeros(l, l), |acc, (a, c)| acc + a * *c);
            let lo = min_eig(&combination);
            // negated so NaN fails too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(lo > 0.0) {
                return Err(Error::Solver(format!(
                    "infeasibility ray gives a combination with smallest eigenvalue {lo:.3e}"
                )));
            }
            Ok(UnitOutcome::Nonexistent {
                coefficients: coefficients.iter().map(|c| c / lo).collect(),
                combination: combination / lo,
            })
        }
        other => Err(Error::Solver(format!("unit-certificate SDP ended with {other:?}"))),
    }
}
