//! Gram-matrix parametrization of truncated quadratic modules.
//!
//! An element of `M_{α,β}^ν(Q)` is
//! `Σ_j s_j* s_j + Σ_q Σ_j f_{j,q}* q f_{j,q}` with `deg s_j ≤ α` and
//! `deg f_{j,q} ≤ β`. Collecting the factors into Gram matrices gives one PSD
//! block `G` indexed by `(word ≤ α, column a)` at `i·ν + a` and one block
//! `H_q` per constraint indexed by `(word ≤ β, row c, column a)` at
//! `(i·ℓ_q + c)·ν + a`. Matching coefficients of `p` is linear in the blocks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freealg::{enumerate_basis, MatPoly, Word};
use crate::linalg::{max_eig, min_eig, psd_factor};
use crate::sdp::{SdpProblem, SparseSym};
use crate::serial::MatPolyJson;

/// Eigenvalues below this fraction of the largest are dropped when factoring.
pub const GRAM_RANK_TOL: f64 = 1e-9;

/// Degree data of a truncated quadratic module `M_{α,β}^ν(Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadModuleSpec {
    constraints: Vec<MatPoly>,
    sos_degree: usize,
    weight_degree: usize,
    nu: usize,
    nvars: usize,
    constraint_degree: usize,
    kappa: usize,
}

impl QuadModuleSpec {
    pub fn new(
        constraints: Vec<MatPoly>,
        sos_degree: usize,
        weight_degree: usize,
        nu: usize,
        nvars: usize,
    ) -> Result<Self> {
        if nu == 0 || nvars == 0 {
            return Err(Error::Malformed("ν and the variable count must be positive".into()));
        }
        for (k, q) in constraints.iter().enumerate() {
            if q.nvars() != nvars {
                return Err(Error::Dimension(format!(
                    "constraint {k} has {} variables, expected {nvars}",
                    q.nvars()
                )));
            }
            if !q.is_symmetric(1e-10) {
                return Err(Error::Malformed(format!("constraint {k} is not symmetric")));
            }
        }
        let constraint_degree = constraints.iter().filter_map(|q| q.degree()).max().unwrap_or(0);
        let mut kappa = 2 * sos_degree;
        if !constraints.is_empty() {
            kappa = kappa.max(2 * weight_degree + constraint_degree);
        }
        Ok(QuadModuleSpec {
            constraints,
            sos_degree,
            weight_degree,
            nu,
            nvars,
            constraint_degree,
            kappa,
        })
    }

    pub fn constraints(&self) -> &[MatPoly] {
        &self.constraints
    }

    pub fn sos_degree(&self) -> usize {
        self.sos_degree
    }

    pub fn weight_degree(&self) -> usize {
        self.weight_degree
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constraint_degree(&self) -> usize {
        self.constraint_degree
    }

    /// Largest degree reachable by elements of the module.
    pub fn kappa(&self) -> usize {
        self.kappa
    }
}

/// Block structure of the membership SDP.
#[derive(Clone, Debug, PartialEq)]
pub struct GramLayout {
    pub sos_basis: Vec<Word>,
    pub weight_basis: Vec<Word>,
    pub nu: usize,
    /// `ℓ_q` per constraint.
    pub constraint_sizes: Vec<usize>,
}

impl GramLayout {
    pub fn new(spec: &QuadModuleSpec) -> Self {
        GramLayout {
            sos_basis: enumerate_basis(spec.nvars, spec.sos_degree),
            weight_basis: enumerate_basis(spec.nvars, spec.weight_degree),
            nu: spec.nu,
            constraint_sizes: spec.constraints.iter().map(|q| q.nrows()).collect(),
        }
    }

    pub fn sos_dim(&self) -> usize {
        self.nu * self.sos_basis.len()
    }

    pub fn weight_dim(&self, q: usize) -> usize {
        self.constraint_sizes[q] * self.nu * self.weight_basis.len()
    }

    /// Gram block sizes: `G` first, then one `H_q` per constraint.
    pub fn blocks(&self) -> Vec<usize> {
        std::iter::once(self.sos_dim())
            .chain((0..self.constraint_sizes.len()).map(|q| self.weight_dim(q)))
            .collect()
    }

    pub fn sos_index(&self, word: usize, col: usize) -> usize {
        word * self.nu + col
    }

    pub fn weight_index(&self, q: usize, word: usize, row: usize, col: usize) -> usize {
        (word * self.constraint_sizes[q] + row) * self.nu + col
    }
}

/// `Σ s_j* s_j + Σ_q Σ_j f_{j,q}* q f_{j,q}` as explicit factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Factors with `ν` columns.
    pub sos: Vec<MatPoly>,
    /// Per constraint, factors with `ℓ_q` rows and `ν` columns.
    pub weighted: Vec<Vec<MatPoly>>,
}

impl Certificate {
    pub fn empty(num_constraints: usize) -> Self {
        Certificate {
            sos: Vec::new(),
            weighted: vec![Vec::new(); num_constraints],
        }
    }

    /// Expand the certificate symbolically.
    pub fn reconstruct(&self, constraints: &[MatPoly], nu: usize, nvars: usize) -> Result<MatPoly> {
        if self.weighted.len() > constraints.len() {
            return Err(Error::Dimension(format!(
                "certificate has weights for {} constraints, {} given",
                self.weighted.len(),
                constraints.len()
            )));
        }
        let mut acc = MatPoly::zero(nu, nu, nvars);
        for s in &self.sos {
            acc = acc.try_add(&s.adjoint().try_mul(s)?)?;
        }
        for (fs, q) in self.weighted.iter().zip(constraints) {
            for f in fs {
                acc = acc.try_add(&f.adjoint().try_mul(q)?.try_mul(f)?)?;
            }
        }
        Ok(acc)
    }

    pub fn max_sos_degree(&self) -> Option<usize> {
        self.sos.iter().filter_map(|s| s.degree()).max()
    }

    pub fn max_weight_degree(&self) -> Option<usize> {
        self.weighted.iter().flatten().filter_map(|f| f.degree()).max()
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            sos: self.sos.iter().map(MatPolyJson::from).collect(),
            weighted: self
                .weighted
                .iter()
                .enumerate()
                .map(|(k, fs)| (k.to_string(), fs.iter().map(MatPolyJson::from).collect()))
                .collect(),
        }
    }
}

/// `{"sos": [matpoly], "weighted": {"0": [matpoly]}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CertificateJson {
    pub sos: Vec<MatPolyJson>,
    pub weighted: BTreeMap<String, Vec<MatPolyJson>>,
}

impl CertificateJson {
    pub fn to_certificate(&self, nvars: usize) -> Result<Certificate> {
        let sos = self.sos.iter().map(|s| s.to_poly(nvars)).collect::<Result<Vec<_>>>()?;
        let mut weighted: Vec<Vec<MatPoly>> = Vec::new();
        for (k, fs) in &self.weighted {
            let idx: usize = k
                .parse()
                .map_err(|_| Error::Malformed(format!("constraint index `{k}`")))?;
            if weighted.len() <= idx {
                weighted.resize(idx + 1, Vec::new());
            }
            weighted[idx] = fs.iter().map(|f| f.to_poly(nvars)).collect::<Result<Vec<_>>>()?;
        }
        Ok(Certificate { sos, weighted })
    }
}

/// Key of one coefficient-matching equation: `(word, row, column)` up to the
/// identification `(m, a, b) ~ (m*, b, a)` of a symmetric polynomial.
fn canonical(m: Word, a: usize, b: usize) -> Option<(Word, usize, usize)> {
    let key = (m, a, b);
    let mirror = (key.0.star(), b, a);
    (key <= mirror).then_some(key)
}

/// Options of the membership SDP.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MembershipSdpOptions {
    /// Upper bound on the total trace of the Gram blocks, added through a
    /// scalar slack block. Bounding the Gram matrices turns boundary
    /// (closure-only) memberships into detectable infeasibility.
    pub trace_cap: Option<f64>,
}

/// Default trace cap: `1e4 · max(1, max coefficient of p) · ν`.
pub fn default_trace_cap(p: &MatPoly) -> f64 {
    1e4 * p.max_coeff().max(1.0) * p.nrows() as f64
}

/// Membership of `p` in `M_{α,β}^ν(Q)` as a block SDP minimizing total trace.
pub fn assemble_membership_sdp(p: &MatPoly, spec: &QuadModuleSpec, opts: &MembershipSdpOptions) -> Result<SdpProblem> {
    if p.shape() != (spec.nu, spec.nu) {
        return Err(Error::Dimension(format!(
            "target is {}x{}, module has ν = {}",
            p.nrows(),
            p.ncols(),
            spec.nu
        )));
    }
    if p.nvars() != spec.nvars {
        return Err(Error::Dimension(
            "target and module use different variable counts".into(),
        ));
    }
    if !p.is_symmetric(1e-10) {
        return Err(Error::Malformed("target polynomial is not symmetric".into()));
    }
    if let Some(deg) = p.degree() {
        if deg > spec.kappa {
            return Err(Error::DegreeOverflow(format!(
                "deg p = {deg} exceeds the module's top degree {}",
                spec.kappa
            )));
        }
    }
    let layout = GramLayout::new(spec);
    let nu = spec.nu;
    let mut rows: BTreeMap<(Word, usize, usize), SparseSym> = BTreeMap::new();

    for (i, v) in layout.sos_basis.iter().enumerate() {
        for (k, u) in layout.sos_basis.iter().enumerate() {
            let m = Word::star_concat(v, u);
            for a in 0..nu {
                for b in 0..nu {
                    if let Some(key) = canonical(m.clone(), a, b) {
                        rows.entry(key)
                            .or_default()
                            .add_linear(0, layout.sos_index(i, a), layout.sos_index(k, b), 1.0);
                    }
                }
            }
        }
    }
    for (qi, q) in spec.constraints.iter().enumerate() {
        let lq = q.nrows();
        for (i, v) in layout.weight_basis.iter().enumerate() {
            for (k, u) in layout.weight_basis.iter().enumerate() {
                for (w, qw) in q.terms() {
                    let m = Word::sandwich(v, w, u);
                    for a in 0..nu {
                        for b in 0..nu {
                            let Some(key) = canonical(m.clone(), a, b) else {
                                continue;
                            };
                            let row = rows.entry(key).or_default();
                            for c in 0..lq {
                                for d in 0..lq {
                                    let coef = qw[(c, d)];
                                    if coef != 0.0 {
                                        row.add_linear(
                                            1 + qi,
                                            layout.weight_index(qi, i, c, a),
                                            layout.weight_index(qi, k, d, b),
                                            coef,
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (w, c) in p.terms() {
        for a in 0..nu {
            for b in 0..nu {
                if c[(a, b)] != 0.0 {
                    if let Some(key) = canonical(w.clone(), a, b) {
                        rows.entry(key).or_default();
                    }
                }
            }
        }
    }

    let mut blocks = layout.blocks();
    let gram_blocks = blocks.len();
    if opts.trace_cap.is_some() {
        blocks.push(1);
    }
    let mut problem = SdpProblem::new(blocks.clone());
    for (key, a) in rows {
        let rhs = p.coeff(&key.0)[(key.1, key.2)];
        problem.add_constraint(a, rhs);
    }
    let mut trace = SparseSym::new();
    for (b, &n) in blocks.iter().enumerate().take(gram_blocks) {
        trace.add_identity(b, n, 1.0);
    }
    problem.objective = trace.clone();
    if let Some(cap) = opts.trace_cap {
        trace.add(gram_blocks, 0, 0, 1.0);
        problem.add_constraint(trace, cap);
    }
    Ok(problem)
}

fn check_gram(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let (lo, hi) = (min_eig(m), max_eig(m));
    if lo < -1e-6 * hi.max(1.0) {
        return Err(Error::Solver(format!(
            "{what} Gram matrix is indefinite (λ_min = {lo:.3e})"
        )));
    }
    Ok(())
}

/// Factor the Gram blocks of a membership solution into polynomials.
pub fn extract_certificate(blocks: &[DMatrix<f64>], spec: &QuadModuleSpec) -> Result<Certificate> {
    let layout = GramLayout::new(spec);
    let expected = layout.blocks();
    if blocks.len() < expected.len() || blocks.iter().zip(&expected).any(|(b, &n)| b.shape() != (n, n)) {
        return Err(Error::Dimension("Gram blocks do not match the module layout".into()));
    }
    let (nu, g) = (spec.nu, spec.nvars);
    check_gram(&blocks[0], "SOS")?;
    let sos = psd_factor(&blocks[0], GRAM_RANK_TOL)
        .into_iter()
        .map(|h| unflatten(&h, &layout.sos_basis, 1, nu, g))
        .collect::<Result<Vec<_>>>()?;
    let mut weighted = Vec::new();
    for (qi, &lq) in layout.constraint_sizes.iter().enumerate() {
        check_gram(&blocks[1 + qi], "weight")?;
        let fs = psd_factor(&blocks[1 + qi], GRAM_RANK_TOL)
            .into_iter()
            .map(|h| unflatten(&h, &layout.weight_basis, lq, nu, g))
            .collect::<Result<Vec<_>>>()?;
        weighted.push(fs);
    }
    Ok(Certificate { sos, weighted })
}

/// Inverse of the `(word, row, column)` flattening.
fn unflatten(h: &DVector<f64>, basis: &[Word], rows: usize, nu: usize, g: usize) -> Result<MatPoly> {
    MatPoly::from_terms(
        rows,
        nu,
        g,
        basis
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), DMatrix::from_fn(rows, nu, |c, a| h[(i * rows + c) * nu + a]))),
    )
}

/// Max over words and entries of `|[p] − [reconstruct(cert)]|`.
pub fn verify_certificate(p: &MatPoly, constraints: &[MatPoly], cert: &Certificate) -> Result<f64> {
    let r = cert.reconstruct(constraints, p.nrows(), p.nvars())?;
    Ok(p.max_coeff_diff(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freealg::{parse_matrix_poly, parse_poly};
    use crate::sdp::{solve, SdpOptions, SdpStatus};

    fn ball() -> MatPoly {
        parse_matrix_poly(r#"[["1","x1"],["x1","1"]]"#, 1).unwrap()
    }

    #[test]
    fn kappa_and_layout() {
        let spec = QuadModuleSpec::new(vec![ball()], 1, 1, 2, 1).unwrap();
        assert_eq!(spec.kappa(), 3);
        let layout = GramLayout::new(&spec);
        assert_eq!(layout.blocks(), vec![4, 8]);
        assert_eq!(layout.weight_index(0, 1, 1, 0), 6);
        let pure = QuadModuleSpec::new(vec![], 2, 5, 1, 3).unwrap();
        assert_eq!(pure.kappa(), 4);
    }

    #[test]
    fn constraint_count_bound() {
        let spec = QuadModuleSpec::new(vec![ball()], 1, 1, 2, 1).unwrap();
        let p = MatPoly::identity(2, 1);
        let prob = assemble_membership_sdp(&p, &spec, &MembershipSdpOptions::default()).unwrap();
        let bound = 3 * crate::freealg::basis_len(1, spec.kappa());
        assert!(prob.num_constraints() <= bound);
    }

    #[test]
    fn degree_overflow() {
        let spec = QuadModuleSpec::new(vec![], 1, 0, 1, 1).unwrap();
        let p = parse_poly("x1*x1*x1*x1", 1).unwrap();
        assert!(matches!(
            assemble_membership_sdp(&p, &spec, &MembershipSdpOptions::default()),
            Err(Error::DegreeOverflow(_))
        ));
    }

    fn solve_member(p: &MatPoly, spec: &QuadModuleSpec) -> (SdpStatus, Option<Certificate>) {
        let prob = assemble_membership_sdp(p, spec, &MembershipSdpOptions::default()).unwrap();
        let sol = solve(&prob, &SdpOptions::default()).unwrap();
        let cert = (sol.status == SdpStatus::Optimal).then(|| extract_certificate(&sol.z, spec).unwrap());
        (sol.status, cert)
    }

    #[test]
    fn pure_sos_one_plus_square() {
        let p = parse_poly("1 + x1*x1", 1).unwrap();
        let spec = QuadModuleSpec::new(vec![], 1, 0, 1, 1).unwrap();
        let prob = assemble_membership_sdp(&p, &spec, &MembershipSdpOptions::default()).unwrap();
        let sol = solve(&prob, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let g = &sol.z[0];
        assert!((g - DMatrix::identity(2, 2)).abs().max() < 1e-7);
        let cert = extract_certificate(&sol.z, &spec).unwrap();
        assert_eq!(cert.sos.len(), 2);
        assert!(verify_certificate(&p, &[], &cert).unwrap() < 1e-7);
    }

    #[test]
    fn odd_polynomial_is_not_sos() {
        let p = parse_poly("x1", 1).unwrap();
        let spec = QuadModuleSpec::new(vec![], 1, 0, 1, 1).unwrap();
        assert_eq!(solve_member(&p, &spec).0, SdpStatus::Infeasible);
    }

    #[test]
    fn two_minus_square_over_ball() {
        let p = parse_poly("2 - x1*x1", 1).unwrap();
        let spec = QuadModuleSpec::new(vec![ball()], 1, 1, 1, 1).unwrap();
        let (status, cert) = solve_member(&p, &spec);
        assert_eq!(status, SdpStatus::Optimal);
        assert!(verify_certificate(&p, &[ball()], &cert.unwrap()).unwrap() <= 1e-7);
    }

    #[test]
    fn factors_from_identity_gram() {
        let spec = QuadModuleSpec::new(vec![], 1, 0, 1, 1).unwrap();
        let cert = extract_certificate(&[DMatrix::identity(2, 2)], &spec).unwrap();
        let mut got: Vec<MatPoly> = cert
            .sos
            .iter()
            .map(|s| {
                let sign = s.terms().values().next().unwrap()[(0, 0)].signum();
                s.scale(sign)
            })
            .collect();
        got.sort_by_key(|s| s.degree());
        assert_eq!(got[0], MatPoly::scalar(1.0, 1));
        assert_eq!(got[1], parse_poly("x1", 1).unwrap());
        let zero = extract_certificate(&[DMatrix::zeros(2, 2)], &spec).unwrap();
        assert!(zero.sos.is_empty());
    }

    #[test]
    fn nonmonic_identity_and_corruption() {
        let q = parse_matrix_poly(r#"[["x1","1"],["1","0"]]"#, 1).unwrap();
        let u = parse_matrix_poly(r#"[["1"],["-1 - 0.5*x1"]]"#, 1).unwrap();
        let cert = Certificate {
            sos: vec![],
            weighted: vec![vec![u.scale(std::f64::consts::FRAC_1_SQRT_2)]],
        };
        let minus_one = MatPoly::scalar(-1.0, 1);
        assert!(verify_certificate(&minus_one, std::slice::from_ref(&q), &cert).unwrap() <= 1e-12);
        let mut bad = cert.clone();
        bad.weighted[0][0] = bad.weighted[0][0]
            .try_add(
                &MatPoly::from_terms(
                    2,
                    1,
                    1,
                    [(Word::empty(), DMatrix::from_column_slice(2, 1, &[1e-3, 0.0]))],
                )
                .unwrap(),
            )
            .unwrap();
        assert!(verify_certificate(&minus_one, &[q], &bad).unwrap() >= 9e-4);
    }

    #[test]
    fn json_roundtrip() {
        let cert = Certificate {
            sos: vec![parse_poly("1 - x1", 1).unwrap()],
            weighted: vec![vec![], vec![parse_matrix_poly(r#"[["x1"],["2"]]"#, 1).unwrap()]],
        };
        let j = serde_json::to_string(&cert.to_json()).unwrap();
        let back: CertificateJson = serde_json::from_str(&j).unwrap();
        assert_eq!(back.to_certificate(1).unwrap(), cert);
    }
}
