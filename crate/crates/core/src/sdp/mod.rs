//! Dense block semidefinite programming.
//!
//! Problems are stored in equality form
//!
//! ```text
//! minimize   tr(F Z)
//! subject to tr(C_i Z) = b_i,   i = 1..m
//!            Z = blockdiag(Z_1, …, Z_k) ⪰ 0
//! ```
//!
//! whose dual is `maximize b'y s.t. F − Σ y_i C_i ⪰ 0`. Problems with free
//! variables constrained by linear matrix inequalities are encoded through the
//! dual (see [`SdpProblem::from_lmi`]).

mod check;
mod sdpa;
mod solver;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use check::{check_solution, FarkasCheck, ResidualReport};
pub use sdpa::export_sdpa;
pub use solver::solve;

/// Symmetric sparse block matrix, stored as upper-triangle entries.
///
/// An entry `(block, i, j, v)` with `i < j` places `v` at both `(i, j)` and
/// `(j, i)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(usize, usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `v` to the matrix entries `(i, j)` and `(j, i)` of `block`.
    pub fn add(&mut self, block: usize, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((block, i, j, v));
    }

    /// Add `c · Z_ij` to the linear functional `Z ↦ tr(self · Z)`.
    pub fn add_linear(&mut self, block: usize, i: usize, j: usize, c: f64) {
        if i == j {
            self.add(block, i, i, c);
        } else {
            self.add(block, i, j, 0.5 * c);
        }
    }

    /// Identity on the given block.
    pub fn add_identity(&mut self, block: usize, dim: usize, scale: f64) {
        for i in 0..dim {
            self.add(block, i, i, scale);
        }
    }

    /// Dense symmetric block, validated for symmetry.
    pub fn add_dense(&mut self, block: usize, m: &DMatrix<f64>) -> Result<()> {
        if !m.is_square() {
            return Err(Error::Dimension("coefficient block is not square".into()));
        }
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                    return Err(Error::Malformed("coefficient block is not symmetric".into()));
                }
                if m[(i, j)] != 0.0 {
                    self.add(block, i, j, m[(i, j)]);
                }
            }
        }
        Ok(())
    }

    /// Merge duplicates, drop zeros, sort.
    pub fn normalize(&mut self) {
        self.entries.sort_by_key(|a| (a.0, a.1, a.2));
        let mut out: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(b, i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (b, i, j) => last.3 += v,
                _ => out.push((b, i, j, v)),
            }
        }
        out.retain(|e| e.3 != 0.0);
        self.entries = out;
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.3 == 0.0)
    }

    /// `tr(self · Z)` for dense blocks `Z`.
    pub fn dot(&self, z: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|&(b, i, j, v)| {
                if i == j {
                    v * z[b][(i, i)]
                } else {
                    v * (z[b][(i, j)] + z[b][(j, i)])
                }
            })
            .sum()
    }

    /// Accumulate `scale · self` into dense blocks.
    pub fn accumulate_into(&self, out: &mut [DMatrix<f64>], scale: f64) {
        for &(b, i, j, v) in &self.entries {
            out[b][(i, j)] += scale * v;
            if i != j {
                out[b][(j, i)] += scale * v;
            }
        }
    }

    pub fn to_dense(&self, blocks: &[usize]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        self.accumulate_into(&mut out, 1.0);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

/// `tr(a · Z) = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub a: SparseSym,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub constraints: Vec<Constraint>,
    pub objective: SparseSym,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        SdpProblem {
            blocks,
            constraints: Vec::new(),
            objective: SparseSym::new(),
        }
    }

    pub fn add_constraint(&mut self, mut a: SparseSym, rhs: f64) {
        a.normalize();
        self.constraints.push(Constraint { a, rhs });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.rhs))
    }

    /// Encode `maximize b'y s.t. F − Σ y_i C_i ⪰ 0` (free `y`): the LMI blocks
    /// become the primal PSD blocks and `y` is recovered as the dual vector.
    pub fn from_lmi(blocks: Vec<usize>, constant: SparseSym, coefficients: Vec<SparseSym>, b: &[f64]) -> Result<Self> {
        if coefficients.len() != b.len() {
            return Err(Error::Dimension("one objective entry per LMI variable".into()));
        }
        let mut p = SdpProblem::new(blocks);
        p.objective = constant;
        p.objective.normalize();
        for (c, &bi) in coefficients.into_iter().zip(b) {
            p.add_constraint(c, bi);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |s: &SparseSym, what: &str| -> Result<()> {
            for &(b, i, j, v) in s.entries() {
                if b >= self.blocks.len() || i >= self.blocks[b] || j >= self.blocks[b] {
                    return Err(Error::Dimension(format!(
                        "{what}: entry ({b},{i},{j}) outside the block structure"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Malformed(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (k, c) in self.constraints.iter().enumerate() {
            check(&c.a, &format!("constraint {k}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::Malformed(format!("constraint {k}: non-finite rhs")));
            }
        }
        Ok(())
    }
}

/// Orthogonal (Frobenius) projection of `z` onto the affine set
/// `{Z : tr(C_i Z) = b_i}`. The PSD constraint is ignored.
pub fn project_onto_constraints(problem: &SdpProblem, z: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    use std::collections::HashMap;
    let m = problem.constraints.len();
    let maps: Vec<HashMap<(usize, usize, usize), f64>> = problem
        .constraints
        .iter()
        .map(|c| c.a.entries().iter().map(|&(b, i, j, v)| ((b, i, j), v)).collect())
        .collect();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let (small, large) = if maps[i].len() <= maps[k].len() {
                (&maps[i], &maps[k])
            } else {
                (&maps[k], &maps[i])
            };
            let v: f64 = small
                .iter()
                .filter_map(|(key, a)| large.get(key).map(|b| if key.1 == key.2 { a * b } else { 2.0 * a * b }))
                .sum();
            gram[(i, k)] = v;
            gram[(k, i)] = v;
        }
    }
    let r = DVector::from_iterator(m, problem.constraints.iter().map(|c| c.a.dot(z) - c.rhs));
    let coef = match gram.svd(true, true).solve(&r, 1e-12) {
        Ok(c) => c,
        Err(_) => return z.to_vec(),
    };
    let mut out = z.to_vec();
    for (c, &ci) in problem.constraints.iter().zip(coef.iter()) {
        c.a.accumulate_into(&mut out, -ci);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpOptions {
    /// Absolute primal residual and relative dual residual at optimality.
    pub feas_tol: f64,
    /// Relative duality gap at optimality.
    pub gap_tol: f64,
    /// Ratio test for infeasibility rays.
    pub infeas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the step to the boundary of the cone.
    pub step_fraction: f64,
    /// Largest accepted total block dimension.
    pub max_dim: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            infeas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.97,
            max_dim: 1200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Primal infeasible; `y` is a Farkas ray with `b'y = 1`, `−Σ y_i C_i ⪰ 0`.
    Infeasible,
    /// Dual infeasible; `Z` is an improving ray with `tr(F Z) = −1`.
    Unbounded,
    /// No criterion met; the solution holds the iterate closest to optimality.
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub z: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}
