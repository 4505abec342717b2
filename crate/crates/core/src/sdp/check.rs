//! Solver-independent recomputation of residuals.

use nalgebra::DMatrix;

use super::{SdpProblem, SdpSolution, SdpStatus};
use crate::linalg::min_eig;

/// Defining inequalities of a Farkas ray: `b'y > 0` and `−Σ y_i C_i ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FarkasCheck {
    pub b_dot_y: f64,
    /// Smallest eigenvalue of `−Σ y_i C_i` over all blocks.
    pub min_eig_neg_aty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// `max_i |tr(C_i Z) − b_i|`.
    pub primal_residual: f64,
    pub min_eig_z: f64,
    /// Smallest eigenvalue of the dual slack `F − Σ y_i C_i`.
    pub min_eig_dual_slack: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub farkas: Option<FarkasCheck>,
}

fn combination(problem: &SdpProblem, y: &[f64]) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = problem.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for (c, &yi) in problem.constraints.iter().zip(y) {
        c.a.accumulate_into(&mut out, yi);
    }
    out
}

fn min_eig_blocks(blocks: &[DMatrix<f64>]) -> f64 {
    blocks
        .iter()
        .filter(|b| b.nrows() > 0)
        .map(min_eig)
        .fold(f64::INFINITY, f64::min)
}

/// Recompute every residual of `solution` directly from `problem`.
pub fn check_solution(problem: &SdpProblem, solution: &SdpSolution) -> ResidualReport {
    let z = &solution.z;
    let y: Vec<f64> = solution.y.iter().copied().collect();
    let primal_residual = problem
        .constraints
        .iter()
        .map(|c| (c.a.dot(z) - c.rhs).abs())
        .fold(0.0, f64::max);
    let primal_objective = problem.objective.dot(z);
    let dual_objective: f64 = problem.constraints.iter().zip(&y).map(|(c, yi)| c.rhs * yi).sum();
    let aty = combination(problem, &y);
    let mut slack = problem.objective.to_dense(&problem.blocks);
    for (s, a) in slack.iter_mut().zip(&aty) {
        *s -= a;
    }
    let farkas = (solution.status == SdpStatus::Infeasible).then(|| {
        let neg: Vec<DMatrix<f64>> = aty.iter().map(|a| -a).collect();
        FarkasCheck {
            b_dot_y: dual_objective,
            min_eig_neg_aty: min_eig_blocks(&neg),
        }
    });
    ResidualReport {
        primal_residual,
        min_eig_z: min_eig_blocks(z),
        min_eig_dual_slack: min_eig_blocks(&slack),
        primal_objective,
        dual_objective,
        gap: primal_objective - dual_objective,
        farkas,
    }
}
