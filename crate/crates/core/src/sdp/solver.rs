//! Primal-dual interior-point method on the homogeneous self-dual embedding
//!
//! ```text
//! A(X) − bτ = 0,   −A*(y) + Cτ − S = 0,   b'y − ⟨C,X⟩ − κ = 0,
//! X, S ⪰ 0,  τ, κ ≥ 0
//! ```
//!
//! with the HKM search direction and a Mehrotra predictor-corrector. On exit
//! either `τ` stays positive (optimal pair `(X/τ, y/τ, S/τ)`) or `κ` does and
//! the iterate normalizes to an infeasibility ray.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SdpOptions, SdpProblem, SdpSolution, SdpStatus};
use crate::error::{Error, Result};
use crate::linalg::{min_eig, sym};

/// Entries `(p, q, a)` of one constraint restricted to one block.
type BlockEntries = (usize, Vec<(usize, usize, f64)>);

struct Data {
    blocks: Vec<usize>,
    /// Expanded `(p, q, a)` entries of each scaled constraint, grouped by block:
    /// `rows[i]` is a list of `(block, entries)`.
    rows: Vec<Vec<BlockEntries>>,
    members: Vec<Vec<usize>>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
    scale: Vec<f64>,
    kept: Vec<usize>,
}

impl Data {
    fn m(&self) -> usize {
        self.rows.len()
    }

    /// `(tr(A_i Y))_i` for any square blocks `Y`.
    fn apply_a(&self, y: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.rows.iter().map(|row| {
                row.iter()
                    .map(|(b, es)| es.iter().map(|&(p, q, a)| a * y[*b][(q, p)]).sum::<f64>())
                    .sum()
            }),
        )
    }

    /// `Σ y_i A_i`.
    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (b, es) in row {
                for &(p, q, a) in es {
                    out[*b][(p, q)] += yi * a;
                }
            }
        }
        out
    }

    /// `M_ij = tr(A_i X A_j S⁻¹)`.
    fn schur(&self, x: &[DMatrix<f64>], sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (blk, members) in self.members.iter().enumerate() {
            let (xb, sb) = (&x[blk], &sinv[blk]);
            for (ii, &i) in members.iter().enumerate() {
                let ei = self.block_entries(i, blk);
                for &j in &members[ii..] {
                    let ej = self.block_entries(j, blk);
                    let mut acc = 0.0;
                    for &(p, q, a) in ei {
                        for &(r, s, c) in ej {
                            acc += a * c * xb[(q, r)] * sb[(s, p)];
                        }
                    }
                    out[(i, j)] += acc;
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }

    fn block_entries(&self, i: usize, blk: usize) -> &[(usize, usize, f64)] {
        self.rows[i]
            .iter()
            .find(|(b, _)| *b == blk)
            .map(|(_, e)| e.as_slice())
            .unwrap_or(&[])
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn max_abs_blocks(a: &[DMatrix<f64>]) -> f64 {
    a.iter().flat_map(|m| m.iter()).fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest `α` with `X + α dX ⪰ 0` (`+inf` if unbounded, `0` if `X` is not PD).
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, dxb) in x.iter().zip(dx) {
        if xb.nrows() == 0 {
            continue;
        }
        let Some(ch) = Cholesky::new(xb.clone()) else {
            return 0.0;
        };
        let l = ch.l();
        let Some(y) = l.solve_lower_triangular(dxb) else {
            return 0.0;
        };
        let Some(z) = l.solve_lower_triangular(&y.transpose()) else {
            return 0.0;
        };
        let lo = min_eig(&z);
        if lo < 0.0 {
            alpha = alpha.min(-1.0 / lo);
        }
    }
    alpha
}

fn inverse_pd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

/// Cholesky of the Schur complement, with a growing diagonal shift when the
/// constraint matrices are (numerically) dependent.
fn factor_schur(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let top = m.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut delta = 1e-13 * top;
    for _ in 0..8 {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

#[allow(clippy::result_large_err)]
fn build(problem: &SdpProblem, opts: &SdpOptions) -> std::result::Result<Data, SdpSolution> {
    let blocks = problem.blocks.clone();
    let mut rows = Vec::new();
    let mut scale = Vec::new();
    let mut kept = Vec::new();
    let mut b = Vec::new();
    for (k, con) in problem.constraints.iter().enumerate() {
        let norm = con.a.frobenius_norm();
        if norm == 0.0 {
            if con.rhs.abs() > opts.feas_tol {
                return Err(trivially_infeasible(problem, k));
            }
            continue;
        }
        let mut grouped: Vec<BlockEntries> = Vec::new();
        for &(blk, i, j, v) in con.a.entries() {
            let a = v / norm;
            let slot = match grouped.iter().position(|(gb, _)| *gb == blk) {
                Some(p) => p,
                None => {
                    grouped.push((blk, Vec::new()));
                    grouped.len() - 1
                }
            };
            grouped[slot].1.push((i, j, a));
            if i != j {
                grouped[slot].1.push((j, i, a));
            }
        }
        rows.push(grouped);
        scale.push(norm);
        kept.push(k);
        b.push(con.rhs / norm);
    }
    let mut members = vec![Vec::new(); blocks.len()];
    for (i, row) in rows.iter().enumerate() {
        for (blk, _) in row {
            members[*blk].push(i);
        }
    }
    let c = problem.objective.to_dense(&blocks);
    Ok(Data {
        blocks,
        rows,
        members,
        b: DVector::from_vec(b),
        c,
        scale,
        kept,
    })
}

fn trivially_infeasible(problem: &SdpProblem, k: usize) -> SdpSolution {
    let m = problem.constraints.len();
    let mut y = DVector::zeros(m);
    y[k] = 1.0 / problem.constraints[k].rhs;
    let zeros: Vec<DMatrix<f64>> = problem.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    SdpSolution {
        status: SdpStatus::Infeasible,
        z: zeros.clone(),
        y,
        s: zeros,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: problem.constraints[k].rhs.abs(),
        dual_residual: 0.0,
        gap: f64::NAN,
        iterations: 0,
    }
}

/// Solve an [`SdpProblem`].
///
/// The result's status is `Optimal` only when the primal residual is at most
/// `feas_tol` (absolute), the dual residual at most `feas_tol·(1 + ‖F‖)` and the
/// relative gap at most `gap_tol`.
pub fn solve(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let total = problem.total_dim();
    if total > opts.max_dim {
        return Err(Error::Solver(format!(
            "total block dimension {total} exceeds the limit {}",
            opts.max_dim
        )));
    }
    let data = match build(problem, opts) {
        Ok(d) => d,
        Err(sol) => return Ok(sol),
    };
    let m = data.m();
    let nu = total as f64 + 1.0;
    let cnorm = max_abs_blocks(&data.c);

    let mut x: Vec<DMatrix<f64>> = data.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect();
    let mut s = x.clone();
    let mut y = DVector::zeros(m);
    let (mut tau, mut kappa) = (1.0_f64, 1.0_f64);

    let mut status = SdpStatus::Indeterminate;
    let mut iterations = 0;
    let mut last = (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    // best iterate by merit, returned when the run ends indeterminate
    let mut best: Option<(f64, Snapshot)> = None;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ax = data.apply_a(&x);
        let aty = data.apply_at(&y);
        let rp = &ax - &data.b * tau;
        let rd: Vec<DMatrix<f64>> = (0..x.len()).map(|k| &data.c[k] * tau - &aty[k] - &s[k]).collect();
        let cx = inner(&data.c, &x);
        let by = data.b.dot(&y);
        let rg = by - cx - kappa;
        let mu = (inner(&x, &s) + tau * kappa) / nu;

        let pres = rp
            .iter()
            .zip(&data.scale)
            .fold(0.0_f64, |a, (r, sc)| a.max((r / tau * sc).abs()));
        let dres = max_abs_blocks(&rd) / tau;
        let (pobj, dobj) = (cx / tau, by / tau);
        last = (pres, dres, pobj, dobj, (pobj - dobj).abs());
        if !(pres.is_finite() && dres.is_finite() && mu.is_finite()) {
            break;
        }
        let merit = (pres / opts.feas_tol)
            .max(dres / (opts.feas_tol * (1.0 + cnorm)))
            .max((pobj - dobj).abs() / (opts.gap_tol * (1.0 + pobj.abs() + dobj.abs())));
        if best.as_ref().is_none_or(|(bm, _)| merit < *bm) {
            best = Some((
                merit,
                Snapshot {
                    x: x.clone(),
                    y: y.clone(),
                    s: s.clone(),
                    tau,
                    last,
                },
            ));
        }

        if pres <= opts.feas_tol
            && dres <= opts.feas_tol * (1.0 + cnorm)
            && (pobj - dobj).abs() <= opts.gap_tol * (1.0 + pobj.abs() + dobj.abs())
        {
            status = SdpStatus::Optimal;
            break;
        }
        if by > 0.0 && tau < kappa {
            let ray: Vec<DMatrix<f64>> = aty.iter().zip(&s).map(|(a, sb)| a + sb).collect();
            if max_abs_blocks(&ray) <= opts.infeas_tol * by {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        if cx < 0.0 && tau < kappa {
            let axo = ax
                .iter()
                .zip(&data.scale)
                .fold(0.0_f64, |a, (r, sc)| a.max((r * sc).abs()));
            if axo <= opts.infeas_tol * (-cx) {
                status = SdpStatus::Unbounded;
                break;
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let Some(sinv) = s.iter().map(inverse_pd).collect::<Option<Vec<_>>>() else {
            break;
        };
        let schur = data.schur(&x, &sinv);
        let Some(chol) = factor_schur(&schur) else {
            break;
        };

        let t: Vec<DMatrix<f64>> = (0..x.len()).map(|k| &x[k] * &data.c[k] * &sinv[k]).collect();
        let u = data.apply_a(&t);
        let v: f64 = (0..x.len()).map(|k| (&data.c[k] * &t[k]).trace()).sum();
        let wmat: Vec<DMatrix<f64>> = (0..x.len()).map(|k| &x[k] * &rd[k] * &sinv[k]).collect();
        let aw = data.apply_a(&wmat);
        let w: f64 = (0..x.len()).map(|k| (&data.c[k] * &wmat[k]).trace()).sum();
        let qv = chol.solve(&(&u + &data.b));
        let bmu = &data.b - &u;
        let denom_base = bmu.dot(&qv) + v;

        let direction = |eta: f64, rc: &[DMatrix<f64>], rk: f64| -> Direction {
            let h1 = -(&rp * eta) - data.apply_a(rc) + &aw * eta;
            let h2 = -eta * rg + inner(&data.c, rc) - eta * w + rk / tau;
            let p = chol.solve(&h1);
            let dtau = (h2 - bmu.dot(&p)) / (denom_base + kappa / tau);
            let dy = &p + &qv * dtau;
            let atdy = data.apply_at(&dy);
            let ds: Vec<DMatrix<f64>> = (0..x.len())
                .map(|k| -&atdy[k] + &data.c[k] * dtau + &rd[k] * eta)
                .collect();
            let dx: Vec<DMatrix<f64>> = (0..x.len())
                .map(|k| &rc[k] - sym(&(&x[k] * &ds[k] * &sinv[k])))
                .collect();
            let dkappa = (rk - kappa * dtau) / tau;
            Direction {
                dx,
                dy,
                ds,
                dtau,
                dkappa,
            }
        };
        let step_to_boundary = |d: &Direction| -> f64 {
            let mut a = max_step(&x, &d.dx).min(max_step(&s, &d.ds));
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        // predictor
        let rc_aff: Vec<DMatrix<f64>> = x.iter().map(|xb| -xb).collect();
        let aff = direction(1.0, &rc_aff, -tau * kappa);
        let alpha_aff = step_to_boundary(&aff).min(1.0);
        let xa: Vec<DMatrix<f64>> = (0..x.len()).map(|k| &x[k] + &aff.dx[k] * alpha_aff).collect();
        let sa: Vec<DMatrix<f64>> = (0..x.len()).map(|k| &s[k] + &aff.ds[k] * alpha_aff).collect();
        let mu_aff = (inner(&xa, &sa) + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa)) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Vec<DMatrix<f64>> = (0..x.len())
            .map(|k| &sinv[k] * (sigma * mu) - &x[k] - sym(&(&aff.dx[k] * &aff.ds[k] * &sinv[k])))
            .collect();
        let rk = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = direction(1.0 - sigma, &rc, rk);
        let alpha = (opts.step_fraction * step_to_boundary(&dir)).min(1.0);
        if !(alpha.is_finite() && alpha > 1e-12) {
            break;
        }

        for k in 0..x.len() {
            x[k] += &dir.dx[k] * alpha;
            s[k] += &dir.ds[k] * alpha;
        }
        y += &dir.dy * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }

    if status == SdpStatus::Indeterminate {
        if let Some((_, b)) = best {
            return Ok(finish(problem, &data, status, b.x, b.y, b.s, b.tau, b.last, iterations));
        }
    }
    Ok(finish(problem, &data, status, x, y, s, tau, last, iterations))
}

struct Snapshot {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    tau: f64,
    last: (f64, f64, f64, f64, f64),
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &SdpProblem,
    data: &Data,
    status: SdpStatus,
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    tau: f64,
    last: (f64, f64, f64, f64, f64),
    iterations: usize,
) -> SdpSolution {
    let m_orig = problem.constraints.len();
    let unscale = |yy: &DVector<f64>, f: f64| -> DVector<f64> {
        let mut out = DVector::zeros(m_orig);
        for (i, &k) in data.kept.iter().enumerate() {
            out[k] = yy[i] / data.scale[i] * f;
        }
        out
    };
    let (pres, dres, pobj, dobj, gap) = last;
    match status {
        SdpStatus::Infeasible => {
            let by = data.b.dot(&y);
            SdpSolution {
                status,
                z: x.iter().map(|b| b / tau).collect(),
                y: unscale(&y, 1.0 / by),
                s: s.iter().map(|b| b / by).collect(),
                primal_objective: pobj,
                dual_objective: dobj,
                primal_residual: pres,
                dual_residual: dres,
                gap,
                iterations,
            }
        }
        SdpStatus::Unbounded => {
            let cx = -inner(&data.c, &x);
            SdpSolution {
                status,
                z: x.iter().map(|b| b / cx).collect(),
                y: unscale(&y, 1.0 / tau),
                s: s.iter().map(|b| b / tau).collect(),
                primal_objective: pobj,
                dual_objective: dobj,
                primal_residual: pres,
                dual_residual: dres,
                gap,
                iterations,
            }
        }
        _ => SdpSolution {
            status,
            z: x.iter().map(|b| b / tau).collect(),
            y: unscale(&y, 1.0 / tau),
            s: s.iter().map(|b| b / tau).collect(),
            primal_objective: pobj,
            dual_objective: dobj,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            iterations,
        },
    }
}
