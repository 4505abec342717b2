//! Refutation pipeline: a separating moment functional from an SDP, made
//! strictly positive by mixing, then turned into a witness by GNS.
//!
//! The SDP variable is `blockdiag(Hankel(d+1), Localizing(d))`, plus a slack
//! block when capped. Entries of the Hankel block that share `(v*u, s, t)` up
//! to involution are tied together, the localizing block is tied to the
//! Hankel entries, and `λ(I ⊗ ∅) = 1`, optionally `tr Hankel + slack = τ`.
//! The objective is `λ(p)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::gns::{gns_extract, verify_witness, Witness};
use super::{moment_matrix, reference_functional, MomentFunctional};
use crate::error::{Error, Result};
use crate::freealg::{basis_len, enumerate_basis, MatPoly, Word};
use crate::linalg::min_eig;
use crate::pencil::MonicPencil;
use crate::sdp::{self, SdpOptions, SdpProblem, SdpStatus, SparseSym};

type Key = (Word, usize, usize);

fn canonical(m: Word, a: usize, b: usize) -> Key {
    let key = (m, a, b);
    let mirror = (key.0.star(), b, a);
    if key <= mirror {
        key
    } else {
        mirror
    }
}

/// Refutation SDP together with the map from moments to Hankel entries.
#[derive(Clone, Debug)]
pub struct RefutationSdp {
    pub problem: SdpProblem,
    /// Hankel entry `(i, j)` holding `λ(E_ab ⊗ m)` for each canonical `(m, a, b)`.
    representatives: BTreeMap<Key, (usize, usize)>,
    nvars: usize,
    nu: usize,
    degree: usize,
}

impl RefutationSdp {
    /// Read the functional off the Hankel block of a solution.
    pub fn functional(&self, hankel: &DMatrix<f64>) -> Result<MomentFunctional> {
        let mut values: BTreeMap<Word, DMatrix<f64>> = BTreeMap::new();
        for w in enumerate_basis(self.nvars, self.degree) {
            let mut m = DMatrix::zeros(self.nu, self.nu);
            for a in 0..self.nu {
                for b in 0..self.nu {
                    let &(i, j) = self
                        .representatives
                        .get(&canonical(w.clone(), a, b))
                        .ok_or_else(|| Error::MissingMoment(format!("{w} not represented")))?;
                    m[(a, b)] = 0.5 * (hankel[(i, j)] + hankel[(j, i)]);
                }
            }
            values.insert(w, m);
        }
        MomentFunctional::from_values(self.nvars, self.nu, self.degree, values)
    }
}

/// Default trace bound `1e3 · ν · σ(d+1)`.
pub fn default_trace_bound(nvars: usize, nu: usize, d: usize) -> f64 {
    1e3 * (nu * basis_len(nvars, d + 1)) as f64
}

/// Minimize `λ(p)` over normalized functionals nonnegative on `M_{d+1,d}(L)`,
/// with Hankel trace at most `trace_bound` when given.
pub fn assemble_refutation_sdp(
    p: &MatPoly,
    pencil: &MonicPencil,
    d: usize,
    trace_bound: Option<f64>,
) -> Result<RefutationSdp> {
    let (nu, g) = (p.nrows(), pencil.nvars());
    if p.ncols() != nu || p.nvars() != g {
        return Err(Error::Dimension("target does not conform to the pencil".into()));
    }
    if let Some(deg) = p.degree() {
        if deg > 2 * d + 2 {
            return Err(Error::DegreeOverflow(format!("deg p = {deg} exceeds {}", 2 * d + 2)));
        }
    }
    let hankel_basis = enumerate_basis(g, d + 1);
    let loc_basis = enumerate_basis(g, d);
    let l = pencil.size();
    let nh = hankel_basis.len() * nu;
    let nl = loc_basis.len() * l * nu;
    let blocks = match trace_bound {
        Some(_) => vec![nh, nl, 1],
        None => vec![nh, nl],
    };
    let mut problem = SdpProblem::new(blocks);

    let mut representatives: BTreeMap<Key, (usize, usize)> = BTreeMap::new();
    for (i, v) in hankel_basis.iter().enumerate() {
        for (j, u) in hankel_basis.iter().enumerate() {
            for s in 0..nu {
                for t in 0..nu {
                    let (r, c) = (i * nu + s, j * nu + t);
                    if r > c {
                        continue;
                    }
                    let key = canonical(Word::star_concat(v, u), s, t);
                    match representatives.get(&key) {
                        None => {
                            representatives.insert(key, (r, c));
                        }
                        Some(&(r0, c0)) => {
                            let mut a = SparseSym::new();
                            a.add_linear(0, r, c, 1.0);
                            a.add_linear(0, r0, c0, -1.0);
                            problem.add_constraint(a, 0.0);
                        }
                    }
                }
            }
        }
    }

    let lpoly = pencil.to_poly();
    let idx = |i: usize, c: usize, a: usize| (i * l + c) * nu + a;
    for (i, v) in loc_basis.iter().enumerate() {
        for (j, u) in loc_basis.iter().enumerate() {
            for c in 0..l {
                for dd in 0..l {
                    for a in 0..nu {
                        for b in 0..nu {
                            let (r, col) = (idx(i, c, a), idx(j, dd, b));
                            if r > col {
                                continue;
                            }
                            let mut row = SparseSym::new();
                            row.add_linear(1, r, col, 1.0);
                            for (w, qw) in lpoly.terms() {
                                let coef = qw[(c, dd)];
                                if coef == 0.0 {
                                    continue;
                                }
                                let key = canonical(Word::sandwich(v, w, u), a, b);
                                let &(r0, c0) = representatives
                                    .get(&key)
                                    .expect("localizing words fit in the Hankel block");
                                row.add_linear(0, r0, c0, -coef);
                            }
                            problem.add_constraint(row, 0.0);
                        }
                    }
                }
            }
        }
    }

    let mut norm = SparseSym::new();
    for s in 0..nu {
        norm.add(0, s, s, 1.0);
    }
    problem.add_constraint(norm, 1.0);
    if let Some(bound) = trace_bound {
        let mut cap = SparseSym::new();
        cap.add_identity(0, nh, 1.0);
        cap.add(2, 0, 0, 1.0);
        problem.add_constraint(cap, bound);
    }

    let mut objective = SparseSym::new();
    for (w, bw) in p.terms() {
        for s in 0..nu {
            for t in 0..nu {
                if bw[(s, t)] == 0.0 {
                    continue;
                }
                let &(r, c) = representatives
                    .get(&canonical(w.clone(), s, t))
                    .expect("target words fit in the Hankel block");
                objective.add_linear(0, r, c, bw[(s, t)]);
            }
        }
    }
    objective.normalize();
    problem.objective = objective;
    Ok(RefutationSdp {
        problem,
        representatives,
        nvars: g,
        nu,
        degree: 2 * d + 2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefuteOptions {
    /// A refutation needs `λ(p) < −witness_tol` and `⟨p(X)γ,γ⟩ < −witness_tol`.
    pub witness_tol: f64,
    /// Accepted negativity of `L(X)`.
    pub domain_tol: f64,
    /// Accepted GNS moment mismatch on degrees up to `2d+1`.
    pub moment_tol: f64,
    /// Trace bound; `None` uses [`default_trace_bound`].
    pub trace_bound: Option<f64>,
    pub seed: u64,
    pub sdp: SdpOptions,
}

impl Default for RefuteOptions {
    fn default() -> Self {
        RefuteOptions {
            witness_tol: 1e-7,
            domain_tol: 1e-8,
            moment_tol: 1e-6,
            trace_bound: None,
            seed: 0x5EED,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Refutation {
    Witness {
        witness: Witness,
        /// Optimal `λ(p)` of the refutation SDP.
        optimum: f64,
        /// The mixed functional reproduced by the witness.
        functional: MomentFunctional,
    },
    /// `λ(p) ≥ −witness_tol`; `near_boundary` flags an optimum in `(−tol, 0)`.
    NoRefutation {
        optimum: f64,
        near_boundary: bool,
    },
    Indeterminate(String),
}

/// Look for a tuple in the domain of `pencil` with `⟨p(X)γ,γ⟩ < 0`.
pub fn refute(p: &MatPoly, pencil: &MonicPencil, d: usize, opts: &RefuteOptions) -> Result<Refutation> {
    let nu = p.nrows();
    // uncapped first: the cap slack is far larger than the Hankel entries and
    // costs accuracy, so it is only used when the plain program is unbounded
    // or stalls
    let plain = assemble_refutation_sdp(p, pencil, d, None)?;
    let plain_sol = sdp::solve(&plain.problem, &opts.sdp)?;
    let (sdp_data, solution) = if plain_sol.status == SdpStatus::Optimal {
        (plain, plain_sol)
    } else {
        let mut tau = opts
            .trace_bound
            .unwrap_or_else(|| default_trace_bound(pencil.nvars(), nu, d));
        let mut attempt = 0;
        loop {
            let data = assemble_refutation_sdp(p, pencil, d, Some(tau))?;
            let sol = sdp::solve(&data.problem, &opts.sdp)?;
            if sol.status != SdpStatus::Optimal {
                return Ok(Refutation::Indeterminate(format!(
                    "refutation SDP ended with {:?} after {} iterations",
                    sol.status, sol.iterations
                )));
            }
            let cap_active = sol.z[2][(0, 0)] < 1e-6 * tau;
            if sol.primal_objective >= -opts.witness_tol && cap_active && attempt < 2 {
                tau *= 10.0;
                attempt += 1;
                continue;
            }
            break (data, sol);
        }
    };
    let optimum = solution.primal_objective;
    if optimum >= -opts.witness_tol {
        return Ok(Refutation::NoRefutation {
            optimum,
            near_boundary: optimum < 0.0,
        });
    }

    let lambda = sdp_data.functional(&solution.z[0])?;
    let base = lambda.apply(p)?;
    let nsamples = (2 * nu * basis_len(pencil.nvars(), d)).max(16);
    let reference = reference_functional(pencil, nu, d, nsamples, opts.seed)?;
    let lpoly = pencil.to_poly();

    let mut mu = 1e-8;
    let mut last = String::from("no mixing weight tried");
    while mu <= 1e2 {
        let mixed = lambda.mixed(&reference, mu)?;
        let value = mixed.apply(p)?;
        // negated so NaN fails too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(value < 0.5 * base) {
            return Ok(Refutation::Indeterminate(format!(
                "{}; last attempt: {last}",
                Error::MarginDestroyed(format!("λ(p) = {base:.3e}, mixed value {value:.3e} at μ = {mu:.0e}"))
            )));
        }
        if min_eig(&moment_matrix(&mixed, d)?) < 1e-9 {
            mu *= 10.0;
            continue;
        }
        let mut witness = match gns_extract(&mixed, d) {
            Ok(w) => w,
            Err(e) => {
                last = format!("μ = {mu:.0e}: {e}");
                mu *= 10.0;
                continue;
            }
        };
        let matched = verify_witness(&mixed, &witness, d)?;
        let domain = min_eig(&lpoly.evaluate(&witness.x)?);
        let px = p.evaluate(&witness.x)?;
        let value = witness.gamma.dot(&(&px * &witness.gamma));
        witness.value = value;
        witness.residuals.moment_match = Some(matched.low_degree);
        witness.residuals.top_degree_mismatch = Some(matched.top_degree);
        witness.residuals.domain_min_eig = Some(domain);
        witness.residuals.target_min_eig = Some(min_eig(&px));
        witness.residuals.mixing_weight = Some(mu);
        if domain >= -opts.domain_tol && value < -opts.witness_tol && matched.low_degree <= opts.moment_tol {
            return Ok(Refutation::Witness {
                witness,
                optimum,
                functional: mixed,
            });
        }
        last = format!(
            "μ = {mu:.0e}: min eig L(X) = {domain:.3e}, value = {value:.3e}, moment mismatch = {:.3e}",
            matched.low_degree
        );
        mu *= 10.0;
    }
    Ok(Refutation::Indeterminate(format!(
        "separating functional found (λ(p) = {optimum:.3e}) but no verified witness; {last}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freealg::parse_poly;

    fn ball() -> MonicPencil {
        MonicPencil::new(2, vec![DMatrix::from_row_slice(2, 2, &[0., -1., -1., 0.])]).unwrap()
    }

    #[test]
    fn linear_target_on_ball() {
        let p = parse_poly("x1", 1).unwrap();
        let data = assemble_refutation_sdp(&p, &ball(), 0, Some(10.0)).unwrap();
        let sol = sdp::solve(&data.problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-6, "{}", sol.primal_objective);
    }

    #[test]
    fn constant_target_has_unit_optimum() {
        let p = MatPoly::scalar(1.0, 1);
        let data = assemble_refutation_sdp(&p, &ball(), 0, Some(10.0)).unwrap();
        let sol = sdp::solve(&data.problem, &SdpOptions::default()).unwrap();
        assert!((sol.primal_objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn two_minus_square_is_not_refuted() {
        let p = parse_poly("2 - x1*x1", 1).unwrap();
        let data = assemble_refutation_sdp(&p, &ball(), 1, Some(default_trace_bound(1, 1, 1))).unwrap();
        let sol = sdp::solve(&data.problem, &SdpOptions::default()).unwrap();
        assert!(sol.primal_objective >= 1.0 - 1e-6);
        match refute(&p, &ball(), 1, &RefuteOptions::default()).unwrap() {
            Refutation::NoRefutation { .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refutes_linear_target() {
        let p = parse_poly("x1", 1).unwrap();
        match refute(&p, &ball(), 0, &RefuteOptions::default()).unwrap() {
            Refutation::Witness { witness, .. } => {
                assert!(witness.value <= -0.9);
                assert!(witness.residuals.domain_min_eig.unwrap() >= -1e-8);
                assert_eq!(witness.level(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pencil_itself_is_not_refuted() {
        let p = ball().to_poly();
        assert!(matches!(
            refute(&p, &ball(), 0, &RefuteOptions::default()).unwrap(),
            Refutation::NoRefutation { .. }
        ));
    }
}
