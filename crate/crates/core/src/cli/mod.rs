//! Command-line front end. Every command prints one JSON report whose
//! `exit_code` is also the process exit code: 0 positive answer, 1 negative
//! answer, 2 indeterminate, 64 usage error.

mod input;
mod report;

use std::io::Write;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

pub use input::load_polys;
pub use report::{report_schema_validate, round_floats, SchemaViolation, REPORT_DIGITS};

use crate::certify::{
    assemble_membership_sdp, certify_nonneg, default_degree, default_trace_cap, random_eval_check, CertifyMode,
    CertifyOptions, MembershipSdpOptions, QuadModuleSpec, Verdict,
};
use crate::domination::{check_domination, Domination};
use crate::error::{Error, Result};
use crate::freealg::{MatPoly, Word};
use crate::linalg::{max_eig, min_eig};
use crate::moment::{
    assemble_refutation_sdp, default_trace_bound, flatness_check, gns_extract, refute, verify_witness, Refutation,
    RefuteOptions, Witness,
};
use crate::pencil::{
    concave_decompose, congruence_sum, is_bounded, unit_certificate, Boundedness, MonicPencil, UnitOutcome,
};
use crate::sdp::{export_sdpa, SdpOptions, SdpProblem};
use crate::serial::{matrix_to_json, MatPolyJson};
use input::{load_functional, load_poly, load_tuple, PolySource};
use report::object;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Exit code for usage and input errors.
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Certify,
    Refute,
    Dominate,
    Normalize,
    Bounded,
    Unitcert,
    Gns,
    Eval,
    ExportSdpa,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Refute => "refute",
            Command::Dominate => "dominate",
            Command::Normalize => "normalize",
            Command::Bounded => "bounded",
            Command::Unitcert => "unitcert",
            Command::Gns => "gns",
            Command::Eval => "eval",
            Command::ExportSdpa => "export-sdpa",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Linear,
    Concave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "ncpsatz",
    version,
    about = "Certify or refute positivity of free matrix polynomials on LMI domains"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Target polynomial: file or inline text.
    #[arg(short = 'p', value_name = "POLY")]
    p: Option<String>,
    /// Monic constraint polynomial (linear or concave quadratic).
    #[arg(short = 'q', value_name = "POLY")]
    q: Option<String>,
    /// Monic linear pencil (JSON or degree-one polynomial).
    #[arg(short = 'L', value_name = "PENCIL")]
    l: Option<String>,
    /// Dominated pencil for `dominate`.
    #[arg(long = "lp", value_name = "PENCIL")]
    lp: Option<String>,
    /// Moment functional JSON for `gns`.
    #[arg(long, value_name = "FILE")]
    moments: Option<String>,
    /// Tuple JSON `{"X": [...]}` for `eval`.
    #[arg(long, value_name = "FILE")]
    tuple: Option<String>,
    /// Number of variables; inferred from the inputs when omitted.
    #[arg(long)]
    nvars: Option<usize>,
    /// Half-degree `d` (certify, refute, export-sdpa) or GNS degree `k`.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Accepted verifier residual for certificates.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long = "feas-tol", default_value_t = 1e-8)]
    feas_tol: f64,
    #[arg(long = "witness-tol", default_value_t = 1e-7)]
    witness_tol: f64,
    #[arg(long = "rank-tol", default_value_t = 1e-9)]
    rank_tol: f64,
    #[arg(long = "max-iter", default_value_t = 200)]
    max_iter: usize,
    /// Samples for `eval` without `--tuple`.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the SDP in SDPA sparse format.
    #[arg(long = "sdpa-out", value_name = "PATH")]
    sdpa_out: Option<String>,
    /// `export-sdpa`: write the refutation SDP instead of the membership SDP.
    #[arg(long)]
    refutation: bool,
}

/// Validated settings of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub target: Option<String>,
    pub constraint: Option<String>,
    pub pencil: Option<String>,
    pub dominated: Option<String>,
    pub moments: Option<String>,
    pub tuple: Option<String>,
    pub nvars: Option<usize>,
    pub degree: Option<usize>,
    pub mode: CertifyMode,
    pub residual_tol: f64,
    pub witness_tol: f64,
    pub rank_tol: f64,
    pub trials: usize,
    pub seed: u64,
    pub format: Format,
    pub sdpa_out: Option<String>,
    pub refutation: bool,
    pub sdp: SdpOptions,
}

impl RunConfig {
    fn from_args(a: Args) -> std::result::Result<Self, String> {
        for (name, v) in [
            ("--tol", a.tol),
            ("--feas-tol", a.feas_tol),
            ("--witness-tol", a.witness_tol),
            ("--rank-tol", a.rank_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        let sdp = SdpOptions {
            feas_tol: a.feas_tol,
            gap_tol: a.feas_tol,
            infeas_tol: a.feas_tol,
            max_iter: a.max_iter,
            ..SdpOptions::default()
        };
        Ok(RunConfig {
            command: a.command,
            target: a.p,
            constraint: a.q,
            pencil: a.l,
            dominated: a.lp,
            moments: a.moments,
            tuple: a.tuple,
            nvars: a.nvars,
            degree: a.degree,
            mode: match a.mode {
                Mode::Auto => CertifyMode::Auto,
                Mode::Linear => CertifyMode::Linear,
                Mode::Concave => CertifyMode::Concave,
            },
            residual_tol: a.tol,
            witness_tol: a.witness_tol,
            rank_tol: a.rank_tol,
            trials: a.trials,
            seed: a.seed,
            format: a.format,
            sdpa_out: a.sdpa_out,
            refutation: a.refutation,
            sdp,
        })
    }

    fn refute_options(&self) -> RefuteOptions {
        RefuteOptions {
            witness_tol: self.witness_tol,
            seed: self.seed,
            sdp: self.sdp,
            ..RefuteOptions::default()
        }
    }

    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            mode: self.mode,
            degree: self.degree,
            residual_tol: self.residual_tol,
            trace_cap: None,
            sdp: self.sdp,
            refute: self.refute_options(),
        }
    }
}

/// Run with process arguments (program name first), printing to stdout/stderr.
pub fn run(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let config = match RunConfig::from_args(args) {
        Ok(c) => c,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    match execute(&config) {
        Ok(Output::Report(mut report)) => {
            round_floats(&mut report);
            let code = report["exit_code"].as_i64().unwrap_or(2) as i32;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            let _ = writeln!(out, "{text}");
            code
        }
        Ok(Output::Text(text)) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(e) if is_numerical(&e) => {
            let mut report = object(vec![
                ("command", json!(config.command.name())),
                ("status", json!("indeterminate")),
                ("exit_code", json!(2)),
                ("reason", json!(e.to_string())),
                ("residuals", json!({})),
            ]);
            round_floats(&mut report);
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::Solver(_) | Error::Singular(_) | Error::Sampling(_) | Error::MarginDestroyed(_)
    )
}

enum Output {
    Report(Value),
    Text(String),
}

fn report(command: Command, status: &str, exit_code: i32, mut fields: Vec<(&str, Value)>, residuals: Value) -> Output {
    let mut entries = vec![
        ("command", json!(command.name())),
        ("status", json!(status)),
        ("exit_code", json!(exit_code)),
    ];
    entries.append(&mut fields);
    entries.push(("residuals", residuals));
    Output::Report(object(entries))
}

fn require<'a>(opt: &'a Option<String>, flag: &str) -> Result<&'a str> {
    opt.as_deref()
        .ok_or_else(|| Error::Malformed(format!("missing required argument {flag}")))
}

/// Resolve inputs to a common variable count.
fn resolve(config: &RunConfig, sources: &[&PolySource]) -> Result<usize> {
    let needed = sources.iter().map(|s| s.min_nvars()).max().unwrap_or(1);
    match config.nvars {
        Some(g) if g < needed => Err(Error::Dimension(format!(
            "inputs use {needed} variables, --nvars is {g}"
        ))),
        Some(g) => Ok(g),
        None => Ok(needed),
    }
}

/// Target and constraint; `-L` wins over `-q`, and then forces linear mode.
fn target_and_constraint(config: &RunConfig) -> Result<(MatPoly, MatPoly, bool)> {
    let p = load_poly(require(&config.target, "-p")?)?;
    let (c, from_pencil) = match (&config.pencil, &config.constraint) {
        (Some(l), _) => (load_poly(l)?, true),
        (None, Some(q)) => (load_poly(q)?, false),
        (None, None) => return Err(Error::Malformed("missing required argument -q or -L".into())),
    };
    let g = resolve(config, &[&p, &c])?;
    let q = if from_pencil {
        c.into_pencil(g)?.to_poly()
    } else {
        c.into_poly(g)?
    };
    Ok((p.into_poly(g)?, q, from_pencil))
}

/// The pencil whose domain equals that of `q`.
fn domain_pencil(q: &MatPoly) -> Result<MonicPencil> {
    if q.degree().unwrap_or(0) <= 1 {
        MonicPencil::from_poly(q)
    } else {
        Ok(concave_decompose(q)?.linearize())
    }
}

fn witness_residuals(w: &Witness) -> Value {
    json!({
        "value": w.value,
        "moment_match": w.residuals.moment_match,
        "top_degree_mismatch": w.residuals.top_degree_mismatch,
        "domain_min_eig": w.residuals.domain_min_eig,
        "target_min_eig": w.residuals.target_min_eig,
        "mixing_weight": w.residuals.mixing_weight,
    })
}

fn write_sdpa(path: &str, problem: &SdpProblem) -> Result<()> {
    std::fs::write(path, export_sdpa(problem)).map_err(|e| Error::Malformed(format!("cannot write {path}: {e}")))
}

fn membership_problem(p: &MatPoly, q: &MatPoly, mode: CertifyMode, degree: Option<usize>) -> Result<SdpProblem> {
    let d = degree.unwrap_or_else(|| default_degree(p));
    let linear = match mode {
        CertifyMode::Auto => q.degree().unwrap_or(0) <= 1,
        CertifyMode::Linear => true,
        CertifyMode::Concave => false,
    };
    let (constraint, alpha) = if linear {
        (MonicPencil::from_poly(q)?.to_poly(), d)
    } else {
        (concave_decompose(q)?.linearize().to_poly(), d + 1)
    };
    let spec = QuadModuleSpec::new(vec![constraint], alpha, d, p.nrows(), p.nvars())?;
    assemble_membership_sdp(
        p,
        &spec,
        &MembershipSdpOptions {
            trace_cap: Some(default_trace_cap(p)),
        },
    )
}

fn execute(config: &RunConfig) -> Result<Output> {
    let cmd = config.command;
    match cmd {
        Command::Certify => {
            let (p, q, from_pencil) = target_and_constraint(config)?;
            let mut opts = config.certify_options();
            if from_pencil && opts.mode == CertifyMode::Auto {
                opts.mode = CertifyMode::Linear;
            }
            if let Some(path) = &config.sdpa_out {
                write_sdpa(path, &membership_problem(&p, &q, opts.mode, opts.degree)?)?;
            }
            Ok(match certify_nonneg(&p, &q, &opts)? {
                Verdict::Certificate {
                    certificate,
                    residual,
                    degree,
                } => report(
                    cmd,
                    "certificate",
                    0,
                    vec![
                        ("degree", json!(degree)),
                        (
                            "certificate",
                            serde_json::to_value(certificate.to_json()).expect("json"),
                        ),
                    ],
                    json!({"certificate": residual, "tolerance": config.residual_tol}),
                ),
                Verdict::Witness {
                    witness,
                    constraint_min_eig,
                    degree,
                } => {
                    let mut res = witness_residuals(&witness);
                    res["constraint_min_eig"] = json!(constraint_min_eig);
                    report(
                        cmd,
                        "witness",
                        1,
                        vec![
                            ("degree", json!(degree)),
                            ("witness", serde_json::to_value(witness.to_json()).expect("json")),
                        ],
                        res,
                    )
                }
                Verdict::Indeterminate(reason) => {
                    report(cmd, "indeterminate", 2, vec![("reason", json!(reason))], json!({}))
                }
            })
        }
        Command::Refute => {
            let (p, q, _) = target_and_constraint(config)?;
            let pencil = domain_pencil(&q)?;
            let d = config.degree.unwrap_or_else(|| default_degree(&p));
            Ok(match refute(&p, &pencil, d, &config.refute_options())? {
                Refutation::Witness { witness, optimum, .. } => {
                    let mut res = witness_residuals(&witness);
                    res["constraint_min_eig"] = json!(min_eig(&q.evaluate(&witness.x)?));
                    res["optimum"] = json!(optimum);
                    report(
                        cmd,
                        "witness",
                        1,
                        vec![
                            ("degree", json!(d)),
                            ("witness", serde_json::to_value(witness.to_json()).expect("json")),
                        ],
                        res,
                    )
                }
                Refutation::NoRefutation { optimum, near_boundary } => report(
                    cmd,
                    "no-refutation",
                    0,
                    vec![("degree", json!(d)), ("near_boundary", json!(near_boundary))],
                    json!({ "optimum": optimum }),
                ),
                Refutation::Indeterminate(reason) => {
                    report(cmd, "indeterminate", 2, vec![("reason", json!(reason))], json!({}))
                }
            })
        }
        Command::Dominate => {
            let l = load_poly(require(&config.pencil, "-L")?)?;
            let lp = load_poly(require(&config.dominated, "--lp")?)?;
            let g = resolve(config, &[&l, &lp])?;
            let (l, lp) = (l.into_pencil(g)?, lp.into_pencil(g)?);
            Ok(
                match check_domination(&l, &lp, &config.sdp, &config.refute_options())? {
                    Domination::Dominates { certificate, residual } => report(
                        cmd,
                        "dominates",
                        0,
                        vec![(
                            "certificate",
                            serde_json::to_value(certificate.to_json()).expect("json"),
                        )],
                        json!({ "identity": residual, "tolerance": crate::domination::DOMINATION_TOL }),
                    ),
                    Domination::Witness(w) => {
                        let mut res = witness_residuals(&w);
                        res["dominated_min_eig"] = json!(lp.min_eig_at(&w.x)?);
                        report(
                            cmd,
                            "witness",
                            1,
                            vec![("witness", serde_json::to_value(w.to_json()).expect("json"))],
                            res,
                        )
                    }
                    Domination::Indeterminate(reason) => {
                        report(cmd, "indeterminate", 2, vec![("reason", json!(reason))], json!({}))
                    }
                },
            )
        }
        Command::Normalize => {
            let q = load_poly(require(&config.constraint, "-q")?)?;
            let g = resolve(config, &[&q])?;
            let q = q.into_poly(g)?;
            Ok(match concave_decompose(&q) {
                Ok(dec) => {
                    let pencil = dec.linearize();
                    let residual = q.max_coeff_diff(&dec.reconstruct());
                    report(
                        cmd,
                        "pencil",
                        0,
                        vec![
                            ("pencil", serde_json::to_value(pencil.to_json()).expect("json")),
                            (
                                "decomposition",
                                json!({
                                    "lambda": MatPolyJson::from(&dec.lambda),
                                    "s": MatPolyJson::from(&dec.s),
                                }),
                            ),
                        ],
                        json!({ "reconstruction": residual }),
                    )
                }
                Err(Error::NotConcave(reason)) => {
                    report(cmd, "not-concave", 1, vec![("reason", json!(reason))], json!({}))
                }
                Err(e) => return Err(e),
            })
        }
        Command::Bounded => {
            let l = load_poly(require(&config.pencil, "-L")?)?;
            let g = resolve(config, &[&l])?;
            let l = l.into_pencil(g)?;
            Ok(match is_bounded(&l, 1e-6)? {
                Boundedness::Bounded => report(cmd, "bounded", 0, vec![], json!({})),
                Boundedness::Unbounded { direction } => {
                    let combo = l
                        .coeffs()
                        .iter()
                        .zip(&direction)
                        .fold(nalgebra::DMatrix::zeros(l.size(), l.size()), |acc, (a, x)| acc + a * *x);
                    report(
                        cmd,
                        "unbounded",
                        1,
                        vec![("direction", json!(direction))],
                        json!({ "recession_max_eig": max_eig(&combo) }),
                    )
                }
                Boundedness::Indeterminate(reason) => {
                    report(cmd, "indeterminate", 2, vec![("reason", json!(reason))], json!({}))
                }
            })
        }
        Command::Unitcert => {
            let l = load_poly(require(&config.pencil, "-L")?)?;
            let g = resolve(config, &[&l])?;
            let l = l.into_pencil(g)?;
            Ok(match unit_certificate(&l)? {
                UnitOutcome::Exists(u) => {
                    let factors = u.factors(1);
                    let sum = congruence_sum(&l, &factors, 1)?;
                    let residual = sum.max_coeff_diff(&MatPoly::identity(1, g));
                    report(
                        cmd,
                        "exists",
                        0,
                        vec![(
                            "certificate",
                            json!({
                                "W": factors.iter().map(matrix_to_json).collect::<Vec<_>>(),
                                "H": matrix_to_json(&u.gram()),
                            }),
                        )],
                        json!({ "identity": residual }),
                    )
                }
                UnitOutcome::Nonexistent {
                    coefficients,
                    combination,
                } => report(
                    cmd,
                    "nonexistent",
                    1,
                    vec![(
                        "evidence",
                        json!({ "coefficients": coefficients, "combination": matrix_to_json(&combination) }),
                    )],
                    json!({ "combination_min_eig": min_eig(&combination) }),
                ),
            })
        }
        Command::Gns => {
            let lambda = load_functional(require(&config.moments, "--moments")?)?;
            let k = config.degree.unwrap_or(lambda.degree().saturating_sub(1) / 2);
            let flat = flatness_check(&lambda, k, config.rank_tol).ok();
            let flat_json = flat.map(|f| json!({"flat": f.flat, "rank_k": f.rank_k, "rank_k1": f.rank_k1}));
            Ok(match gns_extract(&lambda, k) {
                Ok(mut w) => {
                    let m = verify_witness(&lambda, &w, k)?;
                    w.residuals.moment_match = Some(m.low_degree);
                    w.residuals.top_degree_mismatch = Some(m.top_degree);
                    w.value = lambda.entry(&Word::empty(), 0, 0)?;
                    report(
                        cmd,
                        "witness",
                        0,
                        vec![
                            ("degree", json!(k)),
                            ("flatness", flat_json.unwrap_or(Value::Null)),
                            ("witness", serde_json::to_value(w.to_json()).expect("json")),
                        ],
                        json!({"moment_match": m.low_degree, "top_degree_mismatch": m.top_degree}),
                    )
                }
                Err(Error::Singular(reason)) => report(
                    cmd,
                    "singular",
                    2,
                    vec![
                        ("degree", json!(k)),
                        ("flatness", flat_json.unwrap_or(Value::Null)),
                        ("reason", json!(reason)),
                    ],
                    json!({}),
                ),
                Err(e) => return Err(e),
            })
        }
        Command::Eval => {
            let p = load_poly(require(&config.target, "-p")?)?;
            if let Some(t) = &config.tuple {
                let x = load_tuple(t)?;
                let g = resolve(config, &[&p])?.max(x.nvars());
                let px = p.into_poly(g)?.evaluate(&x)?;
                let lo = min_eig(&px);
                let status = if lo >= -config.witness_tol {
                    "nonnegative"
                } else {
                    "negative"
                };
                return Ok(report(
                    cmd,
                    status,
                    i32::from(lo < -config.witness_tol),
                    vec![("value", json!(matrix_to_json(&px)))],
                    json!({ "min_eig": lo }),
                ));
            }
            let (p, q, _) = target_and_constraint(config)?;
            let r = random_eval_check(&p, &q, config.trials, config.seed)?;
            let min = if r.min_eig.is_finite() {
                json!(r.min_eig)
            } else {
                Value::Null
            };
            Ok(match r.witness {
                Some(w) if r.falsified => report(
                    cmd,
                    "falsified",
                    1,
                    vec![
                        ("trials", json!(r.trials)),
                        ("max_level", json!(r.max_level)),
                        ("witness", serde_json::to_value(w.to_json()).expect("json")),
                    ],
                    json!({ "min_eig": min, "domain_min_eig": w.residuals.domain_min_eig }),
                ),
                _ => report(
                    cmd,
                    "not-falsified",
                    0,
                    vec![("trials", json!(r.trials)), ("max_level", json!(r.max_level))],
                    json!({ "min_eig": min }),
                ),
            })
        }
        Command::ExportSdpa => {
            let (p, q, from_pencil) = target_and_constraint(config)?;
            let problem = if config.refutation {
                let pencil = domain_pencil(&q)?;
                let d = config.degree.unwrap_or_else(|| default_degree(&p));
                let tau = default_trace_bound(pencil.nvars(), p.nrows(), d);
                assemble_refutation_sdp(&p, &pencil, d, Some(tau))?.problem
            } else {
                let mode = if from_pencil && config.mode == CertifyMode::Auto {
                    CertifyMode::Linear
                } else {
                    config.mode
                };
                membership_problem(&p, &q, mode, config.degree)?
            };
            match &config.sdpa_out {
                None => Ok(Output::Text(export_sdpa(&problem))),
                Some(path) => {
                    write_sdpa(path, &problem)?;
                    Ok(report(
                        cmd,
                        "written",
                        0,
                        vec![
                            ("path", json!(path)),
                            ("blocks", json!(problem.blocks)),
                            ("constraints", json!(problem.num_constraints())),
                        ],
                        json!({}),
                    ))
                }
            }
        }
    }
}
