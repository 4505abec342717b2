//! Python bindings: polynomial and pencil arguments are text (inline or a
//! file path), results are plain dictionaries.

use ncpsatz::certify::{certify_nonneg, CertifyMode, CertifyOptions, Verdict};
use ncpsatz::domination::{check_domination, Domination};
use ncpsatz::freealg::{enumerate_basis as basis, format_poly};
use ncpsatz::moment::{refute as refute_engine, Refutation, RefuteOptions, Witness};
use ncpsatz::pencil::{is_bounded as bounded, unit_certificate as unit, Boundedness, MonicPencil, UnitOutcome};
use ncpsatz::sdp::SdpOptions;
use ncpsatz::serial::matrix_to_json;
use ncpsatz::{cli, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Solver(_) | Error::Singular(_) | Error::Sampling(_) | Error::MarginDestroyed(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// `json.loads` of a serde value, so callers get dicts and lists.
fn to_object<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn pencil_of(text: &str, others: &[&str]) -> PyResult<(MonicPencil, Vec<ncpsatz::freealg::MatPoly>)> {
    let mut args = vec![text];
    args.extend_from_slice(others);
    let (mut polys, _) = cli::load_polys(&args).map_err(to_py)?;
    let l = MonicPencil::from_poly(&polys.remove(0)).map_err(to_py)?;
    Ok((l, polys))
}

fn witness_json(w: &Witness) -> Value {
    serde_json::to_value(w.to_json()).expect("witness serializes")
}

/// Canonical text of a polynomial (scalar or JSON grid).
#[pyfunction]
fn normalize_poly(text: &str) -> PyResult<String> {
    let (polys, _) = cli::load_polys(&[text]).map_err(to_py)?;
    Ok(format_poly(&polys[0]))
}

/// Words of degree at most `d` in `g` letters, graded lexicographic.
#[pyfunction]
fn enumerate_basis(g: usize, d: usize) -> Vec<String> {
    basis(g, d).iter().map(|w| w.to_string()).collect()
}

/// Certify `p ⪰ 0` on the domain of the monic `q`, or return a witness.
#[pyfunction]
#[pyo3(signature = (p, q, degree=None, mode="auto"))]
fn certify<'py>(py: Python<'py>, p: &str, q: &str, degree: Option<usize>, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "auto" => CertifyMode::Auto,
        "linear" => CertifyMode::Linear,
        "concave" => CertifyMode::Concave,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let (polys, _) = cli::load_polys(&[p, q]).map_err(to_py)?;
    let opts = CertifyOptions {
        mode,
        degree,
        ..CertifyOptions::default()
    };
    let out = match certify_nonneg(&polys[0], &polys[1], &opts).map_err(to_py)? {
        Verdict::Certificate {
            certificate,
            residual,
            degree,
        } => json!({
            "status": "certificate",
            "degree": degree,
            "residual": residual,
            "certificate": serde_json::to_value(certificate.to_json()).expect("certificate serializes"),
        }),
        Verdict::Witness {
            witness,
            constraint_min_eig,
            degree,
        } => json!({
            "status": "witness",
            "degree": degree,
            "constraint_min_eig": constraint_min_eig,
            "witness": witness_json(&witness),
        }),
        Verdict::Indeterminate(reason) => json!({"status": "indeterminate", "reason": reason}),
    };
    to_object(py, &out)
}

/// Search for a witness `X` in the domain of `pencil` with `⟨p(X)γ,γ⟩ < 0`.
#[pyfunction]
#[pyo3(signature = (p, pencil, degree=None, seed=0x5EED))]
fn refute<'py>(
    py: Python<'py>,
    p: &str,
    pencil: &str,
    degree: Option<usize>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (l, polys) = pencil_of(pencil, &[p])?;
    let target = &polys[0];
    let d = degree.unwrap_or_else(|| ncpsatz::certify::default_degree(target));
    let opts = RefuteOptions {
        seed,
        ..RefuteOptions::default()
    };
    let out = match refute_engine(target, &l, d, &opts).map_err(to_py)? {
        Refutation::Witness { witness, optimum, .. } => {
            json!({"status": "witness", "optimum": optimum, "witness": witness_json(&witness)})
        }
        Refutation::NoRefutation { optimum, near_boundary } => {
            json!({"status": "no-refutation", "optimum": optimum, "near_boundary": near_boundary})
        }
        Refutation::Indeterminate(reason) => json!({"status": "indeterminate", "reason": reason}),
    };
    to_object(py, &out)
}

/// Factors `W_j` with `Σ W_j* L W_j = I`, or a definite combination of the coefficients.
#[pyfunction]
fn unit_certificate<'py>(py: Python<'py>, pencil: &str) -> PyResult<Bound<'py, PyAny>> {
    let (l, _) = pencil_of(pencil, &[])?;
    let out = match unit(&l).map_err(to_py)? {
        UnitOutcome::Exists(cert) => json!({
            "status": "exists",
            "W": cert.factors(1).iter().map(matrix_to_json).collect::<Vec<_>>(),
        }),
        UnitOutcome::Nonexistent {
            coefficients,
            combination,
        } => json!({
            "status": "nonexistent",
            "coefficients": coefficients,
            "combination": matrix_to_json(&combination),
        }),
    };
    to_object(py, &out)
}

/// Whether `𝔇_l ⊆ 𝔇_lp`, with a certificate or a witness.
#[pyfunction]
fn dominate<'py>(py: Python<'py>, l: &str, lp: &str) -> PyResult<Bound<'py, PyAny>> {
    let (outer, rest) = pencil_of(l, &[lp])?;
    let inner = MonicPencil::from_poly(&rest[0]).map_err(to_py)?;
    let out =
        match check_domination(&outer, &inner, &SdpOptions::default(), &RefuteOptions::default()).map_err(to_py)? {
            Domination::Dominates { certificate, residual } => json!({
                "status": "dominates",
                "residual": residual,
                "certificate": serde_json::to_value(certificate.to_json()).expect("certificate serializes"),
            }),
            Domination::Witness(w) => json!({"status": "witness", "witness": witness_json(&w)}),
            Domination::Indeterminate(reason) => json!({"status": "indeterminate", "reason": reason}),
        };
    to_object(py, &out)
}

/// Whether the domain of `pencil` is bounded.
#[pyfunction]
#[pyo3(signature = (pencil, tol=1e-8))]
fn is_bounded(pencil: &str, tol: f64) -> PyResult<bool> {
    let (l, _) = pencil_of(pencil, &[])?;
    match bounded(&l, tol).map_err(to_py)? {
        Boundedness::Bounded => Ok(true),
        Boundedness::Unbounded { .. } => Ok(false),
        Boundedness::Indeterminate(reason) => Err(PyRuntimeError::new_err(reason)),
    }
}

/// Run the command-line front end; returns the exit code and standard output.
#[pyfunction]
fn run(args: Vec<String>) -> (i32, String) {
    let argv: Vec<String> = std::iter::once("ncpsatz".to_string()).chain(args).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run_with(&argv, &mut out, &mut err);
    let mut text = String::from_utf8_lossy(&out).into_owned();
    text.push_str(&String::from_utf8_lossy(&err));
    (code, text)
}

#[pymodule]
fn ncpsatz_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(normalize_poly, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_basis, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(refute, m)?)?;
    m.add_function(wrap_pyfunction!(unit_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(dominate, m)?)?;
    m.add_function(wrap_pyfunction!(is_bounded, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
