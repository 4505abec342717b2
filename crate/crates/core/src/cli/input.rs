//! Loading polynomials, pencils and tuples from files or inline text.

use std::path::Path;

use crate::error::{Error, Result};
use crate::freealg::{parse_matrix_poly, MatPoly, MatTuple};
use crate::moment::{MomentFunctional, MomentFunctionalJson};
use crate::pencil::{pencil_from_matrices, MonicPencil, PencilJson};
use crate::serial::{MatPolyJson, MatrixJson, TupleJson};

/// Parsing bound on variable indices before the count is known.
const MAX_LETTERS: usize = u16::MAX as usize;

/// Contents of a `-p/-q/-L` argument: a path when it names a file, else inline text.
pub(crate) fn read_source(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Error::Malformed(format!("cannot read {arg}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// A polynomial argument before the variable count is fixed.
#[derive(Clone, Debug)]
pub(crate) enum PolySource {
    Parsed(MatPoly),
    Pencil(MonicPencil),
}

impl PolySource {
    /// Largest variable count this input requires.
    pub(crate) fn min_nvars(&self) -> usize {
        match self {
            PolySource::Parsed(p) => p
                .terms()
                .keys()
                .filter_map(|w| w.max_letter())
                .max()
                .map_or(1, |m| m + 1),
            PolySource::Pencil(l) => l.nvars(),
        }
    }

    pub(crate) fn into_poly(self, nvars: usize) -> Result<MatPoly> {
        match self {
            PolySource::Parsed(p) => p.with_nvars(nvars),
            PolySource::Pencil(l) if l.nvars() == nvars => Ok(l.to_poly()),
            PolySource::Pencil(l) => Err(Error::Dimension(format!(
                "pencil has {} variables, the problem has {nvars}",
                l.nvars()
            ))),
        }
    }

    pub(crate) fn into_pencil(self, nvars: usize) -> Result<MonicPencil> {
        match self {
            PolySource::Pencil(l) if l.nvars() == nvars => Ok(l),
            other => MonicPencil::from_poly(&other.into_poly(nvars)?),
        }
    }
}

/// Text polynomial, JSON grid of polynomial strings, matpoly JSON, pencil JSON
/// (`{"size","nvars","A"}`) or a bare list of pencil matrices.
pub(crate) fn load_poly(arg: &str) -> Result<PolySource> {
    let text = read_source(arg)?;
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(json_error)?;
        if value.get("A").is_some() {
            let pj: PencilJson = serde_json::from_value(value).map_err(json_error)?;
            return Ok(PolySource::Pencil(pj.to_pencil()?));
        }
        let mj: MatPolyJson = serde_json::from_value(value).map_err(json_error)?;
        let nvars = mj.nvars.unwrap_or(MAX_LETTERS);
        return Ok(PolySource::Parsed(mj.to_poly(nvars)?));
    }
    if trimmed.starts_with("[[[") || trimmed.starts_with("[[-") || starts_numeric_grid(trimmed) {
        let mats: Vec<MatrixJson> = serde_json::from_str(trimmed).map_err(json_error)?;
        return Ok(PolySource::Pencil(pencil_from_matrices(&mats)?));
    }
    Ok(PolySource::Parsed(parse_matrix_poly(trimmed, MAX_LETTERS)?))
}

/// `[[1, 0], …]`-style numeric nesting (a list of matrices), as opposed to a grid of strings.
fn starts_numeric_grid(t: &str) -> bool {
    let rest = t.trim_start_matches(['[', ' ', '\n', '\r', '\t']);
    t.starts_with("[[") && rest.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.')
}

/// Load several polynomial arguments over their common variable count.
pub fn load_polys(args: &[&str]) -> Result<(Vec<MatPoly>, usize)> {
    let sources = args.iter().map(|a| load_poly(a)).collect::<Result<Vec<_>>>()?;
    let g = sources.iter().map(PolySource::min_nvars).max().unwrap_or(1);
    let polys = sources
        .into_iter()
        .map(|s| s.into_poly(g))
        .collect::<Result<Vec<_>>>()?;
    Ok((polys, g))
}

pub(crate) fn load_tuple(arg: &str) -> Result<MatTuple> {
    let text = read_source(arg)?;
    let tj: TupleJson = serde_json::from_str(text.trim()).map_err(json_error)?;
    tj.to_tuple()
}

pub(crate) fn load_functional(arg: &str) -> Result<MomentFunctional> {
    let text = read_source(arg)?;
    let fj: MomentFunctionalJson = serde_json::from_str(text.trim()).map_err(json_error)?;
    fj.to_functional()
}
