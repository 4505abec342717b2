//! Text form of polynomials.
//!
//! ```text
//! poly   := ['+'|'-'] term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := atom "'"*            (postfix apostrophe = involution)
//! atom   := number | 'x' digits | '(' poly ')'
//! ```
//!
//! A leading coefficient is just a numeric factor, so `2*x1*x2`, `2` and
//! `-x1` are all terms. Matrix polynomials are a JSON 2-D array of such
//! strings.

use nalgebra::DMatrix;

use super::poly::MatPoly;
use super::word::Word;
use crate::error::{Error, Result};

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, at: usize, message: impl Into<String>) -> Error {
        let before = &self.src[..at.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn poly(&mut self) -> Result<MatPoly> {
        let mut acc = MatPoly::zero(1, 1, self.nvars);
        let mut sign = 1.0;
        match self.peek() {
            Some(b'+') => self.pos += 1,
            Some(b'-') => {
                self.pos += 1;
                sign = -1.0;
            }
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = &acc + &t.scale(sign);
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<MatPoly> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let f = self.factor()?;
            acc = &acc * &f;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<MatPoly> {
        let mut f = self.atom()?;
        while self.peek() == Some(b'\'') {
            self.pos += 1;
            f = f.adjoint();
        }
        Ok(f)
    }

    fn atom(&mut self) -> Result<MatPoly> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.bytes.get(self.pos).copied() {
            Some(b'(') => {
                self.pos += 1;
                let p = self.poly()?;
                if self.peek() != Some(b')') {
                    return Err(self.err(self.pos, "expected `)`"));
                }
                self.pos += 1;
                Ok(p)
            }
            Some(b'x') => {
                self.pos += 1;
                let ds = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if ds == self.pos {
                    return Err(self.err(ds, "expected variable index after `x`"));
                }
                let idx: usize = self.src[ds..self.pos]
                    .parse()
                    .map_err(|_| self.err(ds, "variable index too large"))?;
                if idx == 0 || idx > self.nvars {
                    return Err(self.err(start, format!("variable x{idx} outside x1..x{}", self.nvars)));
                }
                Ok(MatPoly::var(idx - 1, self.nvars))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(MatPoly::scalar(v, self.nvars))
            }
            Some(c) => Err(self.err(start, format!("unexpected `{}`", c as char))),
            None => Err(self.err(start, "unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let b = self.bytes;
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < b.len() && b[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > s
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < b.len() && b[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.err(start, "malformed number"));
        }
        if p < b.len() && (b[p] == b'e' || b[p] == b'E') {
            let mut q = p + 1;
            if q < b.len() && (b[q] == b'+' || b[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                return Err(self.err(p, "malformed exponent"));
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse()
            .map_err(|_| self.err(start, "malformed number"))
    }
}

/// Parse a scalar polynomial in `nvars` letters.
pub fn parse_poly(text: &str, nvars: usize) -> Result<MatPoly> {
    let mut p = Parser {
        src: text,
        bytes: text.as_bytes(),
        pos: 0,
        nvars,
    };
    let out = p.poly()?;
    if p.peek().is_some() {
        return Err(p.err(p.pos, "trailing input"));
    }
    Ok(out)
}

/// Parse either a scalar polynomial or a JSON 2-D array of polynomial strings.
pub fn parse_matrix_poly(text: &str, nvars: usize) -> Result<MatPoly> {
    if !text.trim_start().starts_with('[') {
        return parse_poly(text, nvars);
    }
    let grid: Vec<Vec<String>> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let blocks = grid
        .iter()
        .map(|row| row.iter().map(|s| parse_poly(s, nvars)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    MatPoly::from_blocks(&blocks)
}

fn fmt_coeff(c: f64) -> String {
    if c == c.trunc() && c.abs() < 1e15 {
        format!("{c}")
    } else {
        format!("{c:?}")
    }
}

/// Format a scalar (1×1) polynomial; `parse_poly` reads it back exactly.
pub fn format_scalar(p: &MatPoly) -> String {
    assert_eq!(p.shape(), (1, 1), "format_scalar needs a 1x1 polynomial");
    let mut out = String::new();
    for (k, (w, c)) in p.terms().iter().enumerate() {
        let v = c[(0, 0)];
        let (neg, mag) = (v < 0.0 || (v == 0.0 && v.is_sign_negative()), v.abs());
        match (k, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        if w.is_empty() {
            out.push_str(&fmt_coeff(mag));
        } else if mag == 1.0 {
            out.push_str(&w.to_string());
        } else {
            out.push_str(&fmt_coeff(mag));
            out.push('*');
            out.push_str(&w.to_string());
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Format any polynomial: scalars as plain text, matrices as a JSON grid.
pub fn format_poly(p: &MatPoly) -> String {
    if p.shape() == (1, 1) {
        return format_scalar(p);
    }
    let grid: Vec<Vec<String>> = (0..p.nrows())
        .map(|i| (0..p.ncols()).map(|j| format_scalar(&p.entry(i, j))).collect())
        .collect();
    serde_json::to_string(&grid).expect("string grid serializes")
}

/// Convenience for tests and examples: a scalar polynomial from `(coeff, one-based letters)`.
pub fn scalar_from(nvars: usize, terms: &[(f64, &[usize])]) -> Result<MatPoly> {
    MatPoly::from_terms(
        1,
        1,
        nvars,
        terms
            .iter()
            .map(|(c, l)| Ok((Word::from_one_based(l, nvars)?, DMatrix::from_element(1, 1, *c))))
            .collect::<Result<Vec<_>>>()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_constant_minus_product() {
        let p = parse_poly("2 - x1*x2", 2).unwrap();
        let expect = scalar_from(2, &[(2.0, &[]), (-1.0, &[1, 2])]).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn apostrophe_is_involution() {
        let p = parse_poly("(x1*x2)'", 2).unwrap();
        assert_eq!(p, scalar_from(2, &[(1.0, &[2, 1])]).unwrap());
    }

    #[test]
    fn errors_carry_position() {
        match parse_poly("1 +\n  x3", 2) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_poly("1 + * x1", 1), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("(x1", 1), Err(Error::Parse { .. })));
    }

    #[test]
    fn scientific_and_fractional_literals() {
        let p = parse_poly("1.5e-3*x1 + .25", 1).unwrap();
        assert_eq!(p, scalar_from(1, &[(0.25, &[]), (1.5e-3, &[1])]).unwrap());
    }

    #[test]
    fn matrix_grid() {
        let p = parse_matrix_poly(r#"[["1","x1"],["x1","1"]]"#, 1).unwrap();
        assert_eq!(p.shape(), (2, 2));
        assert!(p.is_symmetric(0.0));
        let back = parse_matrix_poly(&format_poly(&p), 1).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn format_examples() {
        let p = parse_poly("-x1 + 2 - 0.5*x2*x1", 2).unwrap();
        assert_eq!(format_scalar(&p), "2 - x1 - 0.5*x2*x1");
        assert_eq!(format_scalar(&MatPoly::zero(1, 1, 2)), "0");
    }
}
