use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// An element of the free monoid on `g` letters.
///
/// Letters are stored zero-based (`0` is `x1`); text and JSON use the one-based
/// `x1, x2, …` spelling. The empty word is the identity.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u16>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// The single-letter word `x_{j+1}` (zero-based `j`).
    pub fn letter(j: usize) -> Self {
        Word(vec![j as u16])
    }

    /// Build from zero-based letters.
    pub fn from_letters<I: IntoIterator<Item = usize>>(letters: I) -> Self {
        Word(letters.into_iter().map(|j| j as u16).collect())
    }

    /// Build from one-based indices, checking each lies in `[1, g]`.
    pub fn from_one_based(indices: &[usize], g: usize) -> Result<Self> {
        let mut letters = Vec::with_capacity(indices.len());
        for &i in indices {
            if i == 0 || i > g {
                return Err(Error::Malformed(format!("letter index {i} outside [1, {g}]")));
            }
            letters.push((i - 1) as u16);
        }
        Ok(Word(letters))
    }

    /// Zero-based letters.
    pub fn letters(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&l| l as usize)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `wv`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// `w*`: the letters in reverse order.
    pub fn star(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.0.iter().eq(self.0.iter().rev())
    }

    /// Largest zero-based letter, if any.
    pub fn max_letter(&self) -> Option<usize> {
        self.0.iter().max().map(|&l| l as usize)
    }

    pub fn check_vars(&self, g: usize) -> Result<()> {
        match self.max_letter() {
            Some(m) if m >= g => Err(Error::Malformed(format!(
                "word {self} uses x{} but only {g} variables are declared",
                m + 1
            ))),
            _ => Ok(()),
        }
    }

    /// `v* u` for the Hankel index pair `(v, u)`.
    pub fn star_concat(v: &Word, u: &Word) -> Word {
        let mut out = Vec::with_capacity(v.0.len() + u.0.len());
        out.extend(v.0.iter().rev());
        out.extend_from_slice(&u.0);
        Word(out)
    }

    /// `v* w u`.
    pub fn sandwich(v: &Word, w: &Word, u: &Word) -> Word {
        let mut out = Vec::with_capacity(v.0.len() + w.0.len() + u.0.len());
        out.extend(v.0.iter().rev());
        out.extend_from_slice(&w.0);
        out.extend_from_slice(&u.0);
        Word(out)
    }

    /// Parse `"1"` (or `""`) as the empty word, otherwise `x3*x1*…`.
    pub fn parse(text: &str) -> Result<Word> {
        let t = text.trim();
        if t.is_empty() || t == "1" {
            return Ok(Word::empty());
        }
        let mut letters = Vec::new();
        for part in t.split('*') {
            let p = part.trim();
            let idx = p
                .strip_prefix('x')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::Malformed(format!("bad word `{text}`")))?;
            letters.push((idx - 1) as u16);
        }
        Ok(Word(letters))
    }
}

/// Graded lexicographic: shorter words first, then letter by letter.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            write!(f, "x{}", l + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// `σ_#(d) = Σ_{j=0}^{d} g^j`, the number of words of degree at most `d`.
pub fn basis_len(g: usize, d: usize) -> usize {
    let mut total = 0usize;
    let mut pow = 1usize;
    for _ in 0..=d {
        total += pow;
        pow *= g;
    }
    total
}

/// All words of degree at most `d` in graded lexicographic order.
pub fn enumerate_basis(g: usize, d: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(layer.len() * g);
        for w in &layer {
            for j in 0..g {
                let mut v = w.0.clone();
                v.push(j as u16);
                next.push(Word(v));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn involution_reverses() {
        let w = Word::from_one_based(&[1, 2, 3], 3).unwrap();
        assert_eq!(w.star(), Word::from_one_based(&[3, 2, 1], 3).unwrap());
        assert_eq!(w.star().star(), w);
    }

    #[test]
    fn concat_identity_and_degree() {
        let w = Word::from_one_based(&[1, 1, 2], 2).unwrap();
        assert_eq!(Word::empty().concat(&w), w);
        assert_eq!(w.degree(), 3);
        let v = Word::letter(1);
        assert_eq!(w.concat(&v).star(), v.star().concat(&w.star()));
    }

    #[test]
    fn out_of_range_letter() {
        assert!(matches!(Word::from_one_based(&[3], 2), Err(Error::Malformed(_))));
        assert!(Word::from_one_based(&[0], 2).is_err());
    }

    #[test]
    fn basis_examples() {
        let b = enumerate_basis(2, 2);
        let names: Vec<String> = b.iter().map(|w| w.to_string()).collect();
        assert_eq!(names, ["1", "x1", "x2", "x1*x1", "x1*x2", "x2*x1", "x2*x2"]);
        assert_eq!(enumerate_basis(1, 3).len(), 4);
        assert_eq!(enumerate_basis(3, 2).len(), 13);
    }

    #[test]
    fn basis_len_matches_enumeration() {
        for g in 1..=4 {
            for d in 0..=5 {
                let b = enumerate_basis(g, d);
                assert_eq!(b.len(), basis_len(g, d));
                assert!(b.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }

    #[test]
    fn word_text_roundtrip() {
        let w = Word::from_one_based(&[2, 1, 2], 2).unwrap();
        assert_eq!(Word::parse(&w.to_string()).unwrap(), w);
        assert_eq!(Word::parse("1").unwrap(), Word::empty());
    }
}
