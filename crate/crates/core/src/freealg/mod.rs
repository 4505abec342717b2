//! Free algebra: words, matrix-valued noncommutative polynomials, evaluation
//! at tuples of symmetric matrices, and the text format.

mod poly;
mod text;
mod tuple;
mod word;

pub(crate) use poly::word_value;
pub use poly::{MatPoly, PRUNE_TOL};
pub use text::{format_poly, format_scalar, parse_matrix_poly, parse_poly, scalar_from};
pub use tuple::{MatTuple, SYMMETRY_TOL};
pub use word::{basis_len, enumerate_basis, Word};
