//! Small dense helpers shared by the modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub(crate) fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(sym(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of the symmetric part of `m` (`+inf` for an empty matrix).
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub(crate) fn max_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Factor a PSD matrix as `Σ h_k h_kᵀ`, dropping eigenvalues at or below
/// `rel_tol · max(λ_max, 0)`.
pub fn psd_factor(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(sym(m));
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    if top <= 0.0 {
        return Vec::new();
    }
    let cut = rel_tol * top;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > cut)
        .map(|k| eig.eigenvectors.column(k) * eig.eigenvalues[k].sqrt())
        .collect()
}

/// Numerical rank at `rel_tol · λ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let ev = sym_eigenvalues(m);
    let top = ev.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&v| v > rel_tol * top).count()
}

pub(crate) fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Orthonormal basis of the column span of `m` (rank cut relative to the largest
/// singular value).
pub(crate) fn orthonormal_span(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| top > 0.0 && svd.singular_values[k] > rel_tol * top)
        .collect();
    let mut out = DMatrix::zeros(m.nrows(), keep.len());
    for (c, &k) in keep.iter().enumerate() {
        out.set_column(c, &u.column(k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let hs = psd_factor(&m, 1e-9);
        assert_eq!(hs.len(), 2);
        let mut r = DMatrix::zeros(3, 3);
        for h in &hs {
            r += h * h.transpose();
        }
        assert!(max_abs(&(r - m)) < 1e-12);
    }

    #[test]
    fn rank_and_span() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
        assert_eq!(orthonormal_span(&m, 1e-10).ncols(), 1);
        assert!((min_eig(&m)).abs() < 1e-12);
    }
}
