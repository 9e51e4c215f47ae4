//! Small dense complex linear algebra shared by the state and metric code.
//!
//! Everything here works on `DMatrix<C64>` so the same routines serve the
//! 3×3 two-excitation sector and the 4×4 embedded qubit pair.

use nalgebra::{Complex, DMatrix, Matrix3};

pub type C64 = Complex<f64>;

/// Eigenvalues at or below this (relative to the largest) are treated as
/// exact zeros when a positive semidefinite factor is formed.
pub const RANK_TOL: f64 = 1e-14;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues descending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Returns `A` with `m = A A†`, one column per retained eigenvalue.
///
/// Eigenvalues below `-neg_tol` are reported as `Err(min_eigenvalue)`;
/// eigenvalues in `[-neg_tol, RANK_TOL·λmax]` are dropped. Working with the
/// factor avoids taking square roots of round-off sized eigenvalues.
pub fn psd_factor(m: &DMatrix<C64>, neg_tol: f64) -> Result<DMatrix<C64>, f64> {
    let (values, vectors) = hermitian_eigen(m);
    let min = values.last().copied().unwrap_or(0.0);
    if min < -neg_tol {
        return Err(min);
    }
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = RANK_TOL * top.max(f64::MIN_POSITIVE);
    let kept: Vec<usize> = (0..values.len()).filter(|&k| values[k] > cut).collect();
    let n = m.nrows();
    Ok(DMatrix::from_fn(n, kept.len(), |r, j| {
        vectors[(r, kept[j])] * values[kept[j]].sqrt()
    }))
}

/// Singular values, descending. Empty matrices have none.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Lower-triangular `L` with `L L† = m` for Hermitian positive definite `m`
/// (lower triangle read); `None` when a pivot is not strictly positive.
pub fn hermitian_cholesky(m: &Matrix3<C64>) -> Option<Matrix3<C64>> {
    let mut l = Matrix3::<C64>::zeros();
    for j in 0..3 {
        let pivot = m[(j, j)].re - (0..j).map(|k| l[(j, k)].norm_sqr()).sum::<f64>();
        if !(pivot > 0.0) {
            return None;
        }
        let d = pivot.sqrt();
        l[(j, j)] = c(d, 0.0);
        for i in j + 1..3 {
            let dot: C64 = (0..j).map(|k| l[(i, k)] * l[(j, k)].conj()).sum();
            l[(i, j)] = (m[(i, j)] - dot) / d;
        }
    }
    Some(l)
}
