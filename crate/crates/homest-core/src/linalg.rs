//! Dense complex linear algebra helpers for small Hilbert spaces.
//!
//! Operators are plain `DMatrix<Complex64>` values. Vectorization uses the
//! column-stacking convention: `vec(rho)` concatenates the columns of `rho`,
//! so `vec(A rho B) = (B^T ⊗ A) vec(rho)`. nalgebra stores matrices in
//! column-major order, which makes `vec` a straight copy of the backing slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Column-stacked vector form of a square matrix.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for a `d x d` matrix.
pub fn devectorize(v: &CVector, dim: usize) -> CMatrix {
    assert_eq!(v.len(), dim * dim, "vector length does not match dimension");
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Relative deviation from Hermiticity, `||m - m†|| / max(||m||, 1)`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let diff = m - m.adjoint();
    diff.norm() / m.norm().max(1.0)
}

/// Replace `m` by its Hermitian part `(m + m†)/2`.
pub fn hermitize(m: &mut CMatrix) {
    let adj = m.adjoint();
    *m += adj;
    *m *= Complex64::new(0.5, 0.0);
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 2 {
        let (lo, hi) = herm2_eigenvalues(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]);
        return vec![lo, hi];
    }
    let mut eigs: Vec<f64> = nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Eigenvalues of a 2x2 Hermitian matrix `[[a, b], [b*, d]]`, ascending.
pub fn herm2_eigenvalues(a: f64, d: f64, b: Complex64) -> (f64, f64) {
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mid - rad, mid + rad)
}

/// Clip negative eigenvalues of a Hermitian matrix to zero.
///
/// Returns the total clipped weight, i.e. the sum of `|lambda|` over the
/// eigenvalues that were negative.
pub fn clip_negative_eigenvalues(m: &mut CMatrix) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut clipped = 0.0;
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            clipped += -*v;
            *v = 0.0;
        }
    }
    if clipped > 0.0 {
        let q = &eig.eigenvectors;
        let lambda = CMatrix::from_diagonal(&vals.map(|x| Complex64::new(x, 0.0)));
        *m = q * lambda * q.adjoint();
    }
    clipped
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)[0]
}

/// Whether `m` is a valid density matrix: Hermitian, unit trace and positive
/// semidefinite within the given tolerances.
pub fn is_valid_density(m: &CMatrix, trace_tol: f64, eig_tol: f64) -> bool {
    if hermitian_deviation(m) > 1e-10 {
        return false;
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
        return false;
    }
    min_eigenvalue(m) >= -eig_tol
}

/// Matrix exponential `exp(m)`.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Identity matrix of the given dimension.
pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vectorize_roundtrip_is_identity() {
        let m = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64, j as f64));
        let v = vectorize(&m);
        // column stacking: entry (i, j) sits at j*d + i
        assert_eq!(v[3], m[(0, 1)]);
        assert_eq!(devectorize(&v, 3), m);
    }

    #[test]
    fn clip_removes_negative_eigenvalues() {
        let mut m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(1.2, 0.0),
            Complex64::new(-0.2, 0.0),
        ]));
        let clipped = clip_negative_eigenvalues(&mut m);
        assert_relative_eq!(clipped, 0.2, epsilon = 1e-14);
        assert!(min_eigenvalue(&m) >= -1e-14);
    }

    #[test]
    fn herm2_matches_general_path() {
        let b = Complex64::new(0.3, -0.4);
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.7, 0.0), b, b.conj(), Complex64::new(0.1, 0.0)],
        );
        let (lo, hi) = herm2_eigenvalues(0.7, 0.1, b);
        let eigs = nalgebra::SymmetricEigen::new(m).eigenvalues;
        let mut general: Vec<f64> = eigs.iter().copied().collect();
        general.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(lo, general[0], epsilon = 1e-12);
        assert_relative_eq!(hi, general[1], epsilon = 1e-12);
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMatrix::zeros(4, 4);
        assert_relative_eq!((expm(&z) - identity(4)).norm(), 0.0, epsilon = 1e-14);
    }
}
