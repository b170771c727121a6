//! Operator and superoperator algebra for small open quantum systems.
//!
//! Basis convention for the qubit preset: index 0 is the ground state |g>,
//! index 1 is the excited state |e>, and the lowering operator is
//! `sigma_minus = |g><e|`. The remaining spin operators follow from it,
//!
//! ```text
//! sigma_x = sigma_minus + sigma_plus
//! sigma_y = i (sigma_minus - sigma_plus)
//! sigma_z = |e><e| - |g><g|
//! ```
//!
//! so that the undriven atom relaxes to Bloch vector (0, 0, -1). The probed
//! quadrature is `sigma_phi = cos(phi) sigma_x - sin(phi) sigma_y`, and for a
//! monitored collapse operator `c = sqrt(gamma) sigma_minus` the measurement
//! map satisfies `Tr[X_phi rho] = sqrt(gamma) <sigma_phi>`.

mod correlate;
mod model;
mod superop;

pub use correlate::{
    mean_signal, multi_time, power_spectrum, qrt_two_time, qrt_two_time_grid, PowerSpectrum,
    TwoTimeCorrelation,
};
pub use model::SystemModel;
pub use superop::{build_liouvillian, measurement_superop, propagator, steady_state, Superoperator};

use crate::linalg::{CMatrix, C_I, C_ONE};
use num_complex::Complex64;

/// Lowering operator |g><e| for a qubit.
pub fn sigma_minus() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = C_ONE;
    m
}

/// Raising operator |e><g| for a qubit.
pub fn sigma_plus() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(1, 0)] = C_ONE;
    m
}

pub fn sigma_x() -> CMatrix {
    sigma_minus() + sigma_plus()
}

pub fn sigma_y() -> CMatrix {
    (sigma_minus() - sigma_plus()) * C_I
}

pub fn sigma_z() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new(-1.0, 0.0);
    m[(1, 1)] = C_ONE;
    m
}

/// Probed spin component `cos(phi) sigma_x - sin(phi) sigma_y`.
pub fn sigma_phi(phi: f64) -> CMatrix {
    sigma_x() * Complex64::new(phi.cos(), 0.0) - sigma_y() * Complex64::new(phi.sin(), 0.0)
}

/// Ground-state projector |g><g|.
pub fn ground_state(dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, 0)] = C_ONE;
    m
}

/// Excited-state projector |e><e| for a qubit.
pub fn excited_state() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(1, 1)] = C_ONE;
    m
}

/// Density matrix with the given Bloch vector, `(I + s . sigma) / 2`.
pub fn bloch_density(sx: f64, sy: f64, sz: f64) -> CMatrix {
    let mut m = sigma_x() * Complex64::new(sx, 0.0)
        + sigma_y() * Complex64::new(sy, 0.0)
        + sigma_z() * Complex64::new(sz, 0.0);
    m[(0, 0)] += C_ONE;
    m[(1, 1)] += C_ONE;
    m * Complex64::new(0.5, 0.0)
}

/// Bloch components `(s_x, s_y, s_z)` of a qubit density matrix.
pub fn bloch_vector(rho: &CMatrix) -> (f64, f64, f64) {
    assert_eq!(rho.nrows(), 2, "bloch_vector requires a qubit state");
    let sx = (rho * sigma_x()).trace().re;
    let sy = (rho * sigma_y()).trace().re;
    let sz = (rho * sigma_z()).trace().re;
    (sx, sy, sz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spin_algebra_is_consistent() {
        // [sigma_x, sigma_y] = 2i sigma_z in this basis ordering
        let comm = sigma_x() * sigma_y() - sigma_y() * sigma_x();
        assert_relative_eq!((comm - sigma_z() * (C_I * 2.0)).norm(), 0.0, epsilon = 1e-15);
        // sigma_minus = (sigma_x - i sigma_y) / 2
        let sm = (sigma_x() - sigma_y() * C_I) * Complex64::new(0.5, 0.0);
        assert_relative_eq!((sm - sigma_minus()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ground_state_has_negative_sz() {
        let (sx, sy, sz) = bloch_vector(&ground_state(2));
        assert_relative_eq!(sx, 0.0, epsilon = 1e-15);
        assert_relative_eq!(sy, 0.0, epsilon = 1e-15);
        assert_relative_eq!(sz, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn bloch_roundtrip() {
        let rho = bloch_density(0.1, -0.4, 0.2);
        let (sx, sy, sz) = bloch_vector(&rho);
        assert_relative_eq!(sx, 0.1, epsilon = 1e-14);
        assert_relative_eq!(sy, -0.4, epsilon = 1e-14);
        assert_relative_eq!(sz, 0.2, epsilon = 1e-14);
    }
}
