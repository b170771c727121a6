//! Superoperators in the column-stacking vectorization.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    devectorize, expm, hermitian_deviation, hermitize, identity, vectorize, CMatrix, CVector, C_I,
};

const HERMITICITY_TOL: f64 = 1e-12;
const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// A linear map on operators, stored as a `d^2 x d^2` matrix acting on
/// column-stacked operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    mat: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, mat: CMatrix) -> Self {
        assert_eq!(mat.nrows(), dim * dim, "superoperator has wrong shape");
        assert_eq!(mat.ncols(), dim * dim, "superoperator has wrong shape");
        Superoperator { dim, mat }
    }

    /// Identity map.
    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            mat: identity(dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Apply the map to an operator.
    pub fn apply(&self, op: &CMatrix) -> CMatrix {
        assert_eq!(op.nrows(), self.dim, "operand dimension mismatch");
        devectorize(&(&self.mat * vectorize(op)), self.dim)
    }

    /// Apply the map to an already vectorized operator.
    pub fn apply_vec(&self, v: &CVector) -> CVector {
        &self.mat * v
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        Superoperator {
            dim: self.dim,
            mat: &self.mat * &other.mat,
        }
    }
}

/// Superoperator for `rho -> A rho B` in the column-stacking convention,
/// `B^T ⊗ A`.
fn sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    b.transpose().kronecker(a)
}

/// Lindblad generator for Hamiltonian `h` and collapse operators `collapse`:
///
/// ```text
/// L(rho) = -i [h, rho] + sum_k ( c_k rho c_k† - {c_k† c_k, rho} / 2 )
/// ```
pub fn build_liouvillian(h: &CMatrix, collapse: &[CMatrix]) -> Result<Superoperator> {
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian is {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let dev = hermitian_deviation(h);
    if dev > HERMITICITY_TOL {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: HERMITICITY_TOL,
        });
    }
    for (k, c) in collapse.iter().enumerate() {
        if c.nrows() != dim || c.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "collapse operator {} is {}x{}, expected {}x{}",
                k,
                c.nrows(),
                c.ncols(),
                dim,
                dim
            )));
        }
    }

    let eye = identity(dim);
    let mut mat = (sandwich(h, &eye) - sandwich(&eye, h)) * (-C_I);
    for c in collapse {
        let cdc = c.adjoint() * c;
        mat += sandwich(c, &c.adjoint());
        mat -= (sandwich(&cdc, &eye) + sandwich(&eye, &cdc)) * Complex64::new(0.5, 0.0);
    }
    Ok(Superoperator { dim, mat })
}

/// Homodyne measurement map `X_phi(rho) = c e^{-i phi} rho + rho c† e^{i phi}`.
///
/// The map carries no efficiency factor; callers apply `sqrt(eta)` or `eta`
/// explicitly where the signal equations require it.
pub fn measurement_superop(c: &CMatrix, phi: f64) -> Superoperator {
    let dim = c.nrows();
    assert_eq!(c.ncols(), dim, "collapse operator must be square");
    let eye = identity(dim);
    let phase = Complex64::from_polar(1.0, -phi);
    let mat = sandwich(c, &eye) * phase + sandwich(&eye, &c.adjoint()) * phase.conj();
    Superoperator { dim, mat }
}

/// Stationary state of a Liouvillian: the unique `rho` with `L(rho) = 0` and
/// unit trace.
///
/// The null space is found by solving `L` augmented with the trace row.
/// Degeneracy (null space of dimension > 1) is detected from the singular
/// spectrum and reported, not silently resolved.
pub fn steady_state(l: &Superoperator) -> Result<CMatrix> {
    let d = l.dim;
    let d2 = d * d;

    let svd = nalgebra::SVD::new(l.mat.clone(), false, false);
    let mut svals: Vec<f64> = svd.singular_values.iter().copied().collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let norm = svals[0].max(f64::MIN_POSITIVE);
    let second_smallest = svals[d2 - 2];
    if second_smallest < DEGENERACY_THRESHOLD * norm {
        return Err(Error::DegenerateSteadyState {
            second: second_smallest,
            threshold: DEGENERACY_THRESHOLD * norm,
        });
    }

    // [L; trace row] x = [0; 1], solved in the least-squares sense.
    let mut aug = CMatrix::zeros(d2 + 1, d2);
    aug.view_mut((0, 0), (d2, d2)).copy_from(&l.mat);
    for i in 0..d {
        aug[(d2, i * d + i)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(d2 + 1);
    rhs[d2] = Complex64::new(1.0, 0.0);
    let sol = nalgebra::SVD::new(aug, true, true)
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidInput(format!("steady-state solve failed: {e}")))?;

    let mut rho = devectorize(&sol, d);
    hermitize(&mut rho);
    let tr = rho.trace();
    rho /= tr;
    Ok(rho)
}

/// Propagator `exp(L tau)` for `tau >= 0`.
pub fn propagator(l: &Superoperator, tau: f64) -> Result<Superoperator> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeTime(tau));
    }
    Ok(Superoperator {
        dim: l.dim,
        mat: expm(&(&l.mat * Complex64::new(tau, 0.0))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{bloch_density, bloch_vector, excited_state, ground_state, sigma_minus};
    use approx::assert_relative_eq;

    fn decay_qubit(gamma: f64) -> Vec<CMatrix> {
        vec![sigma_minus() * Complex64::new(gamma.sqrt(), 0.0)]
    }

    fn rabi_hamiltonian(omega: f64, delta: f64) -> CMatrix {
        let n = excited_state();
        let sx = crate::qops::sigma_x();
        n * Complex64::new(-delta, 0.0) + sx * Complex64::new(0.5 * omega, 0.0)
    }

    #[test]
    fn dark_steady_state_is_annihilated() {
        // H = 0, c = sqrt(gamma) sigma_-, rho = |g><g| -> L(rho) = 0
        let l = build_liouvillian(&CMatrix::zeros(2, 2), &decay_qubit(1.0)).unwrap();
        let out = l.apply(&ground_state(2));
        assert_relative_eq!(out.norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn excited_state_decays_at_rate_gamma() {
        // L(|e><e|) = gamma (|g><g| - |e><e|)
        let gamma = 0.7;
        let l = build_liouvillian(&CMatrix::zeros(2, 2), &decay_qubit(gamma)).unwrap();
        let out = l.apply(&excited_state());
        let expected = (ground_state(2) - excited_state()) * Complex64::new(gamma, 0.0);
        assert_relative_eq!((out - expected).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        let err = build_liouvillian(&h, &[]).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = CMatrix::zeros(2, 2);
        let c = CMatrix::zeros(3, 3);
        let err = build_liouvillian(&h, &[c]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn undriven_steady_state_is_ground() {
        let l = build_liouvillian(&rabi_hamiltonian(0.0, 0.0), &decay_qubit(1.0)).unwrap();
        let rho = steady_state(&l).unwrap();
        assert_relative_eq!((rho - ground_state(2)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn resonant_steady_state_matches_closed_form() {
        // Omega = gamma: Bloch vector (0, 2/3, -1/3)
        let l = build_liouvillian(&rabi_hamiltonian(1.0, 0.0), &decay_qubit(1.0)).unwrap();
        let rho = steady_state(&l).unwrap();
        let residual = l.apply(&rho).norm();
        assert!(residual < 1e-10, "residual {residual}");
        let (sx, sy, sz) = bloch_vector(&rho);
        assert_relative_eq!(sx, 0.0, epsilon = 1e-12);
        assert_relative_eq!(sy, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(sz, -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_driving_saturates_to_maximally_mixed() {
        let l = build_liouvillian(&rabi_hamiltonian(1e3, 0.0), &decay_qubit(1.0)).unwrap();
        let rho = steady_state(&l).unwrap();
        let half = identity(2) * Complex64::new(0.5, 0.0);
        assert!((rho - half).norm() < 1e-5);
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        // No dynamics at all: every state is stationary.
        let l = build_liouvillian(&CMatrix::zeros(2, 2), &[]).unwrap();
        let err = steady_state(&l).unwrap_err();
        assert!(matches!(err, Error::DegenerateSteadyState { .. }));
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let l = build_liouvillian(&rabi_hamiltonian(1.0, 0.0), &decay_qubit(1.0)).unwrap();
        let p = propagator(&l, 0.0).unwrap();
        assert_relative_eq!(
            (p.matrix() - identity(4)).norm(),
            0.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn propagator_rejects_negative_time() {
        let l = build_liouvillian(&rabi_hamiltonian(1.0, 0.0), &decay_qubit(1.0)).unwrap();
        assert!(matches!(propagator(&l, -0.1), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn propagator_fixes_steady_state() {
        let l = build_liouvillian(&rabi_hamiltonian(1.0, 0.0), &decay_qubit(1.0)).unwrap();
        let rho = steady_state(&l).unwrap();
        for tau in [0.1, 1.0, 10.0] {
            let p = propagator(&l, tau).unwrap();
            assert!((p.apply(&rho) - &rho).norm() < 1e-10, "tau = {tau}");
        }
    }

    #[test]
    fn propagator_composes() {
        let l = build_liouvillian(&rabi_hamiltonian(1.3, 0.2), &decay_qubit(1.0)).unwrap();
        let p1 = propagator(&l, 0.4).unwrap();
        let p2 = propagator(&l, 1.1).unwrap();
        let p12 = propagator(&l, 1.5).unwrap();
        assert!((p1.compose(&p2).matrix() - p12.matrix()).norm() < 1e-9);
    }

    #[test]
    fn measurement_map_preserves_hermiticity() {
        let c = sigma_minus() * Complex64::new(1.0, 0.0);
        for phi in [0.0, 0.3, std::f64::consts::FRAC_PI_2, 2.2] {
            let x = measurement_superop(&c, phi);
            let rho = bloch_density(0.2, -0.3, 0.4);
            let out = x.apply(&rho);
            assert!(hermitian_deviation(&out) < 1e-14, "phi = {phi}");
        }
    }

    #[test]
    fn measurement_trace_probes_sigma_phi() {
        let gamma: f64 = 1.0;
        let c = sigma_minus() * Complex64::new(gamma.sqrt(), 0.0);
        // maximally mixed state: <sigma_x> = 0
        let x0 = measurement_superop(&c, 0.0);
        let mixed = identity(2) * Complex64::new(0.5, 0.0);
        assert_relative_eq!(x0.apply(&mixed).trace().re, 0.0, epsilon = 1e-14);
        // s_y = 2/3 at phi = pi/2 probes -sigma_y
        let x = measurement_superop(&c, std::f64::consts::FRAC_PI_2);
        let rho = bloch_density(0.0, 2.0 / 3.0, -1.0 / 3.0);
        let tr = x.apply(&rho).trace();
        assert_relative_eq!(tr.re, -gamma.sqrt() * 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(tr.im, 0.0, epsilon = 1e-14);
    }
}
