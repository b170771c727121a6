//! Parameterized system description: Hamiltonian factory, collapse operators
//! and the monitored homodyne channel.

use std::sync::Arc;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{identity, vectorize, CMatrix, CVector};

use super::superop::{build_liouvillian, measurement_superop, steady_state, Superoperator};
use super::{excited_state, sigma_minus, sigma_x};

type HamiltonianFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// Extra bookkeeping for the resonant qubit preset; enables closed-form
/// references such as the quantum Fisher information ceiling `4T/gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitPreset {
    pub delta: f64,
    pub gamma: f64,
}

/// An open system with a single unknown scalar parameter `theta`.
///
/// Rates are expressed in units of the reference decay rate and times in its
/// inverse; for the qubit preset with `gamma = 1` all quantities are in units
/// of gamma.
#[derive(Clone)]
pub struct SystemModel {
    dim: usize,
    hamiltonian: HamiltonianFn,
    hamiltonian_deriv: Option<HamiltonianFn>,
    collapse: Vec<CMatrix>,
    monitored: usize,
    phi: f64,
    eta: f64,
    parameter: String,
    fingerprint: String,
    preset: Option<QubitPreset>,
}

impl std::fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemModel")
            .field("dim", &self.dim)
            .field("monitored", &self.monitored)
            .field("phi", &self.phi)
            .field("eta", &self.eta)
            .field("parameter", &self.parameter)
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

impl SystemModel {
    /// General constructor. `label` feeds the configuration fingerprint and
    /// should identify the Hamiltonian family and its fixed parameters.
    pub fn new(
        dim: usize,
        hamiltonian: HamiltonianFn,
        hamiltonian_deriv: Option<HamiltonianFn>,
        collapse: Vec<CMatrix>,
        monitored: usize,
        phi: f64,
        eta: f64,
        parameter: &str,
        label: &str,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "Hilbert space dimension must be at least 2, got {dim}"
            )));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidEfficiency(eta));
        }
        if monitored >= collapse.len() {
            return Err(Error::InvalidInput(format!(
                "monitored channel {monitored} out of range: {} collapse operators",
                collapse.len()
            )));
        }
        for (k, c) in collapse.iter().enumerate() {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "collapse operator {k} has shape {}x{}",
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        let fingerprint = fingerprint_of(label, dim, monitored, phi, eta, parameter);
        Ok(SystemModel {
            dim,
            hamiltonian,
            hamiltonian_deriv,
            collapse,
            monitored,
            phi,
            eta,
            parameter: parameter.to_owned(),
            fingerprint,
            preset: None,
        })
    }

    /// Resonantly driven two-level emitter with `theta` the Rabi frequency:
    /// `H(Omega) = -delta sp sm + (Omega/2)(sm + sp)`, single collapse
    /// channel `c = sqrt(gamma) sigma_minus`.
    pub fn qubit(delta: f64, gamma: f64, phi: f64, eta: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "decay rate must be positive, got {gamma}"
            )));
        }
        let h = move |omega: f64| {
            excited_state() * Complex64::new(-delta, 0.0)
                + sigma_x() * Complex64::new(0.5 * omega, 0.0)
        };
        let dh = |_: f64| sigma_x() * Complex64::new(0.5, 0.0);
        let c = sigma_minus() * Complex64::new(gamma.sqrt(), 0.0);
        let label = format!("qubit;delta={delta:.12e};gamma={gamma:.12e}");
        let mut model = SystemModel::new(
            2,
            Arc::new(h),
            Some(Arc::new(dh)),
            vec![c],
            0,
            phi,
            eta,
            "omega",
            &label,
        )?;
        model.preset = Some(QubitPreset { delta, gamma });
        Ok(model)
    }

    /// Copy of this model with a different detector efficiency.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidEfficiency(eta));
        }
        let mut m = self.clone();
        m.eta = eta;
        m.fingerprint = fingerprint_of(
            &format!("derived;{}", self.fingerprint),
            m.dim,
            m.monitored,
            m.phi,
            eta,
            &m.parameter,
        );
        Ok(m)
    }

    /// Copy of this model with a different local oscillator phase.
    pub fn with_phi(&self, phi: f64) -> Self {
        let mut m = self.clone();
        m.phi = phi;
        m.fingerprint = fingerprint_of(
            &format!("derived;{}", self.fingerprint),
            m.dim,
            m.monitored,
            phi,
            m.eta,
            &m.parameter,
        );
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn parameter(&self) -> &str {
        &self.parameter
    }

    /// Hash of the model configuration, stored in records for provenance.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn preset(&self) -> Option<QubitPreset> {
        self.preset
    }

    pub fn collapse_ops(&self) -> &[CMatrix] {
        &self.collapse
    }

    pub fn monitored_op(&self) -> &CMatrix {
        &self.collapse[self.monitored]
    }

    pub fn hamiltonian_at(&self, theta: f64) -> CMatrix {
        (self.hamiltonian)(theta)
    }

    /// Quantum Fisher information reference `4T/gamma`, available for the
    /// resonant qubit preset.
    pub fn qfi_reference(&self, t_total: f64) -> Option<f64> {
        self.preset
            .filter(|p| p.delta == 0.0)
            .map(|p| 4.0 * t_total / p.gamma)
    }

    pub fn liouvillian(&self, theta: f64) -> Result<Superoperator> {
        build_liouvillian(&self.hamiltonian_at(theta), &self.collapse)
    }

    /// Parameter derivative of the Liouvillian. Uses the analytic Hamiltonian
    /// derivative when available, otherwise a central difference with step
    /// `dtheta`. Collapse operators are theta-independent by construction.
    pub fn liouvillian_deriv(&self, theta: f64, dtheta: f64) -> Result<Superoperator> {
        match &self.hamiltonian_deriv {
            Some(dh) => build_liouvillian(&dh(theta), &[]),
            None => {
                let lp = self.liouvillian(theta + dtheta)?;
                let lm = self.liouvillian(theta - dtheta)?;
                let mat = (lp.matrix() - lm.matrix()) * Complex64::new(0.5 / dtheta, 0.0);
                Ok(Superoperator::from_matrix(self.dim, mat))
            }
        }
    }

    /// Measurement map `X_phi` of the monitored channel (efficiency-free).
    pub fn measurement(&self) -> Superoperator {
        measurement_superop(self.monitored_op(), self.phi)
    }

    pub fn steady_state(&self, theta: f64) -> Result<CMatrix> {
        steady_state(&self.liouvillian(theta)?)
    }

    /// Central-difference derivative of the steady state.
    pub fn steady_state_deriv(&self, theta: f64, dtheta: f64) -> Result<CMatrix> {
        let p = self.steady_state(theta + dtheta)?;
        let m = self.steady_state(theta - dtheta)?;
        Ok((p - m) * Complex64::new(0.5 / dtheta, 0.0))
    }

    /// Precomputed matrices for stochastic propagation at fixed `theta`.
    pub(crate) fn kernel(&self, theta: f64) -> Result<StepKernel> {
        let l = self.liouvillian(theta)?;
        let x = self.measurement();
        Ok(StepKernel::new(self.dim, l, x, self.eta))
    }
}

fn fingerprint_of(
    label: &str,
    dim: usize,
    monitored: usize,
    phi: f64,
    eta: f64,
    parameter: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update(format!(
        ";dim={dim};monitored={monitored};phi={phi:.12e};eta={eta:.12e};parameter={parameter}"
    ));
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Dense matrices used by the stochastic integrators. The trace functional
/// `Tr[X rho]` is evaluated as `Re(w† vec(rho))` with `w = X† vec(I)`.
pub(crate) struct StepKernel {
    pub l_mat: CMatrix,
    pub x_mat: CMatrix,
    trace_x: CVector,
    pub sqrt_eta: f64,
}

impl StepKernel {
    pub fn new(dim: usize, l: Superoperator, x: Superoperator, eta: f64) -> Self {
        let trace_x = x.matrix().adjoint() * vectorize(&identity(dim));
        StepKernel {
            l_mat: l.matrix().clone(),
            x_mat: x.matrix().clone(),
            trace_x,
            sqrt_eta: eta.sqrt(),
        }
    }

    /// `Tr[X rho]` for a vectorized Hermitian `rho`.
    #[inline]
    pub fn trace_x(&self, v: &CVector) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, x) in self.trace_x.iter().zip(v.iter()) {
            acc += w.conj() * x;
        }
        acc.re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn qubit_preset_realizes_rabi_hamiltonian() {
        let model = SystemModel::qubit(0.3, 1.0, 0.0, 1.0).unwrap();
        let h = model.hamiltonian_at(2.0);
        // H = -delta |e><e| + (Omega/2) sigma_x
        assert_relative_eq!(h[(1, 1)].re, -0.3, epsilon = 1e-15);
        assert_relative_eq!(h[(0, 1)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(h[(0, 0)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_eta_is_rejected() {
        assert!(matches!(
            SystemModel::qubit(0.0, 1.0, 0.0, 1.2),
            Err(Error::InvalidEfficiency(_))
        ));
    }

    #[test]
    fn fingerprint_distinguishes_configurations() {
        let a = SystemModel::qubit(0.0, 1.0, 0.0, 1.0).unwrap();
        let b = SystemModel::qubit(0.0, 1.0, 0.1, 1.0).unwrap();
        let a2 = SystemModel::qubit(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a2.fingerprint());
    }

    #[test]
    fn analytic_and_finite_difference_liouvillian_deriv_agree() {
        let model = SystemModel::qubit(0.0, 1.0, 0.5, 0.8).unwrap();
        let analytic = model.liouvillian_deriv(1.3, 1e-4).unwrap();
        // forced finite-difference path
        let mut fd_model = model.clone();
        fd_model.hamiltonian_deriv = None;
        let fd = fd_model.liouvillian_deriv(1.3, 1e-4).unwrap();
        assert!((analytic.matrix() - fd.matrix()).norm() < 1e-9);
    }

    #[test]
    fn kernel_trace_matches_superoperator_apply() {
        let model = SystemModel::qubit(0.0, 1.0, 1.1, 1.0).unwrap();
        let rho = crate::qops::bloch_density(0.3, -0.2, 0.1);
        let kernel = model.kernel(1.7).unwrap();
        let direct = model.measurement().apply(&rho).trace().re;
        assert_relative_eq!(kernel.trace_x(&vectorize(&rho)), direct, epsilon = 1e-13);
    }
}
