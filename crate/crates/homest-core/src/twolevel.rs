//! Closed-form results for the resonantly driven two-level emitter.
//!
//! These expressions back the test suites and acceptance criteria as
//! independent oracles for the numerical machinery. All forms require
//! resonant driving (`delta = 0`) and are even functions of the Rabi
//! frequency.

use crate::error::{Error, Result};

/// Parameters of the driven two-level system. The decay rate `gamma` fixes
/// the unit system (rates in gamma, times in 1/gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    pub omega: f64,
    pub gamma: f64,
    pub phi: f64,
    pub eta: f64,
    pub delta: f64,
}

impl QubitParams {
    pub fn new(omega: f64) -> Self {
        QubitParams {
            omega,
            gamma: 1.0,
            phi: 0.0,
            eta: 1.0,
            delta: 0.0,
        }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    fn require_resonant(&self) -> Result<()> {
        if self.delta != 0.0 {
            return Err(Error::NonZeroDetuning(self.delta));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Steady-state Bloch vector of the resonant qubit,
/// `(0, 2 Omega gamma / (gamma^2 + 2 Omega^2), -gamma^2 / (gamma^2 + 2 Omega^2))`.
pub fn steady_bloch(p: &QubitParams) -> Result<(f64, f64, f64)> {
    p.require_resonant()?;
    let denom = p.gamma * p.gamma + 2.0 * p.omega * p.omega;
    Ok((
        0.0,
        2.0 * p.omega * p.gamma / denom,
        -p.gamma * p.gamma / denom,
    ))
}

/// Two-time correlation function for x-probing (`phi = 0`),
/// `F(tau) = eta * 2 Omega^2 gamma e^{-gamma tau / 2} / (2 Omega^2 + gamma^2)`.
pub fn f1_phi0(p: &QubitParams, tau: f64) -> Result<f64> {
    p.require_resonant()?;
    if tau <= 0.0 {
        return Err(Error::NonPositiveLag(tau));
    }
    let amp = 2.0 * p.omega * p.omega * p.gamma / (2.0 * p.omega * p.omega + p.gamma * p.gamma);
    Ok(p.eta * amp * (-0.5 * p.gamma * tau).exp())
}

/// Fisher information per unit time carried by the integrated mean signal,
///
/// ```text
/// I1 / T = eta * 4 gamma^3 (2 Omega^2 - gamma^2)^2 / (2 Omega^2 + gamma^2)^4 * sin^2(phi)
/// ```
///
/// This is the dimensionally consistent form; it reproduces the limits
/// `4 eta / gamma` at `Omega -> 0`, `phi = pi/2` and the zero at
/// `Omega = gamma / sqrt(2)`.
pub fn i1_closed(p: &QubitParams) -> Result<f64> {
    p.require_resonant()?;
    let g2 = p.gamma * p.gamma;
    let denom = 2.0 * p.omega * p.omega + g2;
    let bracket = 2.0 * p.omega * p.omega - g2;
    let s = p.phi.sin();
    // eta applied last so the efficiency scaling is exact in floating point
    Ok(p.eta * (4.0 * g2 * p.gamma * bracket * bracket / denom.powi(4) * s * s))
}

/// Driving regime selecting which closed form of the two-time Fisher
/// information applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrivingRegime {
    /// `Omega << gamma`, y-probing: `I2 / T = eta^2 * 16 Omega^2 / gamma^3`.
    Weak,
    /// `Omega >> gamma`, y-probing: the saturated-transition expression with
    /// limit `8 / (27 gamma)`.
    Strong,
    /// x-probing at any drive: `I2 / T = eta^2 * 16 Omega^2 gamma^5 / (2 Omega^2 + gamma^2)^4`.
    PhiZero,
}

/// Closed-form `I2 / T` in the requested regime. Logs a warning when the
/// drive strength is outside the regime of validity (weak: `Omega <= 0.1 gamma`,
/// strong: `Omega >= 10 gamma`).
pub fn i2_limits(p: &QubitParams, regime: DrivingRegime) -> Result<f64> {
    p.require_resonant()?;
    let eta2 = p.eta * p.eta;
    let (omega, gamma) = (p.omega, p.gamma);
    match regime {
        DrivingRegime::Weak => {
            if omega.abs() > 0.1 * gamma {
                log::warn!(
                    "weak-driving form requested at Omega = {omega} gamma; valid for Omega <= 0.1 gamma"
                );
            }
            Ok(eta2 * 16.0 * omega * omega / gamma.powi(3))
        }
        DrivingRegime::Strong => {
            if omega.abs() < 10.0 * gamma {
                log::warn!(
                    "strong-driving form requested at Omega = {omega} gamma; valid for Omega >= 10 gamma"
                );
            }
            let o2 = omega * omega;
            let g2 = gamma * gamma;
            let numer = 256.0 * o2 * (243.0 * g2 * g2 + 216.0 * g2 * o2 + 128.0 * o2 * o2);
            let denom = 27.0 * gamma * (9.0 * g2 + 16.0 * o2).powi(3);
            Ok(eta2 * numer / denom)
        }
        DrivingRegime::PhiZero => {
            let denom = (2.0 * omega * omega + gamma * gamma).powi(4);
            Ok(eta2 * 16.0 * omega * omega * gamma.powi(5) / denom)
        }
    }
}

/// Quantum Fisher information of the emitted field for Rabi-frequency
/// estimation in the resonant qubit: `4 T / gamma`, independent of the drive.
pub fn qfi_reference(gamma: f64, t_total: f64) -> f64 {
    4.0 * t_total / gamma
}
