//! Deterministic signal statistics from the quantum regression theorem.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::vectorize;

use super::model::SystemModel;
use super::superop::propagator;

/// Relative decay below which a gridded correlation function is considered
/// converged at its last lag.
pub const DECAY_TOL: f64 = 1e-6;

/// Mean homodyne signal `I(theta) = sqrt(eta) Tr[X_phi rho_st]`, in units of
/// the square root of the monitored decay rate.
pub fn mean_signal(model: &SystemModel, theta: f64) -> Result<f64> {
    let rho = model.steady_state(theta)?;
    let tr = model.measurement().apply(&rho).trace();
    debug_assert!(tr.im.abs() < 1e-10, "measurement trace should be real");
    Ok(model.eta().sqrt() * tr.re)
}

/// Smooth part of the two-time correlation function
/// `F(tau) = eta Tr[X e^{L tau} X rho_st]` on an increasing grid of positive
/// lags. The shot-noise delta at `tau = 0` is never represented; the constant
/// floor is handled separately by [`power_spectrum`].
///
/// With `mean_subtract`, returns `F(tau) - I^2` so that the values decay to
/// zero at long lags.
pub fn qrt_two_time(
    model: &SystemModel,
    theta: f64,
    taus: &[f64],
    mean_subtract: bool,
) -> Result<Vec<f64>> {
    for pair in taus.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidInput(
                "lag grid must be strictly increasing".into(),
            ));
        }
    }
    if let Some(&first) = taus.first() {
        if first <= 0.0 {
            return Err(Error::NonPositiveLag(first));
        }
    }

    let l = model.liouvillian(theta)?;
    let x = model.measurement();
    let rho_st = model.steady_state(theta)?;
    let eta = model.eta();
    let offset = if mean_subtract {
        let i0 = x.apply(&rho_st).trace().re;
        eta * i0 * i0
    } else {
        0.0
    };

    let mut v = x.apply_vec(&vectorize(&rho_st));
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let step = propagator(&l, tau - prev)?;
        v = step.apply_vec(&v);
        prev = tau;
        let f = x.matrix() * &v;
        out.push(eta * trace_of_vec(&f, model.dim()) - offset);
    }
    Ok(out)
}

/// `F(tau)` sampled on the uniform grid `tau_l = l * delta_tau`, `l = 1..=n_lags`,
/// bundled with the smooth `tau -> 0+` limit needed by the spectrum transform.
pub fn qrt_two_time_grid(
    model: &SystemModel,
    theta: f64,
    delta_tau: f64,
    n_lags: usize,
    mean_subtract: bool,
) -> Result<TwoTimeCorrelation> {
    if delta_tau <= 0.0 {
        return Err(Error::NonPositiveLag(delta_tau));
    }
    let l = model.liouvillian(theta)?;
    let x = model.measurement();
    let rho_st = model.steady_state(theta)?;
    let eta = model.eta();
    let i0 = x.apply(&rho_st).trace().re;
    let offset = if mean_subtract { eta * i0 * i0 } else { 0.0 };

    let step = propagator(&l, delta_tau)?;
    let mut v = x.apply_vec(&vectorize(&rho_st));
    let zero_lag = eta * trace_of_vec(&(x.matrix() * &v), model.dim()) - offset;
    let mut values = Vec::with_capacity(n_lags);
    for _ in 0..n_lags {
        v = step.apply_vec(&v);
        let f = x.matrix() * &v;
        values.push(eta * trace_of_vec(&f, model.dim()) - offset);
    }
    Ok(TwoTimeCorrelation {
        delta_tau,
        values,
        zero_lag: Some(zero_lag),
        mean_subtracted: mean_subtract,
    })
}

/// Multi-time correlator of the homodyne current,
///
/// ```text
/// F^(n/2)({tau_j}) = eta^(n/2) Tr[ X e^{L tau_{n-1}} ... X e^{L tau_1} X rho_st ]
/// ```
///
/// with `n = lags.len() + 1` current factors at consecutive separations
/// `lags`. `n` must be even and all lags positive; the superoperator product
/// is evaluated right-to-left from the steady state.
pub fn multi_time(model: &SystemModel, theta: f64, lags: &[f64]) -> Result<f64> {
    let n = lags.len() + 1;
    if n % 2 != 0 {
        return Err(Error::OddCorrelatorOrder(n));
    }
    for &tau in lags {
        if tau <= 0.0 {
            return Err(Error::NonPositiveLag(tau));
        }
    }
    let l = model.liouvillian(theta)?;
    let x = model.measurement();
    let rho_st = model.steady_state(theta)?;

    let mut v = x.apply_vec(&vectorize(&rho_st));
    for &tau in lags {
        v = propagator(&l, tau)?.apply_vec(&v);
        v = x.apply_vec(&v);
    }
    let eta_power = model.eta().powi((n / 2) as i32);
    Ok(eta_power * trace_of_vec(&v, model.dim()))
}

fn trace_of_vec(v: &nalgebra::DVector<Complex64>, dim: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        acc += v[i * dim + i];
    }
    debug_assert!(
        acc.im.abs() < 1e-9 * acc.re.abs().max(1.0),
        "correlator trace should be real, got {acc}"
    );
    acc.re
}

/// Two-time correlation values on a uniform positive-lag grid.
#[derive(Debug, Clone)]
pub struct TwoTimeCorrelation {
    /// Lag spacing; values[l] corresponds to `tau = (l + 1) * delta_tau`.
    pub delta_tau: f64,
    pub values: Vec<f64>,
    /// Smooth `tau -> 0+` limit, exact for regression-theorem grids. Empirical
    /// grids leave it unset and the spectrum transform extrapolates.
    pub zero_lag: Option<f64>,
    pub mean_subtracted: bool,
}

impl TwoTimeCorrelation {
    pub fn taus(&self) -> Vec<f64> {
        (1..=self.values.len())
            .map(|l| l as f64 * self.delta_tau)
            .collect()
    }

    /// Smooth zero-lag value: stored when known, otherwise quadratic
    /// extrapolation through the first three grid points.
    pub fn zero_lag_value(&self) -> f64 {
        if let Some(f0) = self.zero_lag {
            return f0;
        }
        match self.values.len() {
            0 => 0.0,
            1 => self.values[0],
            2 => 2.0 * self.values[0] - self.values[1],
            _ => 3.0 * self.values[0] - 3.0 * self.values[1] + self.values[2],
        }
    }

    /// Ratio of the last-lag magnitude to the peak magnitude.
    pub fn decay_ratio(&self) -> f64 {
        let peak = self
            .values
            .iter()
            .fold(self.zero_lag_value().abs(), |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        self.values.last().map_or(0.0, |v| v.abs()) / peak
    }
}

/// Power spectrum of the homodyne signal on the canonical DFT grid.
#[derive(Debug, Clone)]
pub struct PowerSpectrum {
    /// Angular frequencies, ascending, symmetric about zero.
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub includes_shot_floor: bool,
}

/// Fourier transform `S(omega) = integral F(tau) e^{-i omega tau} dtau` of the
/// even extension `F(-tau) = F(tau)` (justified by stationarity), evaluated by
/// a discrete Fourier transform on the `2L + 1` point grid.
///
/// With `include_shot_floor`, the constant 1 contributed by the shot-noise
/// delta is added. The frequencies are the DFT frequencies
/// `omega_k = 2 pi k / ((2L + 1) delta_tau)`, for which the inversion identity
/// `sum_k S(omega_k) d_omega / (2 pi) = F(0+)` holds exactly.
pub fn power_spectrum(f1: &TwoTimeCorrelation, include_shot_floor: bool) -> Result<PowerSpectrum> {
    let l = f1.values.len();
    if l == 0 {
        return Err(Error::InvalidInput("empty correlation grid".into()));
    }
    let ratio = f1.decay_ratio();
    if ratio > DECAY_TOL {
        log::warn!(
            "correlation function decayed only to {ratio:.3e} of its peak at the last lag; \
             spectrum may show truncation ripple"
        );
    }

    // even extension, circular layout: [f0, f1..fL, fL..f1]
    let n = 2 * l + 1;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(f1.zero_lag_value(), 0.0);
    for (i, &v) in f1.values.iter().enumerate() {
        buf[i + 1] = Complex64::new(v, 0.0);
        buf[n - 1 - i] = Complex64::new(v, 0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let floor = if include_shot_floor { 1.0 } else { 0.0 };
    let d_omega = 2.0 * std::f64::consts::PI / (n as f64 * f1.delta_tau);
    let half = (n / 2) as i64;
    let mut pairs: Vec<(f64, f64)> = buf
        .iter()
        .enumerate()
        .map(|(k, s)| {
            debug_assert!(s.im.abs() < 1e-9 * s.re.abs().max(1.0));
            let k_signed = if (k as i64) <= half { k as i64 } else { k as i64 - n as i64 };
            (k_signed as f64 * d_omega, f1.delta_tau * s.re + floor)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    Ok(PowerSpectrum {
        omegas: pairs.iter().map(|p| p.0).collect(),
        values: pairs.iter().map(|p| p.1).collect(),
        includes_shot_floor: include_shot_floor,
    })
}
