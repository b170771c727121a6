//! Empirical reduced statistics of record ensembles and the deterministic
//! Fisher information of the mean signal, the two-time correlations and the
//! power spectrum.
//!
//! Empirical correlations operate on the record coarse-grained to the lag
//! spacing: the current is averaged over bins of width `delta_tau`,
//! `J_k = (sum of dy over bin k) / delta_tau`, and lag products are formed
//! between bins. This realizes the discretization for which the per-lag
//! covariance is `1 / (T delta_tau)` and makes the variance grow as the lag
//! grid is refined, with the extracted information converging instead.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::qops::{
    mean_signal, power_spectrum, qrt_two_time_grid, SystemModel, TwoTimeCorrelation,
};
use crate::trajectory::MeasurementRecord;

/// Relative decay required of the mean-subtracted correlation function at
/// `tau_max` before the two-time Fisher integral is trusted.
pub const DECAY_TOL: f64 = 1e-6;

/// Empirical two-time correlation estimate with per-lag uncertainty.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    /// Lag spacing; `values[l]` estimates `C((l + 1) * delta_tau)`. Lag zero
    /// is never present (it carries the shot-noise floor).
    pub delta_tau: f64,
    pub values: Vec<f64>,
    /// Standard error of each value across the record ensemble.
    pub stderr: Vec<f64>,
    pub n_records: usize,
    pub mean_subtracted: bool,
}

impl CorrelationEstimate {
    pub fn taus(&self) -> Vec<f64> {
        (1..=self.values.len())
            .map(|l| l as f64 * self.delta_tau)
            .collect()
    }
}

/// Mean plus sample covariance of the statistic vector `(Y, C_1 .. C_L)`.
#[derive(Debug, Clone)]
pub struct GaussianStatVector {
    /// Sample means, `[Y, C_1, .., C_L]` with the correlations mean-subtracted.
    pub components: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub n_records: usize,
    pub delta_tau: f64,
}

/// Time-averaged signal `Y = (sum_i dy_i) / T` with `E[Y] = I` and
/// `var(Y) = 1/T`.
pub fn integrated_signal(record: &MeasurementRecord) -> Result<f64> {
    if record.increments.is_empty() {
        return Err(Error::EmptyRecord);
    }
    Ok(record.increments.iter().sum::<f64>() / record.duration())
}

fn bin_factor(delta_tau: f64, dt: f64) -> Result<usize> {
    let ratio = delta_tau / dt;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-6 {
        return Err(Error::LagNotMultipleOfDt { delta_tau, dt });
    }
    Ok(m as usize)
}

/// Bin-averaged currents and the integrated signal of one record.
fn coarse_currents(record: &MeasurementRecord, m: usize) -> (Vec<f64>, f64) {
    let n_bins = record.increments.len() / m;
    let delta_tau = m as f64 * record.dt;
    let coarse: Vec<f64> = (0..n_bins)
        .map(|k| record.increments[k * m..(k + 1) * m].iter().sum::<f64>() / delta_tau)
        .collect();
    let y = record.increments.iter().sum::<f64>() / record.duration();
    (coarse, y)
}

fn lag_products(coarse: &[f64], n_lags: usize) -> Vec<f64> {
    let n = coarse.len();
    (1..=n_lags)
        .map(|l| {
            let mut acc = 0.0;
            for k in 0..n - l {
                acc += coarse[k] * coarse[k + l];
            }
            acc / (n - l) as f64
        })
        .collect()
}

fn validate_ensemble(records: &[MeasurementRecord]) -> Result<()> {
    let first = records.first().ok_or(Error::EmptyRecord)?;
    for r in records {
        if r.dt != first.dt || r.n_steps() != first.n_steps() {
            return Err(Error::InvalidInput(
                "records in an ensemble must share dt and length".into(),
            ));
        }
        if r.increments.is_empty() {
            return Err(Error::EmptyRecord);
        }
    }
    Ok(())
}

/// Ensemble average of the lagged current products
/// `C_l = mean_k J_k J_{k+l}` over records, with the standard error across
/// records. With `mean_subtract`, each record contributes `C_l - Y^2`,
/// removing the trivial covariance with the integrated signal.
pub fn empirical_correlation(
    records: &[MeasurementRecord],
    delta_tau: f64,
    n_lags: usize,
    mean_subtract: bool,
) -> Result<CorrelationEstimate> {
    validate_ensemble(records)?;
    if records.len() < 2 {
        return Err(Error::TooFewRecords {
            got: records.len(),
            need: 2,
        });
    }
    let m = bin_factor(delta_tau, records[0].dt)?;
    let n_bins = records[0].n_steps() / m;
    if n_lags == 0 || 2 * n_lags * m >= records[0].n_steps() {
        return Err(Error::LagExceedsRecord {
            lag: n_lags,
            max: n_bins / 2,
        });
    }

    let per_record: Vec<Vec<f64>> = map_indexed(records.len(), |i| {
        let (coarse, y) = coarse_currents(&records[i], m);
        let mut c = lag_products(&coarse, n_lags);
        if mean_subtract {
            for v in c.iter_mut() {
                *v -= y * y;
            }
        }
        c
    });

    let n = records.len() as f64;
    let mut mean = vec![0.0; n_lags];
    for row in &per_record {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut stderr = vec![0.0; n_lags];
    for row in &per_record {
        for (s, (v, m)) in stderr.iter_mut().zip(row.iter().zip(mean.iter())) {
            *s += (v - m) * (v - m);
        }
    }
    for s in stderr.iter_mut() {
        *s = (*s / (n - 1.0)).sqrt() / n.sqrt();
    }

    Ok(CorrelationEstimate {
        delta_tau,
        values: mean,
        stderr,
        n_records: records.len(),
        mean_subtracted: mean_subtract,
    })
}

/// Sample covariance of `(Y, C_1 .. C_L)` across records. The correlations are
/// always mean-subtracted (`C_l - Y^2` per record) so that the covariance
/// between `Y` and the lags vanishes to leading order.
pub fn empirical_covariance(
    records: &[MeasurementRecord],
    delta_tau: f64,
    n_lags: usize,
) -> Result<GaussianStatVector> {
    validate_ensemble(records)?;
    if records.len() < 2 {
        return Err(Error::TooFewRecords {
            got: records.len(),
            need: 2,
        });
    }
    if records.len() < 100 {
        log::warn!(
            "covariance estimated from only {} records; expect large sampling noise",
            records.len()
        );
    }
    let m = bin_factor(delta_tau, records[0].dt)?;
    let n_bins = records[0].n_steps() / m;
    if n_lags == 0 || 2 * n_lags * m >= records[0].n_steps() {
        return Err(Error::LagExceedsRecord {
            lag: n_lags,
            max: n_bins / 2,
        });
    }

    let dim = n_lags + 1;
    let rows: Vec<Vec<f64>> = map_indexed(records.len(), |i| {
        let (coarse, y) = coarse_currents(&records[i], m);
        let mut row = Vec::with_capacity(dim);
        row.push(y);
        for c in lag_products(&coarse, n_lags) {
            row.push(c - y * y);
        }
        row
    });

    let n = records.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in &rows {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for row in &rows {
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    Ok(GaussianStatVector {
        components: mean,
        covariance: cov,
        n_records: records.len(),
        delta_tau,
    })
}

/// Fisher information per unit time carried by the integrated signal,
/// `I1 / T = (dI/dtheta)^2`, by central finite difference.
pub fn fisher_mean_signal(model: &SystemModel, theta: f64, dtheta: f64) -> Result<f64> {
    let plus = mean_signal(model, theta + dtheta)?;
    let minus = mean_signal(model, theta - dtheta)?;
    let slope = (plus - minus) / (2.0 * dtheta);
    Ok(slope * slope)
}

fn two_time_derivative_grid(
    model: &SystemModel,
    theta: f64,
    dtheta: f64,
    delta_tau: f64,
    tau_max: f64,
) -> Result<(TwoTimeCorrelation, Vec<f64>)> {
    if delta_tau <= 0.0 || tau_max <= delta_tau {
        return Err(Error::InvalidInput(format!(
            "need 0 < delta_tau < tau_max, got {delta_tau}, {tau_max}"
        )));
    }
    let n_lags = (tau_max / delta_tau).floor() as usize;
    let base = qrt_two_time_grid(model, theta, delta_tau, n_lags, true)?;
    let ratio = base.decay_ratio();
    if ratio > DECAY_TOL {
        return Err(Error::InsufficientDecay {
            ratio,
            tolerance: DECAY_TOL,
        });
    }
    let plus = qrt_two_time_grid(model, theta + dtheta, delta_tau, n_lags, true)?;
    let minus = qrt_two_time_grid(model, theta - dtheta, delta_tau, n_lags, true)?;
    let deriv: Vec<f64> = plus
        .values
        .iter()
        .zip(minus.values.iter())
        .map(|(p, m)| (p - m) / (2.0 * dtheta))
        .collect();
    Ok((base, deriv))
}

/// Fisher information per unit time carried by the two-time correlations,
///
/// ```text
/// I2 / T = integral_{delta_tau}^{tau_max} (dF/dtheta)^2 dtau
/// ```
///
/// with the mean-subtracted correlation function, a central difference in
/// theta and the trapezoid rule in tau. Fails when the correlation function
/// has not decayed at `tau_max`.
pub fn fisher_two_time(
    model: &SystemModel,
    theta: f64,
    dtheta: f64,
    delta_tau: f64,
    tau_max: f64,
) -> Result<f64> {
    let (_, deriv) = two_time_derivative_grid(model, theta, dtheta, delta_tau, tau_max)?;
    Ok(trapezoid_of_squares(&deriv, delta_tau))
}

fn trapezoid_of_squares(values: &[f64], spacing: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (values[0] * values[0] + values[values.len() - 1].powi(2));
    for v in &values[1..values.len() - 1] {
        acc += v * v;
    }
    acc * spacing
}

/// Fisher information per unit time extracted from the power spectrum,
///
/// ```text
/// I2 / T = (1 / 4 pi) integral (dS/dtheta)^2 domega
/// ```
///
/// The factor `1/(4 pi)` pairs the two-sided transform of the even-extended
/// correlation function with the single-sided lag integral of
/// [`fisher_two_time`]: Plancherel gives
/// `integral (dS)^2 domega = 2 pi integral_{-inf}^{inf} (dF)^2 dtau
///  = 4 pi integral_0^{inf} (dF)^2 dtau`, so the two routes agree by
/// construction. The frequency grid is the DFT grid induced by
/// `(delta_tau, tau_max)`.
pub fn fisher_spectral(
    model: &SystemModel,
    theta: f64,
    dtheta: f64,
    delta_tau: f64,
    tau_max: f64,
) -> Result<f64> {
    if delta_tau <= 0.0 || tau_max <= delta_tau {
        return Err(Error::InvalidInput(format!(
            "need 0 < delta_tau < tau_max, got {delta_tau}, {tau_max}"
        )));
    }
    let n_lags = (tau_max / delta_tau).floor() as usize;
    let plus = power_spectrum(
        &qrt_two_time_grid(model, theta + dtheta, delta_tau, n_lags, true)?,
        false,
    )?;
    let minus = power_spectrum(
        &qrt_two_time_grid(model, theta - dtheta, delta_tau, n_lags, true)?,
        false,
    )?;
    let deriv: Vec<f64> = plus
        .values
        .iter()
        .zip(minus.values.iter())
        .map(|(p, m)| (p - m) / (2.0 * dtheta))
        .collect();

    let max_sq = deriv.iter().fold(0.0f64, |m, v| m.max(v * v));
    if max_sq > 1e-20 {
        let tail = deriv[0].powi(2).max(deriv[deriv.len() - 1].powi(2));
        if tail > 1e-6 * max_sq {
            return Err(Error::TruncatedSupport(tail / max_sq));
        }
    }

    let d_omega = plus.omegas[1] - plus.omegas[0];
    let sum: f64 = deriv.iter().map(|v| v * v).sum();
    Ok(sum * d_omega / (4.0 * std::f64::consts::PI))
}
