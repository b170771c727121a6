//! Bayesian inference on homodyne records and Monte-Carlo estimation of the
//! full-record Fisher information.
//!
//! Likelihoods come from the linear un-normalized filter
//!
//! ```text
//! d rho_bar = L rho_bar dt + sqrt(eta) dy X_phi rho_bar,    P(D | theta) ~ Tr rho_bar
//! ```
//!
//! propagated in the log domain with periodic trace renormalization (the raw
//! trace under- or overflows exponentially in T). The Fisher information of
//! the full record is sampled by co-integrating the conditioned state with
//! the score matrix `zeta = (d rho_bar / d theta) / Tr rho_bar`, whose trace
//! is the Fisher score; averaging `(Tr zeta)^2` over trajectories estimates
//! `I(theta)`.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{vectorize, CMatrix, CVector};
use crate::parallel::map_indexed;
use crate::qops::{mean_signal, qrt_two_time_grid, SystemModel};
use crate::trajectory::{repair_density_vec, MeasurementRecord, RepairStats, RngSpec};
use crate::correlations::CorrelationEstimate;

/// Candidate parameter values with prior log-weights.
#[derive(Debug, Clone)]
pub struct ParameterGrid {
    values: Vec<f64>,
    log_prior: Vec<f64>,
}

impl ParameterGrid {
    /// Uniformly spaced grid with a flat prior.
    pub fn uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(max > min) {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 increasing points, got [{min}, {max}] with {n}"
            )));
        }
        let step = (max - min) / (n - 1) as f64;
        let values = (0..n).map(|i| min + step * i as f64).collect();
        Ok(ParameterGrid {
            values,
            log_prior: vec![0.0; n],
        })
    }

    pub fn with_log_prior(values: Vec<f64>, log_prior: Vec<f64>) -> Result<Self> {
        if values.len() != log_prior.len() {
            return Err(Error::InvalidInput(
                "prior length does not match grid length".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "grid values must be strictly increasing".into(),
            ));
        }
        if log_sum_exp(&log_prior) == f64::NEG_INFINITY {
            return Err(Error::EmptyPosteriorSupport);
        }
        Ok(ParameterGrid { values, log_prior })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Prior log-weights normalized so the exponentials sum to one.
    pub fn normalized_log_prior(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.log_prior);
        self.log_prior.iter().map(|l| l - lse).collect()
    }
}

/// Time evolution of the gridded posterior: normalized log-probabilities per
/// checkpoint, with the maximum-a-posteriori and full-width-at-half-maximum
/// tracks.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorTrace {
    pub grid: Vec<f64>,
    pub checkpoint_times: Vec<f64>,
    /// `log_posterior[c][j]`: normalized log-probability of grid point `j`
    /// at checkpoint `c`.
    pub log_posterior: Vec<Vec<f64>>,
    pub map_path: Vec<f64>,
    pub fwhm_path: Vec<f64>,
}

impl PosteriorTrace {
    /// Probabilities at one checkpoint (they sum to one).
    pub fn posterior_at(&self, checkpoint: usize) -> Vec<f64> {
        self.log_posterior[checkpoint]
            .iter()
            .map(|l| l.exp())
            .collect()
    }

    /// Posterior mean at one checkpoint.
    pub fn mean_at(&self, checkpoint: usize) -> f64 {
        let p = self.posterior_at(checkpoint);
        p.iter().zip(self.grid.iter()).map(|(p, x)| p * x).sum()
    }

    /// Posterior standard deviation at one checkpoint.
    pub fn std_at(&self, checkpoint: usize) -> f64 {
        let p = self.posterior_at(checkpoint);
        let mean = self.mean_at(checkpoint);
        p.iter()
            .zip(self.grid.iter())
            .map(|(p, x)| p * (x - mean) * (x - mean))
            .sum::<f64>()
            .sqrt()
    }
}

/// Monte-Carlo Fisher information estimates at the requested checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct FisherReport {
    pub checkpoint_times: Vec<f64>,
    /// `E[(Tr zeta)^2]` at each checkpoint.
    pub estimates: Vec<f64>,
    /// Standard error of each estimate over the trajectory ensemble.
    pub stderrs: Vec<f64>,
    /// Mean Fisher score at each checkpoint; vanishes at the true parameter.
    pub score_means: Vec<f64>,
    pub score_stderrs: Vec<f64>,
    pub n_traj: usize,
    pub t_total: f64,
    pub dt: f64,
    /// `4T/gamma` for the resonant qubit preset.
    pub qfi_reference: Option<f64>,
}

/// Initialization of the score matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScoreInit {
    /// `zeta(0) = d rho_st / d theta`, matching a theta-dependent stationary
    /// initial state. Affects only an O(1) transient, not the growth rate.
    #[default]
    SteadyStateDerivative,
    /// `zeta(0) = 0` for a theta-independent initial state.
    Zero,
}

#[derive(Debug, Clone)]
pub struct FisherOptions {
    pub checkpoints: Vec<f64>,
    pub score_init: ScoreInit,
    /// Step for every finite difference involved (score init, Liouvillian
    /// derivative fallback).
    pub dtheta: f64,
}

impl FisherOptions {
    pub fn at_final_time(t_total: f64) -> Self {
        FisherOptions {
            checkpoints: vec![t_total],
            score_init: ScoreInit::default(),
            dtheta: 1e-4,
        }
    }
}

/// Log-likelihood of a record under `theta`, up to a theta-independent
/// constant: `log Tr rho_bar(T)` from the linear filter, renormalized every
/// step. The filter starts from the steady state at `theta`.
pub fn loglik(record: &MeasurementRecord, model: &SystemModel, theta: f64) -> Result<f64> {
    loglik_with_renorm_period(record, model, theta, 1)
}

/// Same as [`loglik`] with the trace renormalization applied every `period`
/// steps; log-likelihood differences are invariant under the schedule.
pub fn loglik_with_renorm_period(
    record: &MeasurementRecord,
    model: &SystemModel,
    theta: f64,
    period: usize,
) -> Result<f64> {
    if record.increments.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let period = period.max(1);
    let dim = model.dim();
    let rho0 = model.steady_state(theta)?;
    let kernel = model.kernel(theta)?;
    let dt = record.dt;

    // one-step linear map without the noise part: A = I + dt L
    let mut a_mat = kernel.l_mat.clone() * Complex64::new(dt, 0.0);
    for i in 0..dim * dim {
        a_mat[(i, i)] += Complex64::new(1.0, 0.0);
    }

    let mut v = vectorize(&rho0);
    let mut av = CVector::zeros(dim * dim);
    let mut xv = CVector::zeros(dim * dim);
    let c_one = Complex64::new(1.0, 0.0);
    let c_zero = Complex64::new(0.0, 0.0);
    let mut ll = 0.0;
    let mut since_renorm = 0;
    for (step, &dy) in record.increments.iter().enumerate() {
        av.gemv(c_one, &a_mat, &v, c_zero);
        xv.gemv(c_one, &kernel.x_mat, &v, c_zero);
        let k = Complex64::new(kernel.sqrt_eta * dy, 0.0);
        for i in 0..dim * dim {
            v[i] = av[i] + k * xv[i];
        }
        since_renorm += 1;
        if since_renorm == period {
            since_renorm = 0;
            let tr = trace_re(&v, dim);
            if !(tr > 0.0) || !tr.is_finite() {
                return Err(Error::NonFiniteState { step });
            }
            ll += tr.ln();
            let inv = Complex64::new(1.0 / tr, 0.0);
            for i in 0..dim * dim {
                v[i] *= inv;
            }
        }
    }
    if since_renorm > 0 {
        let tr = trace_re(&v, dim);
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::NonFiniteState {
                step: record.n_steps(),
            });
        }
        ll += tr.ln();
    }
    Ok(ll)
}

#[inline]
fn trace_re(v: &CVector, dim: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        acc += v[i * dim + i].re;
    }
    acc
}

/// Propagate the whole candidate grid through one record in lockstep and
/// snapshot the posterior at the requested checkpoints.
pub fn bayes_posterior(
    record: &MeasurementRecord,
    model: &SystemModel,
    grid: &ParameterGrid,
    checkpoints: &[f64],
) -> Result<PosteriorTrace> {
    if record.increments.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let duration = record.duration();
    let dt = record.dt;
    let mut checkpoint_steps = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        if !(0.0..=duration * (1.0 + 1e-9)).contains(&t) {
            return Err(Error::CheckpointOutOfRange {
                checkpoint: t,
                duration,
            });
        }
        checkpoint_steps.push((t / dt).round() as usize);
    }

    let dim = model.dim();
    let d2 = dim * dim;
    let n_grid = grid.len();
    let log_prior = grid.normalized_log_prior();

    // per-candidate one-step drift maps and initial filter states
    let x_mat = model.measurement().matrix().clone();
    let sqrt_eta = model.eta().sqrt();
    let mut a_mats = Vec::with_capacity(n_grid);
    let mut states = Vec::with_capacity(n_grid);
    for &theta in grid.values() {
        let kernel = model.kernel(theta)?;
        let mut a = kernel.l_mat * Complex64::new(dt, 0.0);
        for i in 0..d2 {
            a[(i, i)] += Complex64::new(1.0, 0.0);
        }
        a_mats.push(a);
        states.push(vectorize(&model.steady_state(theta)?));
    }
    let mut ll = vec![0.0f64; n_grid];

    let mut trace = PosteriorTrace {
        grid: grid.values().to_vec(),
        checkpoint_times: checkpoints.to_vec(),
        log_posterior: vec![Vec::new(); checkpoints.len()],
        map_path: vec![0.0; checkpoints.len()],
        fwhm_path: vec![0.0; checkpoints.len()],
    };
    let snapshot = |trace: &mut PosteriorTrace, c: usize, ll: &[f64]| -> Result<()> {
        let weights: Vec<f64> = ll
            .iter()
            .zip(log_prior.iter())
            .map(|(l, p)| l + p)
            .collect();
        let lse = log_sum_exp(&weights);
        if lse == f64::NEG_INFINITY || !lse.is_finite() {
            return Err(Error::EmptyPosteriorSupport);
        }
        let row: Vec<f64> = weights.iter().map(|w| w - lse).collect();
        let (map, fwhm) = map_and_fwhm(grid.values(), &row);
        trace.log_posterior[c] = row;
        trace.map_path[c] = map;
        trace.fwhm_path[c] = fwhm;
        Ok(())
    };

    for (c, &step) in checkpoint_steps.iter().enumerate() {
        if step == 0 {
            snapshot(&mut trace, c, &ll)?;
        }
    }

    let c_one = Complex64::new(1.0, 0.0);
    let c_zero = Complex64::new(0.0, 0.0);
    let mut av = CVector::zeros(d2);
    let mut xv = CVector::zeros(d2);
    for (step, &dy) in record.increments.iter().enumerate() {
        let k = Complex64::new(sqrt_eta * dy, 0.0);
        for (j, v) in states.iter_mut().enumerate() {
            av.gemv(c_one, &a_mats[j], v, c_zero);
            xv.gemv(c_one, &x_mat, v, c_zero);
            let mut tr = 0.0;
            for i in 0..d2 {
                v[i] = av[i] + k * xv[i];
            }
            for i in 0..dim {
                tr += v[i * dim + i].re;
            }
            if !(tr > 0.0) || !tr.is_finite() {
                return Err(Error::NonFiniteState { step });
            }
            ll[j] += tr.ln();
            let inv = Complex64::new(1.0 / tr, 0.0);
            for i in 0..d2 {
                v[i] *= inv;
            }
        }
        for (c, &cp_step) in checkpoint_steps.iter().enumerate() {
            if cp_step == step + 1 {
                snapshot(&mut trace, c, &ll)?;
            }
        }
    }
    Ok(trace)
}

/// MAP (grid argmax) and FWHM (linear interpolation of the half-maximum
/// crossings; clamped to the grid edge when the posterior does not fall below
/// half maximum inside the grid).
fn map_and_fwhm(grid: &[f64], log_post: &[f64]) -> (f64, f64) {
    let (k_max, &l_max) = log_post
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let p: Vec<f64> = log_post.iter().map(|l| (l - l_max).exp()).collect();
    let half = 0.5;

    let mut left = grid[0];
    for j in (0..k_max).rev() {
        if p[j] < half {
            let frac = (half - p[j]) / (p[j + 1] - p[j]);
            left = grid[j] + frac * (grid[j + 1] - grid[j]);
            break;
        }
    }
    let mut right = grid[grid.len() - 1];
    for j in k_max + 1..grid.len() {
        if p[j] < half {
            let frac = (half - p[j - 1]) / (p[j] - p[j - 1]);
            right = grid[j - 1] + frac * (grid[j] - grid[j - 1]);
            break;
        }
    }
    (grid[k_max], right - left)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Monte-Carlo estimate of the full-record Fisher information `I(theta; t)`
/// at the given checkpoints.
///
/// Each trajectory co-integrates the conditioned state and the score matrix
/// with a shared Wiener increment per step:
///
/// ```text
/// d rho  = L rho dt + sqrt(eta) dW (X - Tr[X rho]) rho
/// d zeta = (L zeta + dL/dtheta rho) dt
///        + sqrt(eta) dW (X zeta + dX/dtheta rho - Tr[X rho] zeta)
/// ```
///
/// The measurement map of the supported models is theta-independent, so the
/// `dX/dtheta` term vanishes; it is retained in the update for models that
/// provide a derivative of the measurement channel.
pub fn fisher_mc(
    model: &SystemModel,
    theta: f64,
    t_total: f64,
    dt: f64,
    n_traj: usize,
    base_seed: u64,
    opts: &FisherOptions,
) -> Result<FisherReport> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be at least 1".into()));
    }
    if dt <= 0.0 || t_total < dt {
        return Err(Error::InvalidInput(format!(
            "need 0 < dt <= t_total, got dt = {dt}, t_total = {t_total}"
        )));
    }
    let mut checkpoint_steps = Vec::with_capacity(opts.checkpoints.len());
    for &t in &opts.checkpoints {
        if !(0.0..=t_total * (1.0 + 1e-9)).contains(&t) {
            return Err(Error::CheckpointOutOfRange {
                checkpoint: t,
                duration: t_total,
            });
        }
        checkpoint_steps.push((t / dt).round() as usize);
    }

    let dim = model.dim();
    let rho0 = model.steady_state(theta)?;
    let zeta0 = match opts.score_init {
        ScoreInit::SteadyStateDerivative => model.steady_state_deriv(theta, opts.dtheta)?,
        ScoreInit::Zero => CMatrix::zeros(dim, dim),
    };
    let kernel = model.kernel(theta)?;
    let dl_mat = model.liouvillian_deriv(theta, opts.dtheta)?.matrix().clone();
    let n_steps = (t_total / dt).round() as usize;

    let v0 = vectorize(&rho0);
    let z0 = vectorize(&zeta0);

    // per trajectory: Fisher score at each checkpoint
    let scores: Vec<Result<Vec<f64>>> = map_indexed(n_traj, |i| {
        let mut rng = RngSpec::new(base_seed, i as u64).rng();
        let sqrt_dt = dt.sqrt();
        let d2 = dim * dim;
        let mut v = v0.clone();
        let mut z = z0.clone();
        let mut lv = CVector::zeros(d2);
        let mut xv = CVector::zeros(d2);
        let mut lz = CVector::zeros(d2);
        let mut dlv = CVector::zeros(d2);
        let mut xz = CVector::zeros(d2);
        let mut next = CVector::zeros(d2);
        let mut stats = RepairStats::default();
        let mut out = Vec::with_capacity(checkpoint_steps.len());
        let c_one = Complex64::new(1.0, 0.0);
        let c_zero = Complex64::new(0.0, 0.0);
        let dt_c = Complex64::new(dt, 0.0);

        for &cp in checkpoint_steps.iter().filter(|&&cp| cp == 0) {
            let _ = cp;
            out.push(trace_re(&z, dim));
        }
        for step in 0..n_steps {
            let s = kernel.trace_x(&v);
            let dw: f64 =
                sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            let k = Complex64::new(kernel.sqrt_eta * dw, 0.0);
            let s_c = Complex64::new(s, 0.0);

            // score matrix first: both updates read the pre-update state
            lz.gemv(c_one, &kernel.l_mat, &z, c_zero);
            dlv.gemv(c_one, &dl_mat, &v, c_zero);
            xz.gemv(c_one, &kernel.x_mat, &z, c_zero);
            for i in 0..d2 {
                next[i] = z[i] + (lz[i] + dlv[i]) * dt_c + (xz[i] - s_c * z[i]) * k;
            }
            std::mem::swap(&mut z, &mut next);
            hermitize_vec(&mut z, dim);

            lv.gemv(c_one, &kernel.l_mat, &v, c_zero);
            xv.gemv(c_one, &kernel.x_mat, &v, c_zero);
            for i in 0..d2 {
                next[i] = v[i] + lv[i] * dt_c + (xv[i] - s_c * v[i]) * k;
            }
            std::mem::swap(&mut v, &mut next);
            repair_density_vec(&mut v, dim, &mut stats)
                .map_err(|_| Error::NonFiniteState { step })?;

            let score = trace_re(&z, dim);
            if !score.is_finite() {
                return Err(Error::NonFiniteState { step });
            }
            for &cp in checkpoint_steps.iter().filter(|&&cp| cp == step + 1) {
                let _ = cp;
                out.push(score);
            }
        }
        Ok(out)
    });
    let scores: Vec<Vec<f64>> = scores.into_iter().collect::<Result<_>>()?;

    let n_cp = checkpoint_steps.len();
    let n = n_traj as f64;
    let mut estimates = vec![0.0; n_cp];
    let mut stderrs = vec![0.0; n_cp];
    let mut score_means = vec![0.0; n_cp];
    let mut score_stderrs = vec![0.0; n_cp];
    for c in 0..n_cp {
        let squared: Vec<f64> = scores.iter().map(|s| s[c] * s[c]).collect();
        let mean_sq = squared.iter().sum::<f64>() / n;
        estimates[c] = mean_sq;
        let mean_score = scores.iter().map(|s| s[c]).sum::<f64>() / n;
        score_means[c] = mean_score;
        if n_traj > 1 {
            let var_sq = squared
                .iter()
                .map(|x| (x - mean_sq) * (x - mean_sq))
                .sum::<f64>()
                / (n - 1.0);
            stderrs[c] = (var_sq / n).sqrt();
            let var_score = scores
                .iter()
                .map(|s| (s[c] - mean_score) * (s[c] - mean_score))
                .sum::<f64>()
                / (n - 1.0);
            score_stderrs[c] = (var_score / n).sqrt();
        }
    }

    Ok(FisherReport {
        checkpoint_times: opts.checkpoints.clone(),
        estimates,
        stderrs,
        score_means,
        score_stderrs,
        n_traj,
        t_total,
        dt,
        qfi_reference: model.qfi_reference(t_total),
    })
}

fn hermitize_vec(v: &mut CVector, dim: usize) {
    if dim == 2 {
        let b = Complex64::new(0.5 * (v[2].re + v[1].re), 0.5 * (v[2].im - v[1].im));
        v[0] = Complex64::new(v[0].re, 0.0);
        v[3] = Complex64::new(v[3].re, 0.0);
        v[2] = b;
        v[1] = b.conj();
        return;
    }
    for r in 0..dim {
        for c in r..dim {
            let upper = v[c * dim + r];
            let lower = v[r * dim + c];
            let sym = (upper + lower.conj()) * Complex64::new(0.5, 0.0);
            v[c * dim + r] = sym;
            v[r * dim + c] = sym.conj();
        }
    }
}

/// Asymptotic minimum-variance estimate from the reduced statistics
/// `(Y, C(tau))` around an expansion point `theta0`:
///
/// ```text
/// theta_hat = theta0 + [ dI (Y - I) + integral dF (C - F) dtau ] / (i1 + i2)
/// ```
///
/// with `i1 = (dI/dtheta)^2`, `i2 = integral (dF/dtheta)^2 dtau` (per unit
/// time), derivatives by central difference and the tau integrals by the
/// trapezoid rule on the lag grid of `c`.
pub fn linear_filter_estimate(
    y: f64,
    c: &CorrelationEstimate,
    theta0: f64,
    model: &SystemModel,
    dtheta: f64,
) -> Result<f64> {
    let n_lags = c.values.len();
    if n_lags < 2 {
        return Err(Error::InvalidInput(
            "correlation estimate needs at least two lags".into(),
        ));
    }
    let f0 = qrt_two_time_grid(model, theta0, c.delta_tau, n_lags, c.mean_subtracted)?;
    let fp = qrt_two_time_grid(model, theta0 + dtheta, c.delta_tau, n_lags, c.mean_subtracted)?;
    let fm = qrt_two_time_grid(model, theta0 - dtheta, c.delta_tau, n_lags, c.mean_subtracted)?;
    let i_mean = mean_signal(model, theta0)?;
    let di = (mean_signal(model, theta0 + dtheta)? - mean_signal(model, theta0 - dtheta)?)
        / (2.0 * dtheta);

    let mut i2 = 0.0;
    let mut innovation = 0.0;
    for l in 0..n_lags {
        let df = (fp.values[l] - fm.values[l]) / (2.0 * dtheta);
        let weight = if l == 0 || l == n_lags - 1 { 0.5 } else { 1.0 } * c.delta_tau;
        i2 += weight * df * df;
        innovation += weight * df * (c.values[l] - f0.values[l]);
    }
    let i1 = di * di;
    let denom = i1 + i2;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::ZeroFisherDenominator);
    }
    Ok(theta0 + (di * (y - i_mean) + innovation) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{simulate_ensemble, simulate_homodyne, RngSpec, TrajectoryOptions};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn qubit(phi: f64, eta: f64) -> SystemModel {
        SystemModel::qubit(0.0, 1.0, phi, eta).unwrap()
    }

    fn one_record(model: &SystemModel, theta: f64, t: f64, seed: u64) -> MeasurementRecord {
        simulate_homodyne(
            model,
            theta,
            t,
            1e-3,
            RngSpec::new(seed, 0),
            &TrajectoryOptions::default(),
        )
        .unwrap()
        .record
    }

    #[test]
    fn eta_zero_likelihood_carries_no_information() {
        let model = qubit(FRAC_PI_2, 0.0);
        let record = one_record(&model, 2.0, 5.0, 42);
        let l1 = loglik(&record, &model, 0.5).unwrap();
        let l2 = loglik(&record, &model, 2.0).unwrap();
        let l3 = loglik(&record, &model, 3.5).unwrap();
        assert!((l1 - l2).abs() < 1e-9, "{l1} vs {l2}");
        assert!((l2 - l3).abs() < 1e-9);
    }

    #[test]
    fn renormalization_schedule_leaves_differences_invariant() {
        let model = qubit(FRAC_PI_2, 1.0);
        let record = one_record(&model, 2.0, 3.0, 7);
        let d_every_step = loglik_with_renorm_period(&record, &model, 1.5, 1).unwrap()
            - loglik_with_renorm_period(&record, &model, 2.5, 1).unwrap();
        let d_every_ten = loglik_with_renorm_period(&record, &model, 1.5, 10).unwrap()
            - loglik_with_renorm_period(&record, &model, 2.5, 10).unwrap();
        assert!(
            (d_every_step - d_every_ten).abs() < 1e-8,
            "{d_every_step} vs {d_every_ten}"
        );
    }

    #[test]
    fn flat_prior_checkpoint_zero_returns_prior() {
        let model = qubit(FRAC_PI_2, 1.0);
        let record = one_record(&model, 2.0, 1.0, 3);
        let grid = ParameterGrid::uniform(0.0, 4.0, 21).unwrap();
        let trace = bayes_posterior(&record, &model, &grid, &[0.0, 1.0]).unwrap();
        let p0 = trace.posterior_at(0);
        for p in &p0 {
            assert_relative_eq!(*p, 1.0 / 21.0, epsilon = 1e-12);
        }
        // posterior at each checkpoint is normalized
        for c in 0..2 {
            let total: f64 = trace.posterior_at(c).iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_concentrates_near_truth() {
        let model = qubit(FRAC_PI_2, 1.0);
        let record = one_record(&model, 2.0, 30.0, 11);
        let grid = ParameterGrid::uniform(0.0, 4.0, 101).unwrap();
        let trace = bayes_posterior(&record, &model, &grid, &[30.0]).unwrap();
        let map = trace.map_path[0];
        let std = trace.std_at(0);
        assert!(
            (map - 2.0).abs() < 4.0 * std.max(0.04),
            "MAP {map}, posterior std {std}"
        );
    }

    #[test]
    fn checkpoints_outside_record_are_rejected() {
        let model = qubit(0.0, 1.0);
        let record = one_record(&model, 1.0, 1.0, 1);
        let grid = ParameterGrid::uniform(0.0, 2.0, 5).unwrap();
        assert!(matches!(
            bayes_posterior(&record, &model, &grid, &[2.0]),
            Err(Error::CheckpointOutOfRange { .. })
        ));
    }

    #[test]
    fn fwhm_interpolates_between_grid_points() {
        // synthetic Gaussian posterior: FWHM = 2 sqrt(2 ln 2) sigma
        let grid: Vec<f64> = (0..201).map(|i| i as f64 * 0.02).collect();
        let sigma = 0.3;
        let log_post: Vec<f64> = grid
            .iter()
            .map(|x| -0.5 * ((x - 2.0) / sigma).powi(2))
            .collect();
        let (map, fwhm) = map_and_fwhm(&grid, &log_post);
        assert_relative_eq!(map, 2.0, epsilon = 1e-12);
        let expected = 2.0 * (2.0 * (2.0_f64).ln()).sqrt() * sigma;
        assert_relative_eq!(fwhm, expected, max_relative = 1e-3);
    }

    #[test]
    fn score_trace_vanishes_without_detection() {
        let model = qubit(FRAC_PI_2, 0.0);
        let opts = FisherOptions {
            checkpoints: vec![2.0],
            score_init: ScoreInit::Zero,
            dtheta: 1e-4,
        };
        let report = fisher_mc(&model, 1.0, 2.0, 1e-3, 10, 5, &opts).unwrap();
        assert!(report.estimates[0].abs() < 1e-20);

        let opts_deriv = FisherOptions {
            score_init: ScoreInit::SteadyStateDerivative,
            ..opts
        };
        let report = fisher_mc(&model, 1.0, 2.0, 1e-3, 10, 5, &opts_deriv).unwrap();
        assert!(report.estimates[0].abs() < 1e-16, "{}", report.estimates[0]);
    }

    #[test]
    fn fisher_report_carries_qfi_reference() {
        let model = qubit(FRAC_PI_2, 1.0);
        let opts = FisherOptions::at_final_time(2.0);
        let report = fisher_mc(&model, 1.0, 2.0, 1e-3, 5, 1, &opts).unwrap();
        assert_relative_eq!(report.qfi_reference.unwrap(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_filter_returns_theta0_on_zero_innovation() {
        let model = qubit(FRAC_PI_2, 1.0);
        let theta0 = 2.0;
        let grid = qrt_two_time_grid(&model, theta0, 0.05, 160, true).unwrap();
        let c = CorrelationEstimate {
            delta_tau: 0.05,
            values: grid.values.clone(),
            stderr: vec![1.0; grid.values.len()],
            n_records: 1,
            mean_subtracted: true,
        };
        let y = mean_signal(&model, theta0).unwrap();
        let est = linear_filter_estimate(y, &c, theta0, &model, 1e-4).unwrap();
        assert_eq!(est, theta0);
    }

    #[test]
    fn linear_filter_rejects_zero_denominator() {
        // Omega = 0 at phi = 0: no information in mean or correlations
        let model = qubit(0.0, 1.0);
        let c = CorrelationEstimate {
            delta_tau: 0.05,
            values: vec![0.0; 40],
            stderr: vec![1.0; 40],
            n_records: 1,
            mean_subtracted: true,
        };
        let err = linear_filter_estimate(0.0, &c, 0.0, &model, 1e-6).unwrap_err();
        assert!(matches!(err, Error::ZeroFisherDenominator));
    }

    #[test]
    fn likelihood_prefers_truth_over_ensemble() {
        // expected log-likelihood is maximized at the true parameter
        let model = qubit(FRAC_PI_2, 1.0);
        let theta_true = 2.0;
        let records = simulate_ensemble(&model, theta_true, 10.0, 1e-3, 40, 99).unwrap();
        let candidates = [1.0, 1.5, 2.0, 2.5, 3.0];
        let mut means = Vec::new();
        for &th in &candidates {
            let mean: f64 = records
                .iter()
                .map(|r| loglik(r, &model, th).unwrap())
                .sum::<f64>()
                / records.len() as f64;
            means.push(mean);
        }
        let best = candidates[means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0];
        assert_eq!(best, theta_true, "log-likelihoods {means:?}");
    }
}
