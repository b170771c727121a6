//! Continuous homodyne detection of small open quantum systems: trajectory
//! simulation, Bayesian parameter estimation and Fisher-information analysis
//! of the measurement record and its reduced statistics.
//!
//! The crate is organized around the flow of an estimation experiment:
//!
//! - [`qops`]: dense operator/superoperator algebra, Liouvillians, steady
//!   states, regression-theorem correlation functions and power spectra;
//! - [`trajectory`]: stochastic integration of the conditioned master
//!   equation and reproducible record ensembles;
//! - [`inference`]: gridded Bayesian posteriors from the linear filter and
//!   Monte-Carlo estimates of the full-record Fisher information;
//! - [`correlations`]: empirical reduced statistics and the deterministic
//!   Fisher contributions of the mean signal, two-time correlations and the
//!   spectrum;
//! - [`twolevel`]: closed-form oracles for the resonantly driven qubit;
//! - [`record_io`]: record file formats (CSV and binary).
//!
//! Ensemble loops are data-parallel over trajectories and records (rayon,
//! `parallel` feature, on by default) with bit-identical results at any
//! worker count; disabling the feature falls back to sequential execution.

pub mod correlations;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod parallel;
pub mod qops;
pub mod record_io;
pub mod trajectory;
pub mod twolevel;

pub use error::{Error, Result};
