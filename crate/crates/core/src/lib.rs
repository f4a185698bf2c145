//! Compressive wideband spectrum sensing for cognitive radio.
//!
//! The pipeline runs from a ground-truth band occupancy down to per-subband
//! detection statistics:
//!
//! 1. [`model`] lays out the monitored band and synthesizes Nyquist-rate
//!    complex baseband frames with a known block-flat PSD.
//! 2. [`sampling`] keeps `M` of every `N` samples (random row subsampling).
//! 3. [`correlate`] estimates compressive autocorrelation vectors and builds
//!    the linear map from the PSD to them (`D = A Ψ`, plus the stacked
//!    multi-period operator).
//! 4. [`tvops`] builds the joint time/frequency difference operator.
//! 5. [`solve`] recovers the PSD with an ℓ1-ball constrained solver, either
//!    plain LASSO or total-variation minimization over several periods.
//! 6. [`detect`] turns recovered spectra into occupancy decisions and
//!    false-alarm / detection ratios.
//!
//! [`experiment`] wires everything into single runs and seeded Monte Carlo
//! sweeps; [`selftest`] bundles the structural property checks.

pub mod correlate;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod seed;
pub mod selftest;
pub mod solve;
pub mod tvops;

pub use error::{Error, Result};
pub use num_complex::Complex64;
