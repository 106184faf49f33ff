//! Simulation and analysis of a dual classical/quantum satellite-to-ground
//! laser downlink.
//!
//! The crate is organised bottom-up:
//!
//! - [`atmosphere`]: Hufnagel-Valley turbulence profile, Bufton wind, and the
//!   path-integrated diagnostics (Rytov variance, scintillation index, Fried
//!   parameter, Greenwood frequency, coherence time).
//! - [`screens`]: slab partition of the turbulent path and FFT phase screens
//!   drawn from the modified von Karman spectrum.
//! - [`optics`]: sampled complex fields, Gaussian source, vacuum propagation
//!   kernels, split-step propagation and aperture transmissivity.
//! - [`ensemble`]: Monte Carlo channel realizations, fading statistics and
//!   the ensemble file format.
//! - [`protocol`]: the zero-leakage squeezed-state protocol with a classical
//!   BPSK-like layer read out by direct detection.
//! - [`keyrate`]: mutual information, asymptotic, ideal and composable
//!   finite-size key rates.
//!
//! All quadrature variances are in shot-noise units (vacuum variance = 1).

pub mod atmosphere;
pub mod ensemble;
mod error;
pub mod fft;
pub mod keyrate;
pub mod optics;
pub mod protocol;
pub mod quad;
pub mod rng;
pub mod screens;

pub use error::{Error, Result};

/// Version string embedded in every artifact written by the crate.
pub const TOOL_VERSION: &str = concat!("qlink ", env!("CARGO_PKG_VERSION"));

/// Converts a transmissivity into a loss in dB.
pub fn loss_db(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

/// Converts a loss in dB into a transmissivity.
pub fn eta_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}
