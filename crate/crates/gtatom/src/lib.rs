//! Simulation and data-analysis toolkit for a multipoint-coupled transmon
//! in an open waveguide.
//!
//! The crate covers the full workflow around such a device:
//!
//! - [`device`]: flux-tunable level structure and the interference-modulated
//!   coupling rates of a transmon tapped into the line at several points.
//! - [`scatter`]: two-level forward model for single-tone spectroscopy.
//! - [`lambda`]: driven three-level lambda system — Lindblad steady states,
//!   input-output probe transmission, pump-probe maps, and the
//!   transparency-regime threshold.
//! - [`fit`]: damped least-squares engine with the lineshape, saturation,
//!   doublet, master-equation, and model-selection pipelines built on it.
//! - [`mwnet`]: distributed-element network model of the device and rate
//!   profiles extracted from swept S-parameters.
//! - [`cli`]: command-line front end over the above.
//!
//! Every frequency, rate, drive strength, and detuning held by a type in
//! this crate is angular (rad/s). File formats and CLI flags use ordinary
//! frequency and carry `_hz` (or `_mhz`, `_ghz`) suffixes.

// validation deliberately writes `!(x > 0.0)` so that NaN inputs fail too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod device;
pub mod error;
pub mod fit;
pub mod lambda;
pub mod lindblad;
pub mod mwnet;
pub mod scatter;
pub mod spectrum;

pub use error::{Error, Result};

/// Conversions between ordinary frequency (Hz) and the crate-internal
/// angular convention (rad/s).
pub mod units {
    use std::f64::consts::TAU;

    pub fn angular_from_hz(f_hz: f64) -> f64 {
        TAU * f_hz
    }

    pub fn angular_from_mhz(f_mhz: f64) -> f64 {
        TAU * 1e6 * f_mhz
    }

    pub fn angular_from_ghz(f_ghz: f64) -> f64 {
        TAU * 1e9 * f_ghz
    }

    pub fn hz_from_angular(omega: f64) -> f64 {
        omega / TAU
    }

    pub fn mhz_from_angular(omega: f64) -> f64 {
        omega / (TAU * 1e6)
    }

    pub fn ghz_from_angular(omega: f64) -> f64 {
        omega / (TAU * 1e9)
    }
}
