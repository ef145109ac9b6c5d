//! Multicell downlink simulation with vertically steerable BS antennas.
//!
//! The crate covers the whole evaluation pipeline for a three-cell cluster:
//!
//! - [`geometry`]: rhombic cluster layout, user placement, spherical angles,
//!   vertical-region membership.
//! - [`antenna`]: 3D directional pattern with adjustable tilt.
//! - [`channel`]: path gain, Rayleigh fading, MMSE estimate/error split,
//!   network-MIMO channel assembly.
//! - [`precoding`]: zero-forcing beamformers and power allocation.
//! - [`analytic`]: Gamma-approximation conditional ergodic rates.
//! - [`montecarlo`]: SINR sampling, the ground truth for [`analytic`].
//! - [`tilt`]: throughput-vs-tilt analysis and region parameter search.
//! - [`scheduler`]: drop-based proportional-fair system simulation.
//! - [`config`] and [`experiments`]: the run configuration and the
//!   experiment drivers used by the `multicell3d` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod antenna;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod precoding;
pub mod quadrature;
pub mod rng;
pub mod scheduler;
pub mod tilt;

pub use error::{Error, Result};

/// Downlink transmission mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransmissionMode {
    /// Conventional single-cell transmission: each user is served by its home
    /// BS, other cells interfere.
    Cst,
    /// Network MIMO: all BSs act as one transmitter with `B * N_t` antennas.
    Nmt,
}

impl TransmissionMode {
    pub fn label(self) -> &'static str {
        match self {
            TransmissionMode::Cst => "cst",
            TransmissionMode::Nmt => "nmt",
        }
    }
}

impl std::fmt::Display for TransmissionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}
