//! Time-dependent harmonic oscillators under piecewise frequency modulation:
//! Ermakov-Pinney amplitudes, squeezing observables and squeezing-equivalent
//! protocol design.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod app;
pub mod config;
pub mod equivalence;
pub mod ermakov;
pub mod integrate;
pub mod linalg;
pub mod presets;
pub mod protocols;
pub mod squeeze;

use serde::{Deserialize, Serialize};

/// Mass and Planck constant used to dimension observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub m0: f64,
    pub hbar: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { m0: 1.0, hbar: 1.0 }
    }
}
