//! Ermakov-Pinney amplitude `ρ̈ + ω²ρ = 1/(m₀²ρ³)` for piecewise protocols.
//!
//! Two interchangeable routes produce the same trajectory: direct adaptive
//! integration ([`Route::Ode`]) and the construction from classical solutions
//! with closed forms wherever the frequency is constant ([`Route::Formal`]).

mod final_segment;
mod formal;
mod solve;

pub use final_segment::{final_segment, FinalSegment};
pub use formal::{formal_coefficients, ClassicalPair, FormalCoefficients};
pub use solve::{
    end_state, integrate_ep, propagate, solve, ErmakovTrajectory, Route, SolverOptions,
    TrajectoryPoint,
};

use thiserror::Error;

use crate::integrate::IntegrationError;
use crate::protocols::ProtocolError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErmakovError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("classical solutions are linearly dependent (wronskian {wronskian:e})")]
    DegenerateSolutions { wronskian: f64 },
    #[error("adaptive integration failed: {0}")]
    StepFailure(IntegrationError),
    #[error("rho left its guard band at t = {t} (rho = {rho:e})")]
    BlowUp { t: f64, rho: f64 },
    #[error("prescribed rho profile does not match the incoming state at t = {t}: expected {expected:?}, got {got:?}")]
    ProfileMismatch {
        t: f64,
        expected: (f64, f64),
        got: (f64, f64),
    },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// `(ρ, ρ̇)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmakovState {
    pub t: f64,
    pub rho: f64,
    pub rho_dot: f64,
}

impl ErmakovState {
    pub fn new(t: f64, rho: f64, rho_dot: f64) -> Result<Self, ErmakovError> {
        if !(rho > 0.0) || !rho.is_finite() || !rho_dot.is_finite() || !t.is_finite() {
            return Err(ErmakovError::InvalidState(format!(
                "need finite rho > 0, got rho={rho}, rho_dot={rho_dot}, t={t}"
            )));
        }
        Ok(Self { t, rho, rho_dot })
    }

    /// The stationary state of a trap held at `omega0`.
    pub fn at_rest(t: f64, m0: f64, omega0: f64) -> Self {
        Self {
            t,
            rho: rho_constant(m0, omega0),
            rho_dot: 0.0,
        }
    }
}

/// Stationary amplitude `1/√(m₀ω₀)`.
pub fn rho_constant(m0: f64, omega0: f64) -> f64 {
    1.0 / (m0 * omega0).sqrt()
}

/// `ρ̈ + ω²ρ − 1/(m₀²ρ³)`.
pub fn residual(rho: f64, rho_ddot: f64, omega_sq: f64, m0: f64) -> f64 {
    rho_ddot + omega_sq * rho - 1.0 / (m0 * m0 * rho.powi(3))
}

/// Residual divided by the sum of magnitudes of its three terms.
pub fn relative_residual(rho: f64, rho_ddot: f64, omega_sq: f64, m0: f64) -> f64 {
    let barrier = 1.0 / (m0 * m0 * rho.powi(3));
    let scale = rho_ddot.abs() + (omega_sq * rho).abs() + barrier;
    residual(rho, rho_ddot, omega_sq, m0).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_constant_values() {
        assert_eq!(rho_constant(1.0, 1.0), 1.0);
        assert_eq!(rho_constant(1.0, 4.0), 0.5);
        assert_eq!(rho_constant(2.0, 2.0), 0.5);
    }

    #[test]
    fn rest_state_has_zero_residual() {
        let s = ErmakovState::at_rest(0.0, 1.5, 3.0);
        assert!(residual(s.rho, 0.0, 9.0, 1.5).abs() < 1e-14);
    }

    #[test]
    fn state_rejects_non_positive_rho() {
        assert!(ErmakovState::new(0.0, 0.0, 1.0).is_err());
        assert!(ErmakovState::new(0.0, f64::NAN, 1.0).is_err());
        assert!(ErmakovState::new(0.0, 1.0, 0.0).is_ok());
    }
}
