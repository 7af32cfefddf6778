//! Squeezing equivalence: two protocols that end with the same `ω_f`, `ρ(τ)`
//! and `ρ̇(τ)` share every observable for `t > τ`.

mod problems;
mod solver;

pub use problems::{
    identical_problem, janszky_problem, jump_vs_ramp_problem, JumpVsRamp, ProblemSpec,
};
pub use solver::{
    polish, solve_equivalence, EquivalenceProblem, EquivalenceSolution, Param, ResidualFn, Root,
    SolverConfig,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ermakov::{end_state, ErmakovError, Route, SolverOptions};
use crate::protocols::FrequencyProtocol;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivalenceError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no root found; best residual norm {best_residual:e} at {best_params:?}")]
    NoRootFound {
        best_params: Vec<f64>,
        best_residual: f64,
    },
    #[error(transparent)]
    Ermakov(#[from] ErmakovError),
}

/// `(δ, ε, ω_f)` reached at the end of the modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndState {
    pub delta: f64,
    pub epsilon: f64,
    pub omegaf: f64,
}

/// Mixed criterion `|a − b| ≤ atol + rtol·max(|a|, |b|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn exact() -> Self {
        Self {
            atol: 0.0,
            rtol: 0.0,
        }
    }

    pub fn bound(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }

    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.bound(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub equivalent: bool,
    /// Differences `(ω_f − ω_f′, δ − δ′, ε − ε′)`.
    pub residuals: [f64; 3],
}

fn check_delta(s: &EndState) -> Result<(), EquivalenceError> {
    if !(s.delta > 0.0) || !(s.omegaf > 0.0) || !s.epsilon.is_finite() {
        return Err(EquivalenceError::InvalidInput(format!(
            "end state needs delta, omegaf > 0: {s:?}"
        )));
    }
    Ok(())
}

pub fn check_equivalence(
    a: &EndState,
    b: &EndState,
    tol: Tolerance,
) -> Result<EquivalenceCheck, EquivalenceError> {
    check_delta(a)?;
    check_delta(b)?;
    let residuals = [
        a.omegaf - b.omegaf,
        a.delta - b.delta,
        a.epsilon - b.epsilon,
    ];
    let equivalent = tol.close(a.omegaf, b.omegaf)
        && tol.close(a.delta, b.delta)
        && tol.close(a.epsilon, b.epsilon);
    Ok(EquivalenceCheck {
        equivalent,
        residuals,
    })
}

/// All pairs of a list of end states equivalent.
pub fn chain_equivalence(states: &[EndState], tol: Tolerance) -> Result<bool, EquivalenceError> {
    if states.len() < 2 {
        return Err(EquivalenceError::InvalidInput(format!(
            "chain needs at least 2 end states, got {}",
            states.len()
        )));
    }
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            if !check_equivalence(a, b, tol)?.equivalent {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Bound on `|r_f − r_f′|` implied by matching end states within `tol`.
///
/// Uses `r = asinh(|v|/(2√(m₀ω)))` with `v = (m₀ε, 1/δ − m₀ωδ)`: asinh is
/// 1-Lipschitz and the norm moves by at most the change of `v`.
pub fn r_f_bound(a: &EndState, b: &EndState, m0: f64, tol: Tolerance) -> f64 {
    let (d, w) = (a.delta.min(b.delta), a.omegaf.min(b.omegaf));
    let d_hi = a.delta.max(b.delta);
    let dd = tol.bound(a.delta, b.delta);
    let de = tol.bound(a.epsilon, b.epsilon);
    let dw = tol.bound(a.omegaf, b.omegaf);
    let dv = m0 * de + (1.0 / (d * d) + m0 * a.omegaf.max(b.omegaf)) * dd + m0 * d_hi * dw;
    let norm = {
        let v1 = m0 * a.epsilon.abs().max(b.epsilon.abs());
        let v2 = (1.0 / d).max(m0 * a.omegaf.max(b.omegaf) * d_hi);
        (v1 * v1 + v2 * v2).sqrt()
    };
    let pre = 1.0 / (2.0 * (m0 * w).sqrt());
    // the prefactor itself moves with ω_f
    let dpre = pre * dw / (2.0 * w);
    (pre * dv + dpre * norm) * (1.0 + 1e-6) + 4.0 * f64::EPSILON
}

/// `τ = qπ/ω₁`, the return times with no residual squeezing.
pub fn janszky_adam_tau(omega1: f64, q: u32) -> f64 {
    q as f64 * std::f64::consts::PI / omega1
}

pub fn end_state_of(
    protocol: &FrequencyProtocol,
    route: Route,
    opts: &SolverOptions,
) -> Result<EndState, EquivalenceError> {
    let s = end_state(protocol, route, opts)?;
    Ok(EndState {
        delta: s.rho,
        epsilon: s.rho_dot,
        omegaf: protocol.omegaf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squeeze::final_squeeze;
    use std::f64::consts::PI;

    fn es(delta: f64, epsilon: f64, omegaf: f64) -> EndState {
        EndState {
            delta,
            epsilon,
            omegaf,
        }
    }

    #[test]
    fn identical_states_are_equivalent() {
        let a = es(0.7, 0.2, 1.3);
        let c = check_equivalence(&a, &a, Tolerance::default()).unwrap();
        assert!(c.equivalent);
        assert_eq!(c.residuals, [0.0; 3]);
    }

    #[test]
    fn janszky_return_matches_constant_protocol() {
        let (w0, w1) = (1.0, 3.0);
        let opts = SolverOptions::default();
        let jump =
            FrequencyProtocol::sudden_jump(1.0, w0, w1, w0, janszky_adam_tau(w1, 1)).unwrap();
        let flat = FrequencyProtocol::constant(1.0, w0, 1.0).unwrap();
        let a = end_state_of(&jump, Route::Formal, &opts).unwrap();
        let b = end_state_of(&flat, Route::Formal, &opts).unwrap();
        assert!(
            check_equivalence(&a, &b, Tolerance::default())
                .unwrap()
                .equivalent
        );
        let quarter = FrequencyProtocol::sudden_jump(1.0, w0, w1, w0, PI / (2.0 * w1)).unwrap();
        let c = end_state_of(&quarter, Route::Formal, &opts).unwrap();
        assert!((c.delta - (w0 / (w1 * w1)).sqrt()).abs() < 1e-12);
        assert!(
            !check_equivalence(&c, &b, Tolerance::default())
                .unwrap()
                .equivalent
        );
    }

    #[test]
    fn chain_rules() {
        let a = es(1.0, 1.0, 2.0);
        assert!(chain_equivalence(&[a, a, a], Tolerance::default()).unwrap());
        assert!(!chain_equivalence(&[a, a, es(1.0, 1.1, 2.0)], Tolerance::default()).unwrap());
        assert!(chain_equivalence(&[a], Tolerance::default()).is_err());
    }

    #[test]
    fn janszky_tau_values() {
        assert!((janszky_adam_tau(2.0, 1) - PI / 2.0).abs() < 1e-15);
        assert!((janszky_adam_tau(5.0, 3) - 3.0 * PI / 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_delta() {
        assert!(
            check_equivalence(&es(0.0, 0.0, 1.0), &es(1.0, 0.0, 1.0), Tolerance::default())
                .is_err()
        );
    }

    #[test]
    fn r_f_bound_holds_at_tolerance_edge() {
        let tol = Tolerance::default();
        for (d, e, w) in [(0.5, 0.3, 2.0), (1.0, 0.0, 1.0), (0.9, -2.0, 0.4)] {
            let a = es(d, e, w);
            let b = es(
                d + tol.bound(d, d),
                e - tol.bound(e, e),
                w + tol.bound(w, w) * 0.99,
            );
            assert!(check_equivalence(&a, &b, tol).unwrap().equivalent);
            let ra = final_squeeze(a.delta, a.epsilon, a.omegaf, 1.0)
                .unwrap()
                .r_f;
            let rb = final_squeeze(b.delta, b.epsilon, b.omegaf, 1.0)
                .unwrap()
                .r_f;
            assert!((ra - rb).abs() <= r_f_bound(&a, &b, 1.0, tol));
        }
    }
}
