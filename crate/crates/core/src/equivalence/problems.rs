//! Built-in equivalence problems with named free parameters.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::solver::{EquivalenceProblem, Param, SolverConfig};
use super::{end_state_of, EndState, EquivalenceError};
use crate::ermakov::{Route, SolverOptions};
use crate::protocols::FrequencyProtocol;

fn default_one() -> f64 {
    1.0
}

fn default_jump_box() -> [f64; 2] {
    [0.5, 6.0]
}

fn default_ramp_box() -> [f64; 2] {
    [0.5, 8.0]
}

fn default_grid() -> usize {
    64
}

fn default_tau_points() -> usize {
    400
}

/// Which pair of protocol templates to match, and over what box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Sudden jump `ω₀ → ω₁ → ω₀e` against the ramp `ω₀e^{t/τ}`; unknowns
    /// `(ω₀τ, ω₁τ)`.
    JumpVsRamp {
        #[serde(default = "default_one")]
        m0: f64,
        #[serde(default = "default_one")]
        omega0: f64,
        #[serde(default = "default_jump_box")]
        omega0_tau: [f64; 2],
        #[serde(default = "default_ramp_box")]
        omega1_tau: [f64; 2],
        #[serde(default = "default_grid")]
        points: usize,
    },
    /// Jump `ω₀ → ω₁ → ω₀` against the unmodulated trap; unknown `τ`.
    Janszky {
        #[serde(default = "default_one")]
        m0: f64,
        #[serde(default = "default_one")]
        omega0: f64,
        omega1: f64,
        tau: [f64; 2],
        #[serde(default = "default_tau_points")]
        points: usize,
    },
    /// The Janszky jump compared against itself.
    Identical {
        #[serde(default = "default_one")]
        m0: f64,
        #[serde(default = "default_one")]
        omega0: f64,
        omega1: f64,
        tau: [f64; 2],
        #[serde(default = "default_grid")]
        points: usize,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self::JumpVsRamp {
            m0: 1.0,
            omega0: 1.0,
            omega0_tau: default_jump_box(),
            omega1_tau: default_ramp_box(),
            points: default_grid(),
        }
    }
}

/// The jump and ramp protocols for given `(ω₀τ, ω₁τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpVsRamp {
    pub jump: FrequencyProtocol,
    pub ramp: FrequencyProtocol,
}

impl JumpVsRamp {
    pub fn new(
        m0: f64,
        omega0: f64,
        omega0_tau: f64,
        omega1_tau: f64,
    ) -> Result<Self, EquivalenceError> {
        let tau = omega0_tau / omega0;
        let omega1 = omega1_tau / tau;
        let ramp = FrequencyProtocol::exponential_ramp(m0, omega0, tau)
            .map_err(crate::ermakov::ErmakovError::from)?;
        let jump = FrequencyProtocol::sudden_jump(m0, omega0, omega1, ramp.omegaf, tau)
            .map_err(crate::ermakov::ErmakovError::from)?;
        Ok(Self { jump, ramp })
    }
}

fn check_box(name: &str, b: [f64; 2], positive: bool) -> Result<(), EquivalenceError> {
    if !(b[0].is_finite() && b[1].is_finite() && b[1] > b[0]) || (positive && !(b[0] > 0.0)) {
        return Err(EquivalenceError::InvalidInput(format!(
            "{name} range {b:?} must be increasing and positive"
        )));
    }
    Ok(())
}

fn diff(a: &EndState, b: &EndState) -> Vec<f64> {
    vec![a.delta - b.delta, a.epsilon - b.epsilon]
}

fn stringify(e: EquivalenceError) -> String {
    e.to_string()
}

impl ProblemSpec {
    /// The two end states compared at parameter vector `p`.
    pub fn end_states(
        &self,
        p: &[f64],
        opts: &SolverOptions,
    ) -> Result<(EndState, EndState), EquivalenceError> {
        match *self {
            Self::JumpVsRamp { m0, omega0, .. } => {
                let pair = JumpVsRamp::new(m0, omega0, p[0], p[1])?;
                Ok((
                    end_state_of(&pair.jump, Route::Formal, opts)?,
                    end_state_of(&pair.ramp, Route::Ode, opts)?,
                ))
            }
            Self::Janszky {
                m0, omega0, omega1, ..
            } => {
                let jump = FrequencyProtocol::sudden_jump(m0, omega0, omega1, omega0, p[0])
                    .map_err(crate::ermakov::ErmakovError::from)?;
                let rho0 = 1.0 / (m0 * omega0).sqrt();
                Ok((
                    end_state_of(&jump, Route::Formal, opts)?,
                    EndState {
                        delta: rho0,
                        epsilon: 0.0,
                        omegaf: omega0,
                    },
                ))
            }
            Self::Identical {
                m0, omega0, omega1, ..
            } => {
                let jump = FrequencyProtocol::sudden_jump(m0, omega0, omega1, omega0, p[0])
                    .map_err(crate::ermakov::ErmakovError::from)?;
                let a = end_state_of(&jump, Route::Formal, opts)?;
                Ok((a, a))
            }
        }
    }

    pub fn m0(&self) -> f64 {
        match *self {
            Self::JumpVsRamp { m0, .. } | Self::Janszky { m0, .. } | Self::Identical { m0, .. } => {
                m0
            }
        }
    }

    pub fn build(
        &self,
        opts: SolverOptions,
        config: SolverConfig,
    ) -> Result<EquivalenceProblem, EquivalenceError> {
        let (name, params) = match self {
            Self::JumpVsRamp {
                omega0_tau,
                omega1_tau,
                points,
                ..
            } => {
                check_box("omega0_tau", *omega0_tau, true)?;
                check_box("omega1_tau", *omega1_tau, true)?;
                (
                    "jump_vs_ramp",
                    vec![
                        Param::new("omega0_tau", omega0_tau[0], omega0_tau[1], *points),
                        Param::new("omega1_tau", omega1_tau[0], omega1_tau[1], *points),
                    ],
                )
            }
            Self::Janszky { tau, points, .. } => {
                check_box("tau", *tau, true)?;
                ("janszky", vec![Param::new("tau", tau[0], tau[1], *points)])
            }
            Self::Identical { tau, points, .. } => {
                check_box("tau", *tau, true)?;
                (
                    "identical",
                    vec![Param::new("tau", tau[0], tau[1], *points)],
                )
            }
        };
        let spec = self.clone();
        // validate constants once so a bad config fails before the scan
        let probe: Vec<f64> = params.iter().map(|p| 0.5 * (p.lo + p.hi)).collect();
        spec.end_states(&probe, &opts)?;
        let residual = Arc::new(move |p: &[f64]| {
            spec.end_states(p, &opts)
                .map(|(a, b)| diff(&a, &b))
                .map_err(stringify)
        });
        Ok(EquivalenceProblem {
            name: name.to_string(),
            params,
            residual,
            config,
        })
    }
}

pub fn jump_vs_ramp_problem(opts: SolverOptions) -> EquivalenceProblem {
    ProblemSpec::default()
        .build(opts, SolverConfig::default())
        .expect("default box is valid")
}

pub fn janszky_problem(
    omega0: f64,
    omega1: f64,
    tau: [f64; 2],
    opts: SolverOptions,
) -> Result<EquivalenceProblem, EquivalenceError> {
    ProblemSpec::Janszky {
        m0: 1.0,
        omega0,
        omega1,
        tau,
        points: default_tau_points(),
    }
    .build(opts, SolverConfig::default())
}

pub fn identical_problem(
    omega0: f64,
    omega1: f64,
    tau: [f64; 2],
    opts: SolverOptions,
) -> Result<EquivalenceProblem, EquivalenceError> {
    ProblemSpec::Identical {
        m0: 1.0,
        omega0,
        omega1,
        tau,
        points: default_grid(),
    }
    .build(opts, SolverConfig::default())
}
