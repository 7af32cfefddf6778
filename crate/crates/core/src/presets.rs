//! Ready-made scenarios for the standard comparisons.

use std::f64::consts::{E, PI};

use crate::config::{
    EquivalenceConfig, GridSpec, NamedProtocol, ProtocolConfig, ScenarioConfig, SolverSettings,
    SweepConfig, SweepRange,
};
use crate::equivalence::{ProblemSpec, SolverConfig};
use crate::ermakov::Route;
use crate::protocols::AnsatzBasis;

pub const PRESETS: [&str; 5] = ["fig1", "fig2", "fig3", "fig4", "janszky"];

/// `ω₀τ` and `ω₁τ` of the jump/ramp pair.
pub const JUMP_RAMP_ROOT: (f64, f64) = (2.657887, 4.473165);

const SHORTCUT_OMEGA0: f64 = 20.0;

fn named(name: &str, route: Option<Route>, protocol: ProtocolConfig) -> NamedProtocol {
    NamedProtocol {
        name: name.to_string(),
        route,
        protocol,
    }
}

fn grid_to(tau: f64, factor: f64) -> Option<GridSpec> {
    Some(GridSpec {
        t_min: 0.0,
        t_max: factor * tau,
        points: 801,
    })
}

fn fig1() -> ScenarioConfig {
    let (w0t, w1t) = JUMP_RAMP_ROOT;
    let omega0 = 1.0;
    let tau = w0t / omega0;
    ScenarioConfig {
        name: "fig1".into(),
        protocols: vec![
            named(
                "jump",
                None,
                ProtocolConfig::SuddenJump {
                    omega0,
                    omega1: w1t / tau,
                    omegaf: omega0 * E,
                    tau,
                },
            ),
            named(
                "ramp",
                None,
                ProtocolConfig::ExponentialRamp { omega0, tau },
            ),
        ],
        grid: grid_to(tau, 2.0),
        equivalence: Some(EquivalenceConfig {
            problem: ProblemSpec::default(),
            solver: SolverConfig::default(),
            scan: false,
        }),
        ..ScenarioConfig::default()
    }
}

/// Polynomial and exponential ansatz pair sharing `(δ, ε, γ = 0)`.
fn ansatz_pair(name: &str, epsilon: f64) -> ScenarioConfig {
    let omega0 = SHORTCUT_OMEGA0;
    let omegaf = omega0 / 16.0;
    let tau = 10.0 / omega0;
    let ansatz = |basis| ProtocolConfig::Ansatz {
        omega0,
        omegaf,
        tau,
        basis,
        delta: None,
        epsilon,
        gamma: 0.0,
    };
    ScenarioConfig {
        name: name.into(),
        solver: SolverSettings {
            route: Route::Formal,
            ..SolverSettings::default()
        },
        protocols: vec![
            named("poly", None, ansatz(AnsatzBasis::Polynomial { beta: 1.0 })),
            named("exp", None, ansatz(AnsatzBasis::Exponential { kappa: 1.0 })),
        ],
        grid: grid_to(tau, 2.0),
        ..ScenarioConfig::default()
    }
}

fn fig4() -> ScenarioConfig {
    let mut cfg = ansatz_pair("fig4", 1.0);
    let omega0 = SHORTCUT_OMEGA0;
    cfg.protocols.insert(
        0,
        named(
            "quasi_optimal",
            None,
            ProtocolConfig::QuasiOptimal {
                omega0,
                omegaf: omega0 / 16.0,
                tau: 10.0 / omega0,
                sigma: 0.3,
                delta: None,
                epsilon: 1.0,
                gamma: 0.0,
            },
        ),
    );
    cfg
}

fn janszky() -> ScenarioConfig {
    let (omega0, omega1) = (1.0, 2.0);
    let tau = PI / omega1;
    ScenarioConfig {
        name: "janszky".into(),
        solver: SolverSettings {
            route: Route::Formal,
            ..SolverSettings::default()
        },
        protocols: vec![
            named(
                "jump",
                None,
                ProtocolConfig::SuddenJump {
                    omega0,
                    omega1,
                    omegaf: omega0,
                    tau,
                },
            ),
            named("constant", None, ProtocolConfig::Constant { omega0, tau }),
        ],
        grid: grid_to(tau, 3.0),
        sweep: Some(SweepConfig {
            base: ProtocolConfig::SuddenJump {
                omega0,
                omega1,
                omegaf: omega0,
                tau,
            },
            ranges: vec![SweepRange {
                param: "tau".into(),
                lo: 0.1 / omega1,
                hi: 2.0 * PI / omega1,
                points: 629,
                spacing: Default::default(),
            }],
            max_points: 100_000,
        }),
        equivalence: Some(EquivalenceConfig {
            problem: ProblemSpec::Janszky {
                m0: 1.0,
                omega0,
                omega1,
                tau: [0.2, 3.5 * PI / omega1],
                points: 400,
            },
            solver: SolverConfig::default(),
            scan: false,
        }),
        ..ScenarioConfig::default()
    }
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "fig1" => Some(fig1()),
        "fig2" => Some(ansatz_pair("fig2", 3.0)),
        "fig3" => Some(ansatz_pair("fig3", 0.0)),
        "fig4" => Some(fig4()),
        "janszky" => Some(janszky()),
        _ => None,
    }
}
