//! Scenario files (TOML or JSON) and their validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::equivalence::{ProblemSpec, SolverConfig, Tolerance};
use crate::ermakov::{Route, SolverOptions};
use crate::protocols::{
    AnsatzBasis, AnsatzSpec, ExpulsivePolicy, FrequencyProtocol, ProtocolError, QuasiOptimalSpec,
    Segment, SegmentKind,
};
use crate::Units;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentConfig {
    Constant {
        start: f64,
        end: f64,
        omega: f64,
    },
    /// `omega · exp(t / scale)`.
    ExponentialRamp {
        start: f64,
        end: f64,
        omega: f64,
        scale: f64,
    },
}

/// A frequency protocol as written in a scenario file. The mass comes from
/// the scenario units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolConfig {
    SuddenJump {
        omega0: f64,
        omega1: f64,
        omegaf: f64,
        tau: f64,
    },
    Constant {
        omega0: f64,
        tau: f64,
    },
    ExponentialRamp {
        omega0: f64,
        tau: f64,
    },
    Piecewise {
        omega0: f64,
        omegaf: f64,
        tau: f64,
        segments: Vec<SegmentConfig>,
    },
    /// Amplitude ansatz ending at `(δ, ε, γ)`; `δ` defaults to `1/√(m₀ω_f)`.
    Ansatz {
        omega0: f64,
        omegaf: f64,
        tau: f64,
        basis: AnsatzBasis,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default)]
        epsilon: f64,
        #[serde(default)]
        gamma: f64,
    },
    QuasiOptimal {
        omega0: f64,
        omegaf: f64,
        tau: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default)]
        epsilon: f64,
        #[serde(default)]
        gamma: f64,
    },
}

impl ProtocolConfig {
    pub fn tau(&self) -> f64 {
        match *self {
            Self::SuddenJump { tau, .. }
            | Self::Constant { tau, .. }
            | Self::ExponentialRamp { tau, .. }
            | Self::Piecewise { tau, .. }
            | Self::Ansatz { tau, .. }
            | Self::QuasiOptimal { tau, .. } => tau,
        }
    }

    pub fn omega0(&self) -> f64 {
        match *self {
            Self::SuddenJump { omega0, .. }
            | Self::Constant { omega0, .. }
            | Self::ExponentialRamp { omega0, .. }
            | Self::Piecewise { omega0, .. }
            | Self::Ansatz { omega0, .. }
            | Self::QuasiOptimal { omega0, .. } => omega0,
        }
    }

    /// Whether the intermediate frequency is inverted from a prescribed amplitude.
    pub fn is_designed(&self) -> bool {
        matches!(self, Self::Ansatz { .. } | Self::QuasiOptimal { .. })
    }

    pub fn build(&self, m0: f64) -> Result<FrequencyProtocol, ProtocolError> {
        match *self {
            Self::SuddenJump {
                omega0,
                omega1,
                omegaf,
                tau,
            } => FrequencyProtocol::sudden_jump(m0, omega0, omega1, omegaf, tau),
            Self::Constant { omega0, tau } => FrequencyProtocol::constant(m0, omega0, tau),
            Self::ExponentialRamp { omega0, tau } => {
                FrequencyProtocol::exponential_ramp(m0, omega0, tau)
            }
            Self::Piecewise {
                omega0,
                omegaf,
                tau,
                ref segments,
            } => {
                let segments = segments
                    .iter()
                    .map(|s| match *s {
                        SegmentConfig::Constant { start, end, omega } => Segment {
                            start,
                            end,
                            kind: SegmentKind::Constant { omega },
                        },
                        SegmentConfig::ExponentialRamp {
                            start,
                            end,
                            omega,
                            scale,
                        } => Segment {
                            start,
                            end,
                            kind: SegmentKind::ExponentialRamp { omega, scale },
                        },
                    })
                    .collect();
                FrequencyProtocol::new(m0, omega0, omegaf, tau, segments)
            }
            Self::Ansatz {
                omega0,
                omegaf,
                tau,
                basis,
                delta,
                epsilon,
                gamma,
            } => {
                if !(omega0 > 0.0 && omegaf > 0.0) {
                    return Err(ProtocolError::InvalidParameter(format!(
                        "omega0 and omegaf must be positive, got {omega0}, {omegaf}"
                    )));
                }
                let spec = AnsatzSpec {
                    basis,
                    rho0: 1.0 / (m0 * omega0).sqrt(),
                    delta: delta.unwrap_or(1.0 / (m0 * omegaf).sqrt()),
                    epsilon,
                    gamma,
                    tau,
                };
                FrequencyProtocol::from_ansatz(m0, omegaf, &spec)
            }
            Self::QuasiOptimal {
                omega0,
                omegaf,
                tau,
                sigma,
                delta,
                epsilon,
                gamma,
            } => {
                let spec = QuasiOptimalSpec::new(omega0, omegaf, tau, sigma, m0);
                let spec = spec.with_endpoint(delta.unwrap_or(spec.delta), epsilon, gamma);
                FrequencyProtocol::quasi_optimal(&spec)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedProtocol {
    pub name: String,
    /// Overrides the scenario route for this protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    pub protocol: ProtocolConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `ρ`, `ρ̇` and `ω` along the grid.
    Rho,
    /// Squeezing observables for each requested level.
    Squeeze,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub route: Route,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub expulsive: ExpulsivePolicy,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            route: Route::Ode,
            rtol: d.rtol,
            atol: d.atol,
            max_steps: d.max_steps,
            expulsive: d.expulsive,
        }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            expulsive: self.expulsive,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    /// Field of the base protocol to vary, e.g. `tau` or `omega1`.
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.lo];
        }
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.lo + (self.hi - self.lo) * s,
                    Spacing::Log => (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * s).exp(),
                }
            })
            .collect()
    }
}

fn default_max_points() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ProtocolConfig,
    pub ranges: Vec<SweepRange>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

impl SweepConfig {
    /// Every parameter point, last range varying fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self.ranges.iter().map(SweepRange::values).collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// The base protocol with the named fields replaced by `values`.
    pub fn protocol_at(&self, values: &[f64]) -> Result<ProtocolConfig, ConfigError> {
        let mut json = serde_json::to_value(&self.base)
            .map_err(|e| ConfigError::new("sweep.base", e.to_string()))?;
        let obj = json
            .as_object_mut()
            .ok_or_else(|| ConfigError::new("sweep.base", "not a table"))?;
        for (range, v) in self.ranges.iter().zip(values) {
            let field = format!("sweep.ranges.{}", range.param);
            if range.param == "kind" {
                return Err(ConfigError::new(field, "cannot sweep the protocol kind"));
            }
            let slot = obj.get_mut(&range.param);
            match slot {
                Some(slot) if slot.is_number() || slot.is_null() => *slot = serde_json::json!(v),
                Some(_) => {
                    return Err(ConfigError::new(
                        field,
                        "not a numeric field of the base protocol",
                    ))
                }
                None if matches!(range.param.as_str(), "delta") => {
                    obj.insert(range.param.clone(), serde_json::json!(v));
                }
                None => {
                    return Err(ConfigError::new(
                        field,
                        "no such field in the base protocol",
                    ))
                }
            }
        }
        serde_json::from_value(json).map_err(|e| ConfigError::new("sweep.base", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Also emit the scanned residual field.
    #[serde(default)]
    pub scan: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::Rho, Observable::Squeeze]
}

fn default_levels() -> Vec<u32> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default)]
    pub protocols: Vec<NamedProtocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    /// Fock levels `n` for the squeezing tables.
    #[serde(default = "default_levels")]
    pub quantum_numbers: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceConfig>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            units: Units::default(),
            solver: SolverSettings::default(),
            tolerance: Tolerance::default(),
            protocols: Vec::new(),
            grid: None,
            observables: default_observables(),
            quantum_numbers: default_levels(),
            sweep: None,
            equivalence: None,
            format: OutputFormat::Csv,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl ScenarioConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, ConfigError> {
        serde_json::to_string_pretty(self).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn options(&self) -> SolverOptions {
        self.solver.options()
    }

    /// Checks shared by every subcommand.
    pub fn validate_common(&self) -> Result<(), ConfigError> {
        positive("units.m0", self.units.m0)?;
        positive("units.hbar", self.units.hbar)?;
        positive("solver.rtol", self.solver.rtol)?;
        positive("solver.atol", self.solver.atol)?;
        if self.solver.max_steps == 0 {
            return Err(ConfigError::new("solver.max_steps", "must be at least 1"));
        }
        if !(self.tolerance.atol >= 0.0 && self.tolerance.rtol >= 0.0) {
            return Err(ConfigError::new(
                "tolerance",
                "atol and rtol must be non-negative",
            ));
        }
        for (i, p) in self.protocols.iter().enumerate() {
            p.protocol.build(self.units.m0).map_err(|e| {
                ConfigError::new(format!("protocols[{i}] ({})", p.name), e.to_string())
            })?;
        }
        let mut names: Vec<&str> = self.protocols.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::new(
                "protocols",
                format!("duplicate name {:?}", w[0]),
            ));
        }
        if let Some(p) = self
            .protocols
            .iter()
            .find(|p| p.name.is_empty() || p.name.contains(['/', '\\']))
        {
            return Err(ConfigError::new(
                "protocols.name",
                format!("invalid protocol name {:?}", p.name),
            ));
        }
        Ok(())
    }

    /// Checks for time-series runs (`simulate`, `design`).
    pub fn validate_series(&self) -> Result<GridSpec, ConfigError> {
        self.validate_common()?;
        if self.protocols.is_empty() {
            return Err(ConfigError::new(
                "protocols",
                "at least one protocol is required",
            ));
        }
        let grid = self
            .grid
            .ok_or_else(|| ConfigError::new("grid", "missing"))?;
        if grid.points < 2 {
            return Err(ConfigError::new(
                "grid.points",
                format!("must be >= 2, got {}", grid.points),
            ));
        }
        if !(grid.t_min.is_finite() && grid.t_max.is_finite() && grid.t_max > grid.t_min) {
            return Err(ConfigError::new(
                "grid",
                format!("need t_min < t_max, got [{}, {}]", grid.t_min, grid.t_max),
            ));
        }
        if self.observables.contains(&Observable::Squeeze) {
            if self.quantum_numbers.is_empty() {
                return Err(ConfigError::new(
                    "quantum_numbers",
                    "at least one level is required for squeeze output",
                ));
            }
            if let Some(p) = self
                .protocols
                .iter()
                .find(|p| !(grid.t_max > p.protocol.tau()))
            {
                return Err(ConfigError::new(
                    "grid.t_max",
                    format!(
                        "must exceed tau = {} of protocol {:?} when squeezing is requested",
                        p.protocol.tau(),
                        p.name
                    ),
                ));
            }
        }
        Ok(grid)
    }
}
