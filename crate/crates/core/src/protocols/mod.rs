//! Piecewise frequency protocols `ω(t)`.
//!
//! A protocol holds `ω₀` for `t ≤ 0`, a list of contiguous segments covering
//! `(0, τ]`, and `ω_f` for `t > τ`. Segment intervals are half-open
//! `(start, end]`, so a boundary instant belongs to the segment it closes.

mod ansatz;
mod quasi_optimal;

pub use ansatz::{ansatz_coefficients, AnsatzBasis, AnsatzRho, AnsatzSpec};
pub use quasi_optimal::{quasi_optimal_rho, QuasiOptimalRho, QuasiOptimalSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid segment layout: {0}")]
    InvalidSegments(String),
    #[error("ansatz boundary matrix is singular for basis {0:?}")]
    SingularBasis(AnsatzBasis),
    #[error("expulsive regime (omega^2 < 0, min {min_omega_sq:e}) on t-intervals {intervals:?}")]
    ExpulsiveRegime {
        intervals: Vec<(f64, f64)>,
        min_omega_sq: f64,
    },
    #[error("rho profile is not positive at t = {t}")]
    NonPositiveRho { t: f64 },
}

/// What to do when an inverted frequency has a negative radicand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpulsivePolicy {
    /// Abort with [`ProtocolError::ExpulsiveRegime`].
    Error,
    /// Keep going and record the offending instants.
    #[default]
    Record,
}

/// `ρ` and its first two time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSample {
    pub rho: f64,
    pub rho_dot: f64,
    pub rho_ddot: f64,
}

impl RhoSample {
    /// Radicand of the inverted Ermakov-Pinney equation, `1/(m₀²ρ⁴) − ρ̈/ρ`.
    pub fn omega_squared(&self, m0: f64) -> f64 {
        1.0 / (m0 * m0 * self.rho.powi(4)) - self.rho_ddot / self.rho
    }
}

/// A prescribed amplitude profile from which the frequency is derived.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoProfile {
    Constant { rho: f64 },
    Ansatz(AnsatzRho),
    QuasiOptimal(QuasiOptimalRho),
}

impl RhoProfile {
    pub fn eval(&self, t: f64) -> RhoSample {
        match self {
            RhoProfile::Constant { rho } => RhoSample {
                rho: *rho,
                rho_dot: 0.0,
                rho_ddot: 0.0,
            },
            RhoProfile::Ansatz(a) => a.eval(t),
            RhoProfile::QuasiOptimal(q) => q.eval(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum SegmentKind {
    Constant {
        omega: f64,
    },
    /// `ω(t) = omega · exp(t / scale)` in absolute time.
    ExponentialRamp {
        omega: f64,
        scale: f64,
    },
    FromRho(RhoProfile),
}

impl SegmentKind {
    pub fn omega_squared(&self, t: f64, m0: f64) -> f64 {
        match self {
            SegmentKind::Constant { omega } => omega * omega,
            SegmentKind::ExponentialRamp { omega, scale } => {
                let w = omega * (t / scale).exp();
                w * w
            }
            SegmentKind::FromRho(profile) => profile.eval(t).omega_squared(m0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SegmentKind::Constant { .. } => "constant",
            SegmentKind::ExponentialRamp { .. } => "exp_ramp",
            SegmentKind::FromRho(RhoProfile::Constant { .. }) => "rho_constant",
            SegmentKind::FromRho(RhoProfile::Ansatz(a)) => match a.spec.basis {
                AnsatzBasis::Polynomial { .. } => "ansatz_poly",
                AnsatzBasis::Exponential { .. } => "ansatz_exp",
            },
            SegmentKind::FromRho(RhoProfile::QuasiOptimal(_)) => "quasi_optimal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKind,
}

/// Which piece of the protocol an instant falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Initial,
    Intermediate(usize),
    Final,
}

impl Region {
    pub fn tag(&self) -> String {
        match self {
            Region::Initial => "initial".to_string(),
            Region::Intermediate(i) => format!("int{i}"),
            Region::Final => "final".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProtocol {
    pub m0: f64,
    pub omega0: f64,
    pub omegaf: f64,
    pub tau: f64,
    pub segments: Vec<Segment>,
}

fn check_positive(name: &str, v: f64) -> Result<(), ProtocolError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ProtocolError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl FrequencyProtocol {
    /// Build and validate a protocol. Segment endpoints within `1e-12·τ` of
    /// their neighbours (or of `0`/`τ`) are snapped onto them.
    pub fn new(
        m0: f64,
        omega0: f64,
        omegaf: f64,
        tau: f64,
        mut segments: Vec<Segment>,
    ) -> Result<Self, ProtocolError> {
        check_positive("m0", m0)?;
        check_positive("omega0", omega0)?;
        check_positive("omegaf", omegaf)?;
        check_positive("tau", tau)?;
        if segments.is_empty() {
            return Err(ProtocolError::InvalidSegments(
                "at least one segment is required".into(),
            ));
        }
        let snap = 1e-12 * tau;
        let mut cursor = 0.0;
        let n = segments.len();
        for (i, seg) in segments.iter_mut().enumerate() {
            if (seg.start - cursor).abs() > snap {
                return Err(ProtocolError::InvalidSegments(format!(
                    "segment {i} starts at {} but the previous one ends at {cursor}",
                    seg.start
                )));
            }
            seg.start = cursor;
            if i == n - 1 {
                if (seg.end - tau).abs() > snap {
                    return Err(ProtocolError::InvalidSegments(format!(
                        "last segment ends at {} instead of tau = {tau}",
                        seg.end
                    )));
                }
                seg.end = tau;
            }
            if !(seg.end > seg.start) {
                return Err(ProtocolError::InvalidSegments(format!(
                    "segment {i} is empty or reversed"
                )));
            }
            match &seg.kind {
                SegmentKind::Constant { omega } => {
                    check_positive("constant segment omega", *omega)?
                }
                SegmentKind::ExponentialRamp { omega, scale } => {
                    check_positive("ramp omega", *omega)?;
                    if !(scale.is_finite() && *scale != 0.0) {
                        return Err(ProtocolError::InvalidParameter(format!(
                            "ramp scale must be non-zero, got {scale}"
                        )));
                    }
                }
                SegmentKind::FromRho(RhoProfile::Constant { rho }) => {
                    check_positive("profile rho", *rho)?
                }
                SegmentKind::FromRho(_) => {}
            }
            cursor = seg.end;
        }
        Ok(Self {
            m0,
            omega0,
            omegaf,
            tau,
            segments,
        })
    }

    /// `ω₀ → ω₁` on `(0, τ]`, then `ω_f`.
    pub fn sudden_jump(
        m0: f64,
        omega0: f64,
        omega1: f64,
        omegaf: f64,
        tau: f64,
    ) -> Result<Self, ProtocolError> {
        Self::new(
            m0,
            omega0,
            omegaf,
            tau,
            vec![Segment {
                start: 0.0,
                end: tau,
                kind: SegmentKind::Constant { omega: omega1 },
            }],
        )
    }

    /// Constant `ω₀` throughout (the trivial comparison protocol).
    pub fn constant(m0: f64, omega0: f64, tau: f64) -> Result<Self, ProtocolError> {
        Self::sudden_jump(m0, omega0, omega0, omega0, tau)
    }

    /// `ω₀ e^{t/τ}` on `(0, τ]`, continuing at `ω₀ e` afterwards.
    pub fn exponential_ramp(m0: f64, omega0: f64, tau: f64) -> Result<Self, ProtocolError> {
        Self::new(
            m0,
            omega0,
            omega0 * std::f64::consts::E,
            tau,
            vec![Segment {
                start: 0.0,
                end: tau,
                kind: SegmentKind::ExponentialRamp {
                    omega: omega0,
                    scale: tau,
                },
            }],
        )
    }

    /// Protocol whose intermediate frequency is inverted from an ansatz
    /// amplitude. `ω₀` is read off `ρ₀ = 1/√(m₀ω₀)`.
    pub fn from_ansatz(m0: f64, omegaf: f64, spec: &AnsatzSpec) -> Result<Self, ProtocolError> {
        let rho = ansatz_coefficients(spec)?;
        let omega0 = 1.0 / (m0 * spec.rho0 * spec.rho0);
        Self::new(
            m0,
            omega0,
            omegaf,
            spec.tau,
            vec![Segment {
                start: 0.0,
                end: spec.tau,
                kind: SegmentKind::FromRho(RhoProfile::Ansatz(rho)),
            }],
        )
    }

    /// Three-segment protocol driven by the quasi-optimal amplitude.
    pub fn quasi_optimal(spec: &QuasiOptimalSpec) -> Result<Self, ProtocolError> {
        let rho = quasi_optimal_rho(spec)?;
        let tau = spec.tau;
        let cuts = [0.0, spec.sigma * tau, (1.0 - spec.sigma) * tau, tau];
        let segments = cuts
            .windows(2)
            .map(|w| Segment {
                start: w[0],
                end: w[1],
                kind: SegmentKind::FromRho(RhoProfile::QuasiOptimal(rho.clone())),
            })
            .collect();
        Self::new(spec.m0, spec.omega0, spec.omegaf, tau, segments)
    }

    pub fn rho0(&self) -> f64 {
        1.0 / (self.m0 * self.omega0).sqrt()
    }

    pub fn region(&self, t: f64) -> Region {
        if t <= 0.0 {
            return Region::Initial;
        }
        if t > self.tau {
            return Region::Final;
        }
        let idx = self.segments.partition_point(|s| s.end < t);
        Region::Intermediate(idx.min(self.segments.len() - 1))
    }

    /// Signed `ω(t)²`; negative inside an expulsive stretch.
    pub fn omega_squared(&self, t: f64) -> f64 {
        match self.region(t) {
            Region::Initial => self.omega0 * self.omega0,
            Region::Final => self.omegaf * self.omegaf,
            Region::Intermediate(i) => self.segments[i].kind.omega_squared(t, self.m0),
        }
    }

    /// `ω(t)`, or [`ProtocolError::ExpulsiveRegime`] if `ω(t)² < 0`.
    pub fn eval_omega(&self, t: f64) -> Result<f64, ProtocolError> {
        let w2 = self.omega_squared(t);
        if w2 < 0.0 {
            Err(ProtocolError::ExpulsiveRegime {
                intervals: vec![(t, t)],
                min_omega_sq: w2,
            })
        } else {
            Ok(w2.sqrt())
        }
    }

    /// Instants in `(0, τ]` where `ω` may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.end).collect()
    }
}

/// `ω(t)` recovered from an amplitude profile, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    pub t: Vec<f64>,
    pub rho: Vec<RhoSample>,
    pub omega_sq: Vec<f64>,
    /// Maximal runs of consecutive grid points with `ω² < 0`.
    pub expulsive: Vec<(f64, f64)>,
}

impl FrequencyProfile {
    pub fn omega(&self, i: usize) -> Option<f64> {
        let w2 = self.omega_sq[i];
        (w2 >= 0.0).then(|| w2.sqrt())
    }

    pub fn min_omega_sq(&self) -> f64 {
        self.omega_sq.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn negative_runs(t: &[f64], w2: &[f64]) -> Vec<(f64, f64)> {
    let mut runs = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for (ti, wi) in t.iter().zip(w2) {
        if *wi < 0.0 {
            open = Some(match open {
                Some((a, _)) => (a, *ti),
                None => (*ti, *ti),
            });
        } else if let Some(run) = open.take() {
            runs.push(run);
        }
    }
    runs.extend(open);
    runs
}

/// Invert the Ermakov-Pinney equation: `ω(t) = √(1/(m₀²ρ⁴) − ρ̈/ρ)` on `grid`.
pub fn omega_from_rho(
    profile: &RhoProfile,
    m0: f64,
    grid: &[f64],
    policy: ExpulsivePolicy,
) -> Result<FrequencyProfile, ProtocolError> {
    check_positive("m0", m0)?;
    let rho: Vec<RhoSample> = grid.iter().map(|&t| profile.eval(t)).collect();
    if let Some((t, _)) = grid.iter().zip(&rho).find(|(_, s)| !(s.rho > 0.0)) {
        return Err(ProtocolError::NonPositiveRho { t: *t });
    }
    let omega_sq: Vec<f64> = rho.iter().map(|s| s.omega_squared(m0)).collect();
    let expulsive = negative_runs(grid, &omega_sq);
    if policy == ExpulsivePolicy::Error && !expulsive.is_empty() {
        let min_omega_sq = omega_sq.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(ProtocolError::ExpulsiveRegime {
            intervals: expulsive,
            min_omega_sq,
        });
    }
    Ok(FrequencyProfile {
        t: grid.to_vec(),
        rho,
        omega_sq,
        expulsive,
    })
}
