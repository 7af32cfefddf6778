use serde::{Deserialize, Serialize};

use super::{
    final_segment, relative_residual, residual, ClassicalPair, ErmakovError, ErmakovState,
    FormalCoefficients,
};
use crate::integrate::{DormandPrince, IntegrationError};
use crate::protocols::{
    ExpulsivePolicy, FrequencyProtocol, ProtocolError, Region, RhoProfile, SegmentKind,
};

/// Relative tolerance for accepting a prescribed profile as the continuation
/// of the incoming state.
const PROFILE_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Adaptive Dormand-Prince integration of the nonlinear equation.
    #[default]
    Ode,
    /// Classical-solution construction, closed forms on constant stretches.
    Formal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// `ρ` must stay within `[lo·ρ_init, hi·ρ_init]`.
    pub rho_guard: (f64, f64),
    pub expulsive: ExpulsivePolicy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            rho_guard: (1e-6, 1e6),
            expulsive: ExpulsivePolicy::Record,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    fn stepper(&self) -> DormandPrince {
        DormandPrince {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            h_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub rho: f64,
    pub rho_dot: f64,
    /// Independent estimate of `ρ̈`: analytic on the formal route, the derivative
    /// of the dense-output interpolant on the ODE route.
    pub rho_ddot: f64,
    pub omega_sq: f64,
    pub region: Region,
}

impl TrajectoryPoint {
    pub fn state(&self) -> ErmakovState {
        ErmakovState {
            t: self.t,
            rho: self.rho,
            rho_dot: self.rho_dot,
        }
    }

    pub fn residual(&self, m0: f64) -> f64 {
        residual(self.rho, self.rho_ddot, self.omega_sq, m0)
    }

    pub fn relative_residual(&self, m0: f64) -> f64 {
        relative_residual(self.rho, self.rho_ddot, self.omega_sq, m0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmakovTrajectory {
    pub route: Route,
    pub m0: f64,
    pub points: Vec<TrajectoryPoint>,
    /// State at the far end of the solve (`t_end`).
    pub end: ErmakovState,
}

impl ErmakovTrajectory {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn states(&self) -> Vec<ErmakovState> {
        self.points.iter().map(TrajectoryPoint::state).collect()
    }

    pub fn segment_tags(&self) -> Vec<String> {
        self.points.iter().map(|p| p.region.tag()).collect()
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.relative_residual(self.m0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
enum PieceKind<'a> {
    Harmonic(f64),
    Ramp { omega: f64, scale: f64 },
    Profile(&'a RhoProfile),
}

#[derive(Debug, Clone, Copy)]
struct Piece<'a> {
    start: f64,
    end: f64,
    region: Region,
    kind: PieceKind<'a>,
}

impl PieceKind<'_> {
    fn omega_sq(&self, t: f64, m0: f64) -> f64 {
        match *self {
            PieceKind::Harmonic(w) => w * w,
            PieceKind::Ramp { omega, scale } => {
                let w = omega * (t / scale).exp();
                w * w
            }
            PieceKind::Profile(p) => p.eval(t).omega_squared(m0),
        }
    }
}

fn pieces(protocol: &FrequencyProtocol) -> Vec<Piece<'_>> {
    let mut out = vec![Piece {
        start: f64::NEG_INFINITY,
        end: 0.0,
        region: Region::Initial,
        kind: PieceKind::Harmonic(protocol.omega0),
    }];
    for (i, seg) in protocol.segments.iter().enumerate() {
        let kind = match &seg.kind {
            SegmentKind::Constant { omega } => PieceKind::Harmonic(*omega),
            SegmentKind::ExponentialRamp { omega, scale } => PieceKind::Ramp {
                omega: *omega,
                scale: *scale,
            },
            SegmentKind::FromRho(p) => PieceKind::Profile(p),
        };
        out.push(Piece {
            start: seg.start,
            end: seg.end,
            region: Region::Intermediate(i),
            kind,
        });
    }
    out.push(Piece {
        start: protocol.tau,
        end: f64::INFINITY,
        region: Region::Final,
        kind: PieceKind::Harmonic(protocol.omegaf),
    });
    out
}

fn check_grid(grid: &[f64]) -> Result<(), ErmakovError> {
    if let Some(bad) = grid.iter().find(|t| !t.is_finite()) {
        return Err(ErmakovError::InvalidGrid(format!("non-finite time {bad}")));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(ErmakovError::InvalidGrid(format!(
            "grid must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

struct Walker<'a> {
    protocol: &'a FrequencyProtocol,
    route: Route,
    opts: SolverOptions,
    rho_bounds: (f64, f64),
}

impl Walker<'_> {
    fn m0(&self) -> f64 {
        self.protocol.m0
    }

    fn map_integration(err: IntegrationError) -> ErmakovError {
        match err {
            IntegrationError::GuardViolation { t, state } => {
                ErmakovError::BlowUp { t, rho: state[0] }
            }
            other => ErmakovError::StepFailure(other),
        }
    }

    fn ode_piece(
        &self,
        piece: &Piece<'_>,
        state: ErmakovState,
        hi: f64,
        times: &[f64],
        out: &mut Vec<TrajectoryPoint>,
    ) -> Result<ErmakovState, ErmakovError> {
        let m0 = self.m0();
        let kind = piece.kind;
        let rhs = |t: f64, y: &[f64; 2]| {
            [
                y[1],
                -kind.omega_sq(t, m0) * y[0] + 1.0 / (m0 * m0 * y[0].powi(3)),
            ]
        };
        let (lo_rho, hi_rho) = self.rho_bounds;
        let admissible =
            |y: &[f64; 2]| y[0].is_finite() && y[1].is_finite() && y[0] >= lo_rho && y[0] <= hi_rho;
        let stepper = self.opts.stepper();
        let y0 = [state.rho, state.rho_dot];
        let sol = if times.is_empty() {
            stepper.integrate(rhs, state.t, y0, hi, times, admissible)
        } else {
            // sampled ρ̈ comes from the interpolant, so its defect is held to the
            // size of the terms of the equation
            let scale = |t: f64, y: &[f64; 2]| {
                let (spring, barrier) = (
                    (kind.omega_sq(t, m0) * y[0]).abs(),
                    1.0 / (m0 * m0 * y[0].powi(3)),
                );
                [y[1].abs(), spring + barrier + (barrier - spring).abs()]
            };
            stepper.integrate_with_defect(rhs, state.t, y0, hi, times, admissible, scale)
        }
        .map_err(Self::map_integration)?;
        for s in &sol.samples {
            out.push(TrajectoryPoint {
                t: s.t,
                rho: s.y[0],
                rho_dot: s.y[1],
                rho_ddot: s.dy[1],
                omega_sq: kind.omega_sq(s.t, m0),
                region: piece.region,
            });
        }
        Ok(ErmakovState {
            t: hi,
            rho: sol.y_end[0],
            rho_dot: sol.y_end[1],
        })
    }

    fn formal_piece(
        &self,
        piece: &Piece<'_>,
        state: ErmakovState,
        hi: f64,
        times: &[f64],
        out: &mut Vec<TrajectoryPoint>,
    ) -> Result<ErmakovState, ErmakovError> {
        let m0 = self.m0();
        let lo = state.t;
        let mut push = |t: f64, (rho, rho_dot, rho_ddot): (f64, f64, f64), omega_sq: f64| {
            out.push(TrajectoryPoint {
                t,
                rho,
                rho_dot,
                rho_ddot,
                omega_sq,
                region: piece.region,
            });
        };
        match piece.kind {
            PieceKind::Harmonic(w) if piece.region == Region::Final && lo == self.protocol.tau => {
                let fs = final_segment(state.rho, state.rho_dot, w, lo, m0)?;
                for &t in times {
                    push(t, fs.sample(t), w * w);
                }
                let (rho, rho_dot, _) = fs.sample(hi);
                Ok(ErmakovState {
                    t: hi,
                    rho,
                    rho_dot,
                })
            }
            PieceKind::Harmonic(w) => {
                let fc = FormalCoefficients::from_state(
                    &ClassicalPair::harmonic(w, 0.0),
                    state.rho,
                    state.rho_dot,
                    m0,
                )?;
                for &t in times {
                    push(
                        t,
                        fc.evaluate(&ClassicalPair::harmonic(w, t - lo), w * w),
                        w * w,
                    );
                }
                let (rho, rho_dot, _) = fc.evaluate(&ClassicalPair::harmonic(w, hi - lo), w * w);
                Ok(ErmakovState {
                    t: hi,
                    rho,
                    rho_dot,
                })
            }
            PieceKind::Ramp { .. } => {
                let kind = piece.kind;
                let start = ClassicalPair {
                    u: 0.0,
                    u_dot: 1.0,
                    v: 1.0,
                    v_dot: 0.0,
                };
                let fc = FormalCoefficients::from_state(&start, state.rho, state.rho_dot, m0)?;
                let rhs = |t: f64, y: &[f64; 4]| {
                    let w2 = kind.omega_sq(t, m0);
                    [y[1], -w2 * y[0], y[3], -w2 * y[2]]
                };
                let sol = self
                    .opts
                    .stepper()
                    .integrate(rhs, lo, [0.0, 1.0, 1.0, 0.0], hi, times, |y: &[f64; 4]| {
                        y.iter().all(|v| v.is_finite())
                    })
                    .map_err(Self::map_integration)?;
                let pair = |y: &[f64; 4]| ClassicalPair {
                    u: y[0],
                    u_dot: y[1],
                    v: y[2],
                    v_dot: y[3],
                };
                for s in &sol.samples {
                    let w2 = kind.omega_sq(s.t, m0);
                    push(s.t, fc.evaluate(&pair(&s.y), w2), w2);
                }
                let (rho, rho_dot, _) = fc.evaluate(&pair(&sol.y_end), kind.omega_sq(hi, m0));
                Ok(ErmakovState {
                    t: hi,
                    rho,
                    rho_dot,
                })
            }
            PieceKind::Profile(profile) => {
                let at_lo = profile.eval(lo);
                let scale_rho = state.rho.abs().max(at_lo.rho.abs());
                let scale_dot = scale_rho / (piece.end - piece.start).max(f64::MIN_POSITIVE)
                    + state.rho_dot.abs();
                if (at_lo.rho - state.rho).abs() > PROFILE_MATCH * scale_rho
                    || (at_lo.rho_dot - state.rho_dot).abs() > PROFILE_MATCH * scale_dot
                {
                    return Err(ErmakovError::ProfileMismatch {
                        t: lo,
                        expected: (at_lo.rho, at_lo.rho_dot),
                        got: (state.rho, state.rho_dot),
                    });
                }
                for &t in times {
                    let s = profile.eval(t);
                    if !(s.rho > 0.0) {
                        return Err(ProtocolError::NonPositiveRho { t }.into());
                    }
                    push(t, (s.rho, s.rho_dot, s.rho_ddot), s.omega_squared(m0));
                }
                let s = profile.eval(hi);
                if !(s.rho > 0.0) {
                    return Err(ProtocolError::NonPositiveRho { t: hi }.into());
                }
                Ok(ErmakovState {
                    t: hi,
                    rho: s.rho,
                    rho_dot: s.rho_dot,
                })
            }
        }
    }

    /// Carry `initial` forward to `t_end`, sampling at `times` (all in `(initial.t, t_end]`).
    fn run(
        &self,
        initial: ErmakovState,
        times: &[f64],
        t_end: f64,
    ) -> Result<(Vec<TrajectoryPoint>, ErmakovState), ErmakovError> {
        let mut out = Vec::with_capacity(times.len());
        let mut state = initial;
        let mut rest = times;
        for piece in pieces(self.protocol) {
            if state.t >= t_end {
                break;
            }
            if piece.end <= state.t {
                continue;
            }
            let hi = piece.end.min(t_end);
            let n = rest.partition_point(|&t| t <= hi);
            let (here, later) = rest.split_at(n);
            rest = later;
            state = match self.route {
                Route::Ode => self.ode_piece(&piece, state, hi, here, &mut out)?,
                Route::Formal => self.formal_piece(&piece, state, hi, here, &mut out)?,
            };
            if !(state.rho > 0.0) || !state.rho.is_finite() {
                return Err(ErmakovError::BlowUp {
                    t: hi,
                    rho: state.rho,
                });
            }
        }
        Ok((out, state))
    }
}

fn check_expulsive(
    points: &[TrajectoryPoint],
    policy: ExpulsivePolicy,
) -> Result<(), ErmakovError> {
    if policy != ExpulsivePolicy::Error {
        return Ok(());
    }
    let t: Vec<f64> = points.iter().map(|p| p.t).collect();
    let w2: Vec<f64> = points.iter().map(|p| p.omega_sq).collect();
    let min_omega_sq = w2.iter().copied().fold(f64::INFINITY, f64::min);
    if min_omega_sq < 0.0 {
        let mut intervals = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        for (ti, wi) in t.iter().zip(&w2) {
            if *wi < 0.0 {
                open = Some(open.map_or((*ti, *ti), |(a, _)| (a, *ti)));
            } else if let Some(run) = open.take() {
                intervals.push(run);
            }
        }
        intervals.extend(open);
        return Err(ProtocolError::ExpulsiveRegime {
            intervals,
            min_omega_sq,
        }
        .into());
    }
    Ok(())
}

/// Propagate an arbitrary `initial` state to `t_end` along `route`, sampling at
/// `grid` (strictly increasing, inside `[initial.t, t_end]`).
pub fn propagate(
    protocol: &FrequencyProtocol,
    initial: ErmakovState,
    t_end: f64,
    grid: &[f64],
    route: Route,
    opts: &SolverOptions,
) -> Result<ErmakovTrajectory, ErmakovError> {
    let initial = ErmakovState::new(initial.t, initial.rho, initial.rho_dot)?;
    check_grid(grid)?;
    if !(t_end >= initial.t) {
        return Err(ErmakovError::InvalidGrid(format!(
            "t_end = {t_end} precedes the initial time {}",
            initial.t
        )));
    }
    if let (Some(first), Some(last)) = (grid.first(), grid.last()) {
        if *first < initial.t || *last > t_end {
            return Err(ErmakovError::InvalidGrid(format!(
                "grid [{first}, {last}] is not inside [{}, {t_end}]",
                initial.t
            )));
        }
    }
    let walker = Walker {
        protocol,
        route,
        opts: *opts,
        rho_bounds: (
            opts.rho_guard.0 * initial.rho,
            opts.rho_guard.1 * initial.rho,
        ),
    };
    let m0 = protocol.m0;
    let mut points = Vec::with_capacity(grid.len());
    let at_start = grid.partition_point(|&t| t <= initial.t);
    for &t in &grid[..at_start] {
        let w2 = protocol.omega_squared(t);
        let rho_ddot = -w2 * initial.rho + 1.0 / (m0 * m0 * initial.rho.powi(3));
        points.push(TrajectoryPoint {
            t,
            rho: initial.rho,
            rho_dot: initial.rho_dot,
            rho_ddot,
            omega_sq: w2,
            region: protocol.region(t),
        });
    }
    let (rest, end) = walker.run(initial, &grid[at_start..], t_end)?;
    points.extend(rest);
    check_expulsive(&points, opts.expulsive)?;
    Ok(ErmakovTrajectory {
        route,
        m0,
        points,
        end,
    })
}

/// ODE route from an arbitrary initial state.
pub fn integrate_ep(
    protocol: &FrequencyProtocol,
    initial: ErmakovState,
    t_end: f64,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<ErmakovTrajectory, ErmakovError> {
    propagate(protocol, initial, t_end, grid, Route::Ode, opts)
}

/// Trajectory of a trap that sat at rest in `ω₀` for all `t ≤ 0`. Grid points
/// at or before `0` report the stationary amplitude; the solve runs to
/// `max(τ, last grid point)`.
pub fn solve(
    protocol: &FrequencyProtocol,
    grid: &[f64],
    route: Route,
    opts: &SolverOptions,
) -> Result<ErmakovTrajectory, ErmakovError> {
    check_grid(grid)?;
    let m0 = protocol.m0;
    let rest = ErmakovState::at_rest(0.0, m0, protocol.omega0);
    let split = grid.partition_point(|&t| t < 0.0);
    let t_end = grid
        .last()
        .copied()
        .unwrap_or(protocol.tau)
        .max(protocol.tau);
    let mut traj = propagate(protocol, rest, t_end, &grid[split..], route, opts)?;
    let w2 = protocol.omega0 * protocol.omega0;
    let before: Vec<TrajectoryPoint> = grid[..split]
        .iter()
        .map(|&t| TrajectoryPoint {
            t,
            rho: rest.rho,
            rho_dot: 0.0,
            rho_ddot: 0.0,
            omega_sq: w2,
            region: Region::Initial,
        })
        .collect();
    traj.points.splice(0..0, before);
    Ok(traj)
}

/// `(ρ(τ), ρ̇(τ))` starting from rest.
pub fn end_state(
    protocol: &FrequencyProtocol,
    route: Route,
    opts: &SolverOptions,
) -> Result<ErmakovState, ErmakovError> {
    let rest = ErmakovState::at_rest(0.0, protocol.m0, protocol.omega0);
    Ok(propagate(protocol, rest, protocol.tau, &[], route, opts)?.end)
}
