//! Energy-reducing three-piece amplitude: quintic caps around a square-root
//! middle section.
//!
//! In the reduced time `s = t/τ` and amplitude `y = ρ/ρ₀`,
//! ```text
//!   y(s) = Σ c_l s^l                       0 < s ≤ σ
//!   y(s) = √((B² − (ω₀τ)²) s² + 2Bs + 1)   σ < s ≤ 1 − σ
//!   y(s) = Σ d_l s^l                       1 − σ < s ≤ 1
//! ```
//! with `B = √((ω₀τ)² + ω₀/ω_f) − 1`. The caps are C² at both joints and meet
//! `(1, 0, 0)` at `s = 0` and the prescribed `(δ, ε, γ)` at `s = 1`.
//!
//! Each cap is fitted and evaluated in its own unit variable `u ∈ [0, 1]`; the
//! powers of `s` in `c_l`, `d_l` are derived from those for reporting only, as
//! the trailing cap in powers of `s` cancels badly.

use serde::{Deserialize, Serialize};

use super::{ProtocolError, RhoSample};
use crate::linalg::solve_dense;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiOptimalSpec {
    pub omega0: f64,
    pub omegaf: f64,
    pub tau: f64,
    /// Fraction of `τ` covered by each quintic cap, in `(0, 1/2)`.
    pub sigma: f64,
    pub m0: f64,
    /// ρ at τ; `1/√(m₀ω_f)` when constructed with [`QuasiOptimalSpec::new`].
    pub delta: f64,
    /// dρ/dt at τ.
    pub epsilon: f64,
    /// d²ρ/dt² at τ.
    pub gamma: f64,
}

impl QuasiOptimalSpec {
    /// Spec ending on the adiabatic amplitude with zero slope and curvature.
    pub fn new(omega0: f64, omegaf: f64, tau: f64, sigma: f64, m0: f64) -> Self {
        Self {
            omega0,
            omegaf,
            tau,
            sigma,
            m0,
            delta: 1.0 / (m0 * omegaf).sqrt(),
            epsilon: 0.0,
            gamma: 0.0,
        }
    }

    pub fn with_endpoint(mut self, delta: f64, epsilon: f64, gamma: f64) -> Self {
        self.delta = delta;
        self.epsilon = epsilon;
        self.gamma = gamma;
        self
    }

    pub fn b_param(&self) -> f64 {
        let wt = self.omega0 * self.tau;
        (wt * wt + self.omega0 / self.omegaf).sqrt() - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiOptimalRho {
    pub spec: QuasiOptimalSpec,
    pub rho0: f64,
    pub b: f64,
    /// Leading cap coefficients, ascending powers of `s`.
    pub c: [f64; 6],
    /// Trailing cap coefficients, ascending powers of `s`.
    pub d: [f64; 6],
    /// Leading cap in powers of `u = s/σ`.
    lead: [f64; 6],
    /// Trailing cap in powers of `u = (s − 1 + σ)/σ`.
    trail: [f64; 6],
}

fn poly(coeffs: &[f64; 6], s: f64) -> [f64; 3] {
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (l, c) in coeffs.iter().enumerate().rev() {
        let lf = l as f64;
        v = v * s + c;
        if l >= 1 {
            d1 = d1 * s + lf * c;
        }
        if l >= 2 {
            d2 = d2 * s + lf * (lf - 1.0) * c;
        }
    }
    [v, d1, d2]
}

fn monomial_row(s: f64) -> [[f64; 6]; 3] {
    let mut rows = [[0.0; 6]; 3];
    for l in 0..6 {
        let lf = l as f64;
        rows[0][l] = s.powi(l as i32);
        rows[1][l] = if l >= 1 {
            lf * s.powi(l as i32 - 1)
        } else {
            0.0
        };
        rows[2][l] = if l >= 2 {
            lf * (lf - 1.0) * s.powi(l as i32 - 2)
        } else {
            0.0
        };
    }
    rows
}

/// Quintic on `u ∈ [0, 1]` matching `s`-derivatives at both ends of a cap of width `width`.
fn fit_quintic(at_a: [f64; 3], at_b: [f64; 3], width: f64) -> Option<[f64; 6]> {
    let ra = monomial_row(0.0);
    let rb = monomial_row(1.0);
    let m = [ra[0], ra[1], ra[2], rb[0], rb[1], rb[2]];
    let w2 = width * width;
    let rhs = [
        at_a[0],
        at_a[1] * width,
        at_a[2] * w2,
        at_b[0],
        at_b[1] * width,
        at_b[2] * w2,
    ];
    solve_dense(m, rhs, 1e-13)
}

/// `s`-derivatives of a cap stored in `u = (s − start)/width`.
fn cap(local: &[f64; 6], start: f64, width: f64, s: f64) -> [f64; 3] {
    let [v, d1, d2] = poly(local, (s - start) / width);
    [v, d1 / width, d2 / (width * width)]
}

/// Powers of `s` for a quintic stored in `u = (s − start)/width`.
fn to_s_powers(local: &[f64; 6], start: f64, width: f64) -> [f64; 6] {
    // ((s − start)/width)^k expanded binomially
    let mut out = [0.0; 6];
    for (k, a) in local.iter().enumerate() {
        let scale = a / width.powi(k as i32);
        let mut binom = 1.0;
        for i in 0..=k {
            out[i] += scale * binom * (-start).powi((k - i) as i32);
            binom *= (k - i) as f64 / (i + 1) as f64;
        }
    }
    out
}

impl QuasiOptimalRho {
    fn middle(&self, s: f64) -> [f64; 3] {
        let wt = self.spec.omega0 * self.spec.tau;
        let a2 = self.b * self.b - wt * wt;
        let p = a2 * s * s + 2.0 * self.b * s + 1.0;
        let dp = 2.0 * a2 * s + 2.0 * self.b;
        let f = p.sqrt();
        let f1 = dp / (2.0 * f);
        let f2 = (a2 - f1 * f1) / f;
        [f, f1, f2]
    }

    /// Reduced amplitude `y(s)` and its first two `s`-derivatives.
    pub fn reduced(&self, s: f64) -> [f64; 3] {
        let sigma = self.spec.sigma;
        if s <= sigma {
            cap(&self.lead, 0.0, sigma, s)
        } else if s <= 1.0 - sigma {
            self.middle(s)
        } else {
            cap(&self.trail, 1.0 - sigma, sigma, s)
        }
    }

    pub fn eval(&self, t: f64) -> RhoSample {
        let tau = self.spec.tau;
        let [y, y1, y2] = self.reduced(t / tau);
        RhoSample {
            rho: self.rho0 * y,
            rho_dot: self.rho0 * y1 / tau,
            rho_ddot: self.rho0 * y2 / (tau * tau),
        }
    }

    /// Largest relative mismatch in value, slope and curvature across the two joints.
    pub fn stitch_residual(&self) -> f64 {
        let sigma = self.spec.sigma;
        let mut worst: f64 = 0.0;
        let joints = [
            (sigma, cap(&self.lead, 0.0, sigma, sigma)),
            (
                1.0 - sigma,
                cap(&self.trail, 1.0 - sigma, sigma, 1.0 - sigma),
            ),
        ];
        for (s, a) in joints {
            let b = self.middle(s);
            for k in 0..3 {
                worst = worst.max((a[k] - b[k]).abs() / b[k].abs().max(1.0));
            }
        }
        worst
    }
}

pub fn quasi_optimal_rho(spec: &QuasiOptimalSpec) -> Result<QuasiOptimalRho, ProtocolError> {
    let positive = [spec.omega0, spec.omegaf, spec.tau, spec.m0, spec.delta];
    if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(ProtocolError::InvalidParameter(format!(
            "quasi-optimal profile needs omega0, omegaf, tau, m0, delta > 0: {spec:?}"
        )));
    }
    if !(spec.sigma > 0.0 && spec.sigma < 0.5) {
        return Err(ProtocolError::InvalidParameter(format!(
            "sigma must lie in (0, 1/2), got {}",
            spec.sigma
        )));
    }
    let rho0 = 1.0 / (spec.m0 * spec.omega0).sqrt();
    let mut out = QuasiOptimalRho {
        spec: *spec,
        rho0,
        b: spec.b_param(),
        c: [0.0; 6],
        d: [0.0; 6],
        lead: [0.0; 6],
        trail: [0.0; 6],
    };

    // The square-root section must stay real on its support.
    let wt = spec.omega0 * spec.tau;
    let a2 = out.b * out.b - wt * wt;
    let p = |s: f64| a2 * s * s + 2.0 * out.b * s + 1.0;
    let mut p_min = p(spec.sigma).min(p(1.0 - spec.sigma));
    if a2 > 0.0 {
        let vertex = -out.b / a2;
        if vertex > spec.sigma && vertex < 1.0 - spec.sigma {
            p_min = p_min.min(p(vertex));
        }
    }
    if !(p_min > 0.0) {
        return Err(ProtocolError::InvalidParameter(format!(
            "square-root section of the quasi-optimal profile is not real (min radicand {p_min})"
        )));
    }

    let start = [1.0, 0.0, 0.0];
    let end = [
        spec.delta / rho0,
        spec.epsilon * spec.tau / rho0,
        spec.gamma * spec.tau * spec.tau / rho0,
    ];
    let singular =
        || ProtocolError::InvalidParameter("quasi-optimal cap system is singular".into());
    let sigma = spec.sigma;
    out.lead = fit_quintic(start, out.middle(sigma), sigma).ok_or_else(singular)?;
    out.trail = fit_quintic(out.middle(1.0 - sigma), end, sigma).ok_or_else(singular)?;
    out.c = to_s_powers(&out.lead, 0.0, sigma);
    out.d = to_s_powers(&out.trail, 1.0 - sigma, sigma);
    Ok(out)
}
