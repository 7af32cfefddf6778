//! Closed-form amplitude after the modulation, `t > τ`, where `ω = ω_f`.

use super::ErmakovError;

/// `ρ_f(t) = √(A_f sin²(ω_f t) + B_f cos²(ω_f t) + 2C_f sin(ω_f t) cos(ω_f t))`,
/// matched to `ρ(τ) = δ`, `ρ̇(τ) = ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalSegment {
    pub af: f64,
    pub bf: f64,
    pub cf: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub omegaf: f64,
    pub tau: f64,
    pub m0: f64,
}

pub fn final_segment(
    delta: f64,
    epsilon: f64,
    omegaf: f64,
    tau: f64,
    m0: f64,
) -> Result<FinalSegment, ErmakovError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(ErmakovError::InvalidState(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if !(omegaf > 0.0) || !(m0 > 0.0) {
        return Err(ErmakovError::InvalidState(format!(
            "omegaf and m0 must be positive ({omegaf}, {m0})"
        )));
    }
    let w = omegaf;
    let (s1, c1) = (w * tau).sin_cos();
    let (s2, c2) = (2.0 * w * tau).sin_cos();
    let d2 = delta * delta;
    let bracket = epsilon * epsilon / (w * w) + 1.0 / (m0 * m0 * w * w * d2) - d2;
    let cross = epsilon * delta * s2 / w;
    let af = bracket * c1 * c1 + d2 + cross;
    let bf = bracket * s1 * s1 + d2 - cross;
    let cf = (m0 * m0 * (w * w * d2 * d2 - epsilon * epsilon * d2) - 1.0) * s2
        / (2.0 * m0 * m0 * w * w * d2)
        + epsilon * delta * c2 / w;
    Ok(FinalSegment {
        af,
        bf,
        cf,
        delta,
        epsilon,
        omegaf,
        tau,
        m0,
    })
}

impl FinalSegment {
    /// `A_f B_f − C_f²`; equals `1/(m₀ω_f)²`.
    pub fn invariant(&self) -> f64 {
        self.af * self.bf - self.cf * self.cf
    }

    /// `(ρ_f, ρ̇_f, ρ̈_f)` at `t`.
    pub fn sample(&self, t: f64) -> (f64, f64, f64) {
        let w = self.omegaf;
        let (s, c) = (w * t).sin_cos();
        let (s2, c2) = (2.0 * w * t).sin_cos();
        let q = self.af * s * s + self.bf * c * c + self.cf * s2;
        let q1 = w * (self.af - self.bf) * s2 + 2.0 * w * self.cf * c2;
        let q2 = 2.0 * w * w * (self.af - self.bf) * c2 - 4.0 * w * w * self.cf * s2;
        let rho = q.max(0.0).sqrt();
        let rho_dot = q1 / (2.0 * rho);
        let rho_ddot = (0.5 * q2 - rho_dot * rho_dot) / rho;
        (rho, rho_dot, rho_ddot)
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.sample(t).0
    }

    pub fn rho_dot(&self, t: f64) -> f64 {
        self.sample(t).1
    }

    /// `m₀²ρ̇² + 1/ρ² + m₀²ω_f²ρ²`, conserved along the final segment.
    pub fn conserved(&self, t: f64) -> f64 {
        let (rho, rho_dot, _) = self.sample(t);
        let m = self.m0;
        m * m * rho_dot * rho_dot
            + 1.0 / (rho * rho)
            + m * m * self.omegaf * self.omegaf * rho * rho
    }
}
