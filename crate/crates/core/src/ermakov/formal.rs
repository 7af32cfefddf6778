//! Formal construction `ρ² = A u² + B v² + 2C uv` from two classical solutions.

use super::ErmakovError;

/// Two solutions of `z̈ + ω²z = 0` (values and derivatives) at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalPair {
    pub u: f64,
    pub u_dot: f64,
    pub v: f64,
    pub v_dot: f64,
}

impl ClassicalPair {
    pub fn wronskian(&self) -> f64 {
        self.u * self.v_dot - self.u_dot * self.v
    }

    /// `sin(ωΔ), cos(ωΔ)` started at the beginning of a constant-frequency stretch.
    pub fn harmonic(omega: f64, elapsed: f64) -> Self {
        let (s, c) = (omega * elapsed).sin_cos();
        Self {
            u: s,
            u_dot: omega * c,
            v: c,
            v_dot: -omega * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormalCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Wronskian of the pair the coefficients were built from.
    pub wronskian: f64,
    pub m0: f64,
}

fn check_wronskian(pair: &ClassicalPair) -> Result<f64, ErmakovError> {
    let w = pair.wronskian();
    let scale = (pair.u * pair.v_dot).abs() + (pair.u_dot * pair.v).abs();
    if !(w.abs() > 1e-12 * scale) || !w.is_finite() {
        return Err(ErmakovError::DegenerateSolutions { wronskian: w });
    }
    Ok(w)
}

/// Coefficients for the initial conditions `ρ(0) = ρ₀ = 1/√(m₀ω₀)`, `ρ̇(0) = 0`.
pub fn formal_coefficients(
    pair_at_zero: &ClassicalPair,
    m0: f64,
    omega0: f64,
) -> Result<FormalCoefficients, ErmakovError> {
    let w = check_wronskian(pair_at_zero)?;
    let ClassicalPair { u, u_dot, v, v_dot } = *pair_at_zero;
    let denom = m0 * omega0 * w * w;
    let w02 = omega0 * omega0;
    Ok(FormalCoefficients {
        a: (w02 * v * v + v_dot * v_dot) / denom,
        b: (w02 * u * u + u_dot * u_dot) / denom,
        c: -(w02 * u * v + u_dot * v_dot) / denom,
        wronskian: w,
        m0,
    })
}

impl FormalCoefficients {
    /// Coefficients matching an arbitrary state `(ρ, ρ̇)` at the instant where
    /// the classical pair takes the values `pair`.
    pub fn from_state(
        pair: &ClassicalPair,
        rho: f64,
        rho_dot: f64,
        m0: f64,
    ) -> Result<Self, ErmakovError> {
        if !(rho > 0.0) {
            return Err(ErmakovError::InvalidState(format!(
                "rho must be positive, got {rho}"
            )));
        }
        let w = check_wronskian(pair)?;
        let ClassicalPair { u, u_dot, v, v_dot } = *pair;
        let x = v_dot * rho - v * rho_dot;
        let y = u_dot * rho - u * rho_dot;
        let k = 1.0 / (m0 * m0 * rho * rho);
        let w2 = w * w;
        Ok(Self {
            a: (x * x + k * v * v) / w2,
            b: (y * y + k * u * u) / w2,
            c: -(x * y + k * u * v) / w2,
            wronskian: w,
            m0,
        })
    }

    /// `AB − C²`, which equals `1/(m₀W)²` for a consistent construction.
    pub fn invariant(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    /// `(ρ, ρ̇, ρ̈)` given the pair at time `t` and `ω(t)²`.
    pub fn evaluate(&self, pair: &ClassicalPair, omega_sq: f64) -> (f64, f64, f64) {
        let ClassicalPair { u, u_dot, v, v_dot } = *pair;
        let (u_dd, v_dd) = (-omega_sq * u, -omega_sq * v);
        let q = self.a * u * u + self.b * v * v + 2.0 * self.c * u * v;
        let q1 = 2.0 * (self.a * u * u_dot + self.b * v * v_dot + self.c * (u_dot * v + u * v_dot));
        let q2 = 2.0
            * (self.a * (u_dot * u_dot + u * u_dd)
                + self.b * (v_dot * v_dot + v * v_dd)
                + self.c * (u_dd * v + 2.0 * u_dot * v_dot + u * v_dd));
        let rho = q.max(0.0).sqrt();
        let rho_dot = q1 / (2.0 * rho);
        let rho_ddot = (0.5 * q2 - rho_dot * rho_dot) / rho;
        (rho, rho_dot, rho_ddot)
    }
}
