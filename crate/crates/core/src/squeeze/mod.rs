//! Squeezing observables of an oscillator whose state is parametrized by the
//! Ermakov amplitude.

mod transition;

pub use transition::{excitation_prob, ground_distribution, transition_prob};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ermakov::ErmakovState;
use crate::Units;

/// Below this `r` the squeezing phase is undefined.
pub const R_TOL: f64 = 1e-12;

/// Slack allowed when clamping arccos/arccosh arguments.
const CLAMP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqueezeError {
    #[error("non-physical state: lambda = {lambda} < 1")]
    NonPhysical { lambda: f64 },
    #[error("squeezing phase undefined for r = {r:e}")]
    PhaseUndefined { r: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn check_state(state: &ErmakovState, omega: f64, m0: f64) -> Result<(), SqueezeError> {
    if !(state.rho > 0.0)
        || !(omega > 0.0)
        || !(m0 > 0.0)
        || !state.rho_dot.is_finite()
        || !omega.is_finite()
    {
        return Err(SqueezeError::InvalidInput(format!(
            "need rho, omega, m0 > 0 (rho={}, rho_dot={}, omega={omega}, m0={m0})",
            state.rho, state.rho_dot
        )));
    }
    Ok(())
}

/// Dimensionless pair `x = m₀ωρ²`, `a = m₀ρρ̇` describing the state.
fn reduced(state: &ErmakovState, omega: f64, m0: f64) -> (f64, f64) {
    (
        m0 * omega * state.rho * state.rho,
        m0 * state.rho * state.rho_dot,
    )
}

/// `λ = (m₀²ρ̇² + 1/ρ² + m₀²ω²ρ² + 2m₀ω)/(4m₀ω) = cosh²r`.
pub fn lambda(state: &ErmakovState, omega: f64, m0: f64) -> Result<f64, SqueezeError> {
    check_state(state, omega, m0)?;
    let (rho, rd) = (state.rho, state.rho_dot);
    Ok((m0 * m0 * rd * rd
        + 1.0 / (rho * rho)
        + m0 * m0 * omega * omega * rho * rho
        + 2.0 * m0 * omega)
        / (4.0 * m0 * omega))
}

/// `λ − 1 = sinh²r`, as a sum of squares.
pub fn lambda_excess(state: &ErmakovState, omega: f64, m0: f64) -> Result<f64, SqueezeError> {
    check_state(state, omega, m0)?;
    let (rho, rd) = (state.rho, state.rho_dot);
    let gap = 1.0 / rho - m0 * omega * rho;
    Ok((m0 * m0 * rd * rd + gap * gap) / (4.0 * m0 * omega))
}

/// `r = arccosh(√λ)`.
pub fn squeeze_param(state: &ErmakovState, omega: f64, m0: f64) -> Result<f64, SqueezeError> {
    let eta = lambda_excess(state, omega, m0)?;
    if eta < -1e-9 {
        return Err(SqueezeError::NonPhysical { lambda: 1.0 + eta });
    }
    Ok(eta.max(0.0).sqrt().asinh())
}

/// `r = arccosh(√λ)` straight from a value of `λ`, clamping rounding just below 1.
pub fn r_from_lambda(lambda: f64) -> Result<f64, SqueezeError> {
    if lambda < 1.0 - 1e-9 || lambda.is_nan() {
        return Err(SqueezeError::NonPhysical { lambda });
    }
    Ok(lambda.max(1.0).sqrt().acosh())
}

/// `cos φ = (1 + m₀ωρ² − 2cosh²r)/(2 sinh r cosh r)`, evaluated through
/// `(x² − 1 − a²)/√((a² + (1−x)²)(a² + (1+x)²))` to avoid the small-`r` cancellation.
pub fn phase_cosine(state: &ErmakovState, omega: f64, m0: f64) -> Result<f64, SqueezeError> {
    check_state(state, omega, m0)?;
    let (x, a) = reduced(state, omega, m0);
    let a2 = a * a;
    let den = ((a2 + (1.0 - x) * (1.0 - x)) * (a2 + (1.0 + x) * (1.0 + x))).sqrt();
    if !(den > 0.0) {
        return Err(SqueezeError::PhaseUndefined { r: 0.0 });
    }
    let c = (x * x - 1.0 - a2) / den;
    if c.abs() > 1.0 + CLAMP_SLACK {
        return Err(SqueezeError::NonPhysical { lambda: f64::NAN });
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Principal squeezing phase in `[0, π]`.
pub fn squeeze_phase(
    state: &ErmakovState,
    omega: f64,
    m0: f64,
    r: f64,
) -> Result<f64, SqueezeError> {
    if !(r > R_TOL) {
        return Err(SqueezeError::PhaseUndefined { r });
    }
    Ok(phase_cosine(state, omega, m0)?.acos())
}

/// `(σ_x², σ_p²)` for the `n`-th state.
pub fn variances(n: u32, r: f64, phi: f64, omega: f64, units: Units) -> (f64, f64) {
    let (sh, ch) = (r.sinh(), r.cosh());
    let level = (n as f64 + 0.5) * units.hbar;
    let cross = 2.0 * sh * ch * phi.cos();
    let sx = (ch * ch + cross + sh * sh) * level / (units.m0 * omega);
    let sp = (ch * ch - cross + sh * sh) * level * units.m0 * omega;
    (sx, sp)
}

/// `E = cosh(2r)(n + ½)ħω`.
pub fn mean_energy(n: u32, r: f64, omega: f64, hbar: f64) -> f64 {
    (2.0 * r).cosh() * (n as f64 + 0.5) * hbar * omega
}

/// `σ_H² = (ħ²ω²/2)(n² + n + 1)(cosh²2r − 1)`.
pub fn energy_variance(n: u32, r: f64, omega: f64, hbar: f64) -> f64 {
    let nf = n as f64;
    let s = (2.0 * r).sinh();
    0.5 * hbar * hbar * omega * omega * (nf * nf + nf + 1.0) * s * s
}

/// `N = n + (2n + 1) sinh²r`.
pub fn mean_excitations(n: u32, r: f64) -> f64 {
    let sh = r.sinh();
    n as f64 + (2.0 * n as f64 + 1.0) * sh * sh
}

/// `Q* = cosh 2r`, written as `2N₀ + 1` with `N₀` the ground-state excitation number.
pub fn adiabaticity(r: f64) -> f64 {
    2.0 * mean_excitations(0, r) + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeRecord {
    pub t: f64,
    pub r: f64,
    pub phi: f64,
    pub sigma_x2: f64,
    pub sigma_p2: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "sigma_H2")]
    pub sigma_h2: f64,
    #[serde(rename = "N")]
    pub excitations: f64,
    #[serde(rename = "Qstar")]
    pub qstar: f64,
}

/// All observables of level `n` at one instant. The phase is reported as `0`
/// when `r` is too small for it to be defined.
pub fn record(
    state: &ErmakovState,
    omega: f64,
    n: u32,
    units: Units,
) -> Result<SqueezeRecord, SqueezeError> {
    let r = squeeze_param(state, omega, units.m0)?;
    let phi = match squeeze_phase(state, omega, units.m0, r) {
        Ok(phi) => phi,
        Err(SqueezeError::PhaseUndefined { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let (sigma_x2, sigma_p2) = variances(n, r, phi, omega, units);
    Ok(SqueezeRecord {
        t: state.t,
        r,
        phi,
        sigma_x2,
        sigma_p2,
        energy: mean_energy(n, r, omega, units.hbar),
        sigma_h2: energy_variance(n, r, omega, units.hbar),
        excitations: mean_excitations(n, r),
        qstar: adiabaticity(r),
    })
}

/// Time-independent squeezing after the modulation has ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalSqueeze {
    pub delta: f64,
    pub epsilon: f64,
    pub omegaf: f64,
    pub m0: f64,
    pub lambda_f: f64,
    pub r_f: f64,
}

/// `r_f` from the end-of-modulation state `(δ, ε)`.
pub fn final_squeeze(
    delta: f64,
    epsilon: f64,
    omegaf: f64,
    m0: f64,
) -> Result<FinalSqueeze, SqueezeError> {
    let state = ErmakovState {
        t: 0.0,
        rho: delta,
        rho_dot: epsilon,
    };
    let lambda_f = lambda(&state, omegaf, m0)?;
    let r_f = squeeze_param(&state, omegaf, m0)?;
    Ok(FinalSqueeze {
        delta,
        epsilon,
        omegaf,
        m0,
        lambda_f,
        r_f,
    })
}

impl FinalSqueeze {
    /// Argument of the arccos giving `φ_f(t)`, with `τ` the end of the modulation.
    pub fn phase_argument(&self, t: f64, tau: f64) -> Result<f64, SqueezeError> {
        if !(self.r_f > R_TOL) {
            return Err(SqueezeError::PhaseUndefined { r: self.r_f });
        }
        let (d, e, w, m) = (self.delta, self.epsilon, self.omegaf, self.m0);
        let (s2, c2) = (2.0 * w * (t - tau)).sin_cos();
        let bracket =
            (m * m * (w * w * d * d - e * e) - 1.0 / (d * d)) * c2 + 2.0 * m * m * w * e * d * s2;
        let arg = bracket / (self.r_f.cosh() * 4.0 * m * w * self.r_f.sinh());
        if arg.abs() > 1.0 + CLAMP_SLACK {
            return Err(SqueezeError::NonPhysical {
                lambda: self.lambda_f,
            });
        }
        Ok(arg.clamp(-1.0, 1.0))
    }

    /// `φ_f(t)` for `t > τ`, principal value, period `π/ω_f`.
    pub fn phase(&self, t: f64, tau: f64) -> Result<f64, SqueezeError> {
        Ok(self.phase_argument(t, tau)?.acos())
    }

    pub fn energy(&self, n: u32, hbar: f64) -> f64 {
        mean_energy(n, self.r_f, self.omegaf, hbar)
    }

    pub fn excitations(&self, n: u32) -> f64 {
        mean_excitations(n, self.r_f)
    }

    pub fn qstar(&self) -> f64 {
        adiabaticity(self.r_f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::final_segment;
    use std::f64::consts::{LN_2, PI};

    fn jump_state(w0: f64, m0: f64) -> ErmakovState {
        ErmakovState {
            t: 0.0,
            rho: 1.0 / (m0 * w0).sqrt(),
            rho_dot: 0.0,
        }
    }

    #[test]
    fn unsqueezed_fixed_point() {
        let s = jump_state(3.0, 1.2);
        assert_eq!(squeeze_param(&s, 3.0, 1.2).unwrap(), 0.0);
        assert!((lambda(&s, 3.0, 1.2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fourfold_jump_gives_ln2() {
        let s = jump_state(1.0, 1.0);
        assert!((lambda(&s, 4.0, 1.0).unwrap() - 25.0 / 16.0).abs() < 1e-15);
        let r = squeeze_param(&s, 4.0, 1.0).unwrap();
        assert!((r - LN_2).abs() < 1e-12);
        let phi = squeeze_phase(&s, 4.0, 1.0, r).unwrap();
        assert!(phi.abs() < 1e-12);
    }

    #[test]
    fn phase_undefined_without_squeezing() {
        let s = jump_state(1.0, 1.0);
        assert!(matches!(
            squeeze_phase(&s, 1.0, 1.0, 0.0),
            Err(SqueezeError::PhaseUndefined { .. })
        ));
    }

    #[test]
    fn stable_phase_matches_literal_formula() {
        let (m0, w) = (1.3, 2.1);
        for (rho, rd) in [(0.4, 0.3), (0.9, -1.2), (0.2, 0.0), (1.5, 2.0)] {
            let s = ErmakovState {
                t: 0.0,
                rho,
                rho_dot: rd,
            };
            let r = squeeze_param(&s, w, m0).unwrap();
            let (sh, ch) = (r.sinh(), r.cosh());
            let literal = (1.0 + m0 * w * rho * rho - 2.0 * ch * ch) / (2.0 * sh * ch);
            assert!((phase_cosine(&s, w, m0).unwrap() - literal).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_limits() {
        let u = Units { m0: 2.0, hbar: 1.5 };
        let w = 3.0;
        let (sx, sp) = variances(0, 0.0, 0.7, w, u);
        assert!((sx - u.hbar / (2.0 * u.m0 * w)).abs() < 1e-15);
        assert!((sp - u.hbar * u.m0 * w / 2.0).abs() < 1e-15);
        let (sx, sp) = variances(0, LN_2, 0.0, w, u);
        assert!((sx - 4.0 * u.hbar / (2.0 * u.m0 * w)).abs() < 1e-12);
        assert!((sp - 0.25 * u.hbar * u.m0 * w / 2.0).abs() < 1e-12);
        let r = 0.8;
        let (sx, sp) = variances(0, r, PI / 2.0, w, u);
        let expect = u.hbar * u.hbar / 4.0 * (2.0 * r).cosh().powi(2);
        assert!((sx * sp - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn energy_values() {
        assert_eq!(mean_energy(0, 0.0, 1.0, 1.0), 0.5);
        assert!((mean_energy(0, LN_2, 1.0, 1.0) - 1.0625).abs() < 1e-12);
        assert!(mean_energy(2, 0.1, 1.0, 1.0) > 2.5);
        assert_eq!(energy_variance(3, 0.0, 2.0, 1.0), 0.0);
        assert!((energy_variance(0, LN_2, 1.0, 1.0) - 1.7578125).abs() < 1e-12);
        let ratio = energy_variance(1, 0.4, 1.0, 1.0) / energy_variance(0, 0.4, 1.0, 1.0);
        assert!((ratio - 3.0).abs() < 1e-12);
    }

    #[test]
    fn excitation_values() {
        assert_eq!(mean_excitations(3, 0.0), 3.0);
        assert!((mean_excitations(0, LN_2) - 0.5625).abs() < 1e-12);
        for r in [0.0, 0.3, 1.7] {
            let via_energy = (mean_energy(0, r, 1.0, 1.0) - 0.5) / 1.0;
            assert!((via_energy - mean_excitations(0, r)).abs() < 1e-12);
            assert!((adiabaticity(r) - (2.0 * mean_excitations(0, r) + 1.0)).abs() < 1e-12);
        }
        assert_eq!(adiabaticity(0.0), 1.0);
        assert!((adiabaticity(LN_2) - 2.125).abs() < 1e-12);
    }

    #[test]
    fn final_phase_matches_instantaneous_formula() {
        let (delta, eps, wf, m0, tau) = (0.6, 0.9, 1.7, 1.1, 0.8);
        let fq = final_squeeze(delta, eps, wf, m0).unwrap();
        let fs = final_segment(delta, eps, wf, tau, m0).unwrap();
        for t in [tau, tau + 0.3, tau + 1.1, tau + 2.5] {
            let (rho, rho_dot, _) = fs.sample(t);
            let s = ErmakovState { t, rho, rho_dot };
            let inst = phase_cosine(&s, wf, m0).unwrap();
            assert!(
                (fq.phase_argument(t, tau).unwrap() - inst).abs() < 1e-10,
                "t={t}"
            );
            assert!((squeeze_param(&s, wf, m0).unwrap() - fq.r_f).abs() < 1e-12);
        }
        let p = PI / wf;
        assert!(
            (fq.phase(tau + 0.4, tau).unwrap() - fq.phase(tau + 0.4 + p, tau).unwrap()).abs()
                < 1e-10
        );
    }

    #[test]
    fn adiabatic_endpoint_is_unsqueezed() {
        let wf: f64 = 0.7;
        let fq = final_squeeze(1.0 / wf.sqrt(), 0.0, wf, 1.0).unwrap();
        assert!(fq.r_f < 1e-15);
        assert!((fq.qstar() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn record_falls_back_to_zero_phase() {
        let s = jump_state(2.0, 1.0);
        let rec = record(&s, 2.0, 0, Units::default()).unwrap();
        assert_eq!(rec.phi, 0.0);
        assert_eq!(rec.qstar, 1.0);
        assert!((rec.energy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_route_clamps_rounding() {
        assert_eq!(r_from_lambda(1.0 - 1e-13).unwrap(), 0.0);
        assert!(r_from_lambda(0.9).is_err());
    }
}
