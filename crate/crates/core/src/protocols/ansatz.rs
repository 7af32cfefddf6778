//! Six-function ansatz for the intermediate Ermakov amplitude.
//!
//! The amplitude on `(0, τ]` is `ρ(t) = Σ Γ_j a_j(t)` with the coefficients
//! fixed by `(ρ₀, 0, 0)` at `t = 0` and `(δ, ε, γ)` at `t = τ`. Derivatives are
//! analytic in the basis, so the inverted frequency never sees finite
//! difference noise.
//!
//! The raw bases are badly conditioned (`e^{6κτ}` next to `e^{κτ}`), so the
//! solve and the evaluation use quintic Bernstein polynomials `B_k(y)` on the
//! unit interval: `B_k(t/τ)` for the polynomial case, and `x·B_k(y)` with
//! `x = e^{κt}`, `y = (x−1)/(X−1)`, `X = e^{κτ}` for the exponential case. Both
//! span the same six-dimensional space as the `a_j`; the `Γ_j` follow by
//! expanding back to powers of the raw generator.

use serde::{Deserialize, Serialize};

use super::{ProtocolError, RhoSample};
use crate::linalg::solve_dense;

/// Relative pivot threshold below which the boundary matrix counts as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnsatzBasis {
    /// `a_j(t) = (1 + βt)^(j-1)`
    Polynomial { beta: f64 },
    /// `a_j(t) = exp(jκt)`
    Exponential { kappa: f64 },
}

impl AnsatzBasis {
    /// Value, first and second derivative of basis function `j` (1-based).
    pub fn eval(&self, j: usize, t: f64) -> [f64; 3] {
        match *self {
            AnsatzBasis::Polynomial { beta } => {
                let p = (j - 1) as i32;
                let x = 1.0 + beta * t;
                let pf = p as f64;
                let v = x.powi(p);
                let d1 = if p >= 1 {
                    pf * beta * x.powi(p - 1)
                } else {
                    0.0
                };
                let d2 = if p >= 2 {
                    pf * (pf - 1.0) * beta * beta * x.powi(p - 2)
                } else {
                    0.0
                };
                [v, d1, d2]
            }
            AnsatzBasis::Exponential { kappa } => {
                let rate = j as f64 * kappa;
                let v = (rate * t).exp();
                [v, rate * v, rate * rate * v]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub basis: AnsatzBasis,
    /// ρ at t = 0.
    pub rho0: f64,
    /// ρ at t = τ.
    pub delta: f64,
    /// dρ/dt at t = τ.
    pub epsilon: f64,
    /// d²ρ/dt² at t = τ.
    pub gamma: f64,
    pub tau: f64,
}

/// Quintic Bernstein polynomial `k` with its first two derivatives in `y`.
fn bernstein(k: usize, y: f64) -> [f64; 3] {
    let b = |n: i32, i: i32| -> f64 {
        if i < 0 || i > n {
            return 0.0;
        }
        let binom = (0..i).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
        binom * y.powi(i) * (1.0 - y).powi(n - i)
    };
    let k = k as i32;
    [
        b(5, k),
        5.0 * (b(4, k - 1) - b(4, k)),
        20.0 * (b(3, k - 2) - 2.0 * b(3, k - 1) + b(3, k)),
    ]
}

/// Value and first two derivatives in `t` of working basis function `k` (0-based).
fn unit_basis(basis: AnsatzBasis, tau: f64, k: usize, t: f64) -> [f64; 3] {
    match basis {
        AnsatzBasis::Polynomial { .. } => {
            let [g, g1, g2] = bernstein(k, t / tau);
            [g, g1 / tau, g2 / (tau * tau)]
        }
        AnsatzBasis::Exponential { kappa } => {
            let x = (kappa * t).exp();
            let span = (kappa * tau).exp_m1();
            let [g, g1, g2] = bernstein(k, (kappa * t).exp_m1() / span);
            let c = kappa / span;
            [
                x * g,
                kappa * x * g + c * x * x * g1,
                kappa * kappa * x * g + 3.0 * kappa * c * x * x * g1 + c * c * x * x * x * g2,
            ]
        }
    }
}

/// Map unit-basis weights to the `Γ_j` of the raw basis.
fn raw_coefficients(basis: AnsatzBasis, tau: f64, w: &[f64; 6]) -> [f64; 6] {
    // y^k = (u − 1)^k / D^k with u the raw generator: 1 + βt or e^{κt}
    let denom = match basis {
        AnsatzBasis::Polynomial { beta } => beta * tau,
        AnsatzBasis::Exponential { kappa } => (kappa * tau).exp_m1(),
    };
    // Bernstein weights to powers of y
    let mut mono = [0.0; 6];
    for (k, wk) in w.iter().enumerate() {
        let c5k = (0..k).fold(1.0, |acc, j| acc * (5 - j) as f64 / (j + 1) as f64);
        let mut binom = 1.0;
        for i in k..6 {
            let sign = if (i - k) % 2 == 0 { 1.0 } else { -1.0 };
            mono[i] += wk * c5k * sign * binom;
            binom *= (5 - i) as f64 / (i - k + 1) as f64;
        }
    }
    let mut gamma = [0.0; 6];
    for (k, wk) in mono.iter().enumerate() {
        let scale = wk / denom.powi(k as i32);
        let mut binom = 1.0;
        for i in 0..=k {
            let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
            // polynomial: u^i is a_{i+1}; exponential: x·x^i is a_{i+1}
            gamma[i] += scale * sign * binom;
            binom *= (k - i) as f64 / (i + 1) as f64;
        }
    }
    gamma
}

/// A solved ansatz: basis plus the six coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzRho {
    pub spec: AnsatzSpec,
    /// `Γ_j` of the raw basis `a_j`.
    pub coefficients: [f64; 6],
    weights: [f64; 6],
}

impl AnsatzRho {
    pub fn eval(&self, t: f64) -> RhoSample {
        let mut out = [0.0; 3];
        for (k, w) in self.weights.iter().enumerate() {
            let b = unit_basis(self.spec.basis, self.spec.tau, k, t);
            for d in 0..3 {
                out[d] += w * b[d];
            }
        }
        RhoSample {
            rho: out[0],
            rho_dot: out[1],
            rho_ddot: out[2],
        }
    }

    /// Largest relative deviation from the six prescribed boundary values.
    pub fn boundary_residual(&self) -> f64 {
        let s = &self.spec;
        let at0 = self.eval(0.0);
        let at_tau = self.eval(s.tau);
        let scale_rho = s.rho0.abs().max(s.delta.abs());
        let scale_d1 = scale_rho / s.tau;
        let scale_d2 = scale_rho / (s.tau * s.tau);
        let rel = |got: f64, want: f64, scale: f64| (got - want).abs() / want.abs().max(scale);
        [
            rel(at0.rho, s.rho0, scale_rho),
            rel(at0.rho_dot, 0.0, scale_d1),
            rel(at0.rho_ddot, 0.0, scale_d2),
            rel(at_tau.rho, s.delta, scale_rho),
            rel(at_tau.rho_dot, s.epsilon, scale_d1),
            rel(at_tau.rho_ddot, s.gamma, scale_d2),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Solve the 6×6 boundary-condition system for the ansatz coefficients.
pub fn ansatz_coefficients(spec: &AnsatzSpec) -> Result<AnsatzRho, ProtocolError> {
    if !(spec.tau > 0.0) || !(spec.rho0 > 0.0) || !(spec.delta > 0.0) {
        return Err(ProtocolError::InvalidParameter(format!(
            "ansatz needs tau, rho0, delta > 0 (got tau={}, rho0={}, delta={})",
            spec.tau, spec.rho0, spec.delta
        )));
    }
    let rate = match spec.basis {
        AnsatzBasis::Polynomial { beta } => beta,
        AnsatzBasis::Exponential { kappa } => kappa,
    };
    if !rate.is_finite() || rate * spec.tau == 0.0 {
        return Err(ProtocolError::SingularBasis(spec.basis));
    }
    let mut m = [[0.0; 6]; 6];
    for k in 0..6 {
        let b0 = unit_basis(spec.basis, spec.tau, k, 0.0);
        let b1 = unit_basis(spec.basis, spec.tau, k, spec.tau);
        for d in 0..3 {
            m[d][k] = b0[d];
            m[3 + d][k] = b1[d];
        }
    }
    let rhs = [spec.rho0, 0.0, 0.0, spec.delta, spec.epsilon, spec.gamma];
    let weights =
        solve_dense(m, rhs, SINGULAR_PIVOT).ok_or(ProtocolError::SingularBasis(spec.basis))?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(ProtocolError::SingularBasis(spec.basis));
    }
    let coefficients = raw_coefficients(spec.basis, spec.tau, &weights);
    Ok(AnsatzRho {
        spec: *spec,
        coefficients,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(
        basis: AnsatzBasis,
        rho0: f64,
        delta: f64,
        epsilon: f64,
        gamma: f64,
        tau: f64,
    ) -> AnsatzSpec {
        AnsatzSpec {
            basis,
            rho0,
            delta,
            epsilon,
            gamma,
            tau,
        }
    }

    #[test]
    fn polynomial_flat_boundaries() {
        let a = ansatz_coefficients(&spec(
            AnsatzBasis::Polynomial { beta: 1.0 },
            1.0,
            1.0,
            0.0,
            0.0,
            1.0,
        ))
        .unwrap();
        for t in [0.0, 1.0] {
            let s = a.eval(t);
            assert!((s.rho - 1.0).abs() < 1e-12);
            assert!(s.rho_dot.abs() < 1e-12);
            assert!(s.rho_ddot.abs() < 1e-12);
        }
        assert!(a.boundary_residual() < 1e-10);
    }

    #[test]
    fn exponential_shortcut_parameters() {
        let w0: f64 = 20.0;
        let wf = w0 / 16.0;
        let tau = 10.0 / w0;
        let delta = 1.0 / wf.sqrt();
        let a = ansatz_coefficients(&spec(
            AnsatzBasis::Exponential { kappa: 1.0 },
            1.0 / w0.sqrt(),
            delta,
            3.0,
            0.0,
            tau,
        ))
        .unwrap();
        let end = a.eval(tau);
        assert!((end.rho - delta).abs() < 1e-10 * delta);
        assert!((end.rho_dot - 3.0).abs() < 1e-10 * 3.0);
        assert!(end.rho_ddot.abs() < 1e-8);
        assert!(a.boundary_residual() < 1e-10);
    }

    #[test]
    fn raw_coefficients_reproduce_the_profile() {
        for basis in [
            AnsatzBasis::Polynomial { beta: 0.7 },
            AnsatzBasis::Exponential { kappa: 0.4 },
        ] {
            let a = ansatz_coefficients(&spec(basis, 1.0, 1.6, 0.3, -0.2, 1.1)).unwrap();
            for t in [0.0, 0.35, 0.8, 1.1] {
                let raw: f64 = (0..6)
                    .map(|j| a.coefficients[j] * basis.eval(j + 1, t)[0])
                    .sum();
                assert!((raw - a.eval(t).rho).abs() < 1e-9, "{basis:?} t={t}");
            }
        }
    }

    #[test]
    fn unit_basis_derivatives_match_finite_differences() {
        let h = 1e-5;
        let basis = AnsatzBasis::Exponential { kappa: 1.3 };
        for k in 0..6 {
            let t = 0.4;
            let [_, d1, d2] = unit_basis(basis, 0.9, k, t);
            let fd1 = (unit_basis(basis, 0.9, k, t + h)[0] - unit_basis(basis, 0.9, k, t - h)[0])
                / (2.0 * h);
            let fd2 = (unit_basis(basis, 0.9, k, t + h)[1] - unit_basis(basis, 0.9, k, t - h)[1])
                / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-6 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn zero_beta_is_singular() {
        let res = ansatz_coefficients(&spec(
            AnsatzBasis::Polynomial { beta: 0.0 },
            1.0,
            2.0,
            0.5,
            0.0,
            1.0,
        ));
        assert!(matches!(res, Err(ProtocolError::SingularBasis(_))));
        let res = ansatz_coefficients(&spec(
            AnsatzBasis::Exponential { kappa: 0.0 },
            1.0,
            2.0,
            0.5,
            0.0,
            1.0,
        ));
        assert!(matches!(res, Err(ProtocolError::SingularBasis(_))));
    }

    #[test]
    fn basis_derivatives_match_finite_differences() {
        let h = 1e-5;
        for basis in [
            AnsatzBasis::Polynomial { beta: 0.7 },
            AnsatzBasis::Exponential { kappa: 1.3 },
        ] {
            for j in 1..=6 {
                let t = 0.4;
                let [_, d1, d2] = basis.eval(j, t);
                let fd1 = (basis.eval(j, t + h)[0] - basis.eval(j, t - h)[0]) / (2.0 * h);
                let fd2 = (basis.eval(j, t + h)[1] - basis.eval(j, t - h)[1]) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
                assert!((d2 - fd2).abs() < 1e-6 * (1.0 + d2.abs()));
            }
        }
    }
}
