//! Transition probabilities `P(μ → ν)` of a squeezed level, as functions of
//! the mean excitation number `N` reached from the ground state.

use statrs::function::factorial::{factorial, ln_factorial};
use twofloat::TwoFloat;

use super::SqueezeError;

/// Above this `μ + ν` the prefactor is carried in log space.
const LOG_SPACE_ABOVE: u32 = 30;

fn ln_fact(n: u32) -> f64 {
    if n < 21 {
        factorial(n as u64).ln()
    } else {
        ln_factorial(n as u64)
    }
}

/// Double-double mantissa with a separate binary exponent, so long products of
/// factorial-sized factors neither overflow nor lose the low-order digits the
/// alternating sum depends on.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    m: TwoFloat,
    e: i32,
}

impl Scaled {
    fn one() -> Self {
        Self {
            m: TwoFloat::from(1.0),
            e: 0,
        }
    }

    fn renorm(mut self) -> Self {
        let hi = self.m.hi();
        if hi != 0.0 && hi.is_finite() {
            let shift = hi.abs().log2().floor() as i32;
            self.m *= 2f64.powi(-shift);
            self.e += shift;
        }
        self
    }

    fn mul(self, f: f64) -> Self {
        Self {
            m: self.m * f,
            e: self.e,
        }
        .renorm()
    }

    fn mul_tf(self, f: TwoFloat) -> Self {
        Self {
            m: self.m * f,
            e: self.e,
        }
        .renorm()
    }

    fn div(self, f: f64) -> Self {
        Self {
            m: self.m / f,
            e: self.e,
        }
        .renorm()
    }
}

/// `Σ_k C(s,k) C((s+k−1)/2, s) k!/(k−h)! y^k` with `y = (N+1)^(−1/2)`, returned
/// as `(sum mantissa, binary exponent)`.
fn inner_sum(half_sum: u32, half_gap: u32, n0: f64) -> (f64, i32) {
    let y = TwoFloat::new_add(1.0, n0).sqrt().recip();
    let terms: Vec<Scaled> = (half_gap..=half_sum)
        .map(|k| {
            let mut t = Scaled::one();
            for i in 1..=k {
                t = t.mul((half_sum - k + i) as f64).div(i as f64);
            }
            let x = (half_sum + k) as f64 / 2.0 - 0.5;
            for i in 0..half_sum {
                t = t.mul(x - i as f64).div((i + 1) as f64);
            }
            for i in (k - half_gap + 1)..=k {
                t = t.mul(i as f64);
            }
            for _ in 0..k {
                t = t.mul_tf(y);
            }
            t
        })
        .filter(|t| t.m.hi() != 0.0)
        .collect();
    let Some(e_max) = terms.iter().map(|t| t.e).max() else {
        return (0.0, 0);
    };
    let total = terms.iter().fold(TwoFloat::from(0.0), |acc, t| {
        acc + t.m * 2f64.powi(t.e - e_max)
    });
    (f64::from(total), e_max)
}

/// `2^(μ+ν) (min(μ,ν)!)² N^(|ν−μ|/2) / (μ! ν! (N+1)^(1/2))` with exact factorials.
fn prefactor(mu: u32, nu: u32, n0: f64) -> f64 {
    let lo = mu.min(nu);
    2f64.powi((mu + nu) as i32)
        * factorial(lo as u64).powi(2)
        * n0.powf((mu.abs_diff(nu) / 2) as f64)
        / (factorial(mu as u64) * factorial(nu as u64) * (1.0 + n0).sqrt())
}

fn ln_prefactor(mu: u32, nu: u32, n0: f64) -> f64 {
    let lo = mu.min(nu);
    (mu + nu) as f64 * std::f64::consts::LN_2
        + 2.0 * ln_fact(lo)
        + (mu.abs_diff(nu) / 2) as f64 * n0.ln()
        - ln_fact(mu)
        - ln_fact(nu)
        - 0.5 * n0.ln_1p()
}

/// `P(μ → ν)`; zero when `|ν − μ|` is odd.
pub fn transition_prob(mu: u32, nu: u32, n0: f64) -> Result<f64, SqueezeError> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(SqueezeError::InvalidInput(format!(
            "mean excitation number must be >= 0, got {n0}"
        )));
    }
    let gap = mu.abs_diff(nu);
    if gap % 2 == 1 {
        return Ok(0.0);
    }
    if n0 == 0.0 {
        return Ok(if gap == 0 { 1.0 } else { 0.0 });
    }
    let (sum, e) = inner_sum((mu + nu) / 2, gap / 2, n0);
    if sum == 0.0 {
        return Ok(0.0);
    }
    let p = if mu + nu <= LOG_SPACE_ABOVE {
        let s = sum * 2f64.powi(e);
        s * s * prefactor(mu, nu, n0)
    } else {
        (2.0 * (sum.abs().ln() + e as f64 * std::f64::consts::LN_2) + ln_prefactor(mu, nu, n0))
            .exp()
    };
    Ok(p.clamp(0.0, 1.0))
}

/// `P_e = 1 − P(0 → 0) = 1 − (N₀ + 1)^(−1/2)`.
pub fn excitation_prob(n0: f64) -> f64 {
    1.0 - 1.0 / (1.0 + n0).sqrt()
}

/// `P(0 → ν)` for `ν = 0, 1, …` until the remaining mass drops below `tail`
/// (or `max_level` is reached).
pub fn ground_distribution(n0: f64, tail: f64, max_level: u32) -> Result<Vec<f64>, SqueezeError> {
    let mut out = Vec::new();
    let mut total = 0.0;
    for nu in 0..=max_level {
        let p = transition_prob(0, nu, n0)?;
        out.push(p);
        total += p;
        if 1.0 - total < tail && nu % 2 == 0 {
            break;
        }
    }
    Ok(out)
}
