//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The stepper works on fixed-size states `[f64; N]`. Output times are served
//! from the fourth-order continuous extension of each accepted step, so the
//! caller's sampling grid never influences the internal step sequence.

use thiserror::Error;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Probes miss the in-step maximum of the defect by up to about this factor.
const DEFECT_SAFETY: f64 = 2.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("state left the admissible region at t = {t}")]
    GuardViolation { t: f64, state: Vec<f64> },
    #[error("invalid integration interval or output grid: {0}")]
    InvalidInput(String),
}

/// Step-size controller settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest permitted step; `None` lets the controller choose freely.
    pub h_max: Option<f64>,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            h_max: None,
        }
    }
}

/// A state sample produced by dense output: value and time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSample<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const N: usize> {
    pub t_end: f64,
    pub y_end: [f64; N],
    pub samples: Vec<DenseSample<N>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

struct Interpolant<const N: usize> {
    t0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Interpolant<N> {
    fn sample(&self, t: f64) -> DenseSample<N> {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        let mut y = [0.0; N];
        let mut dy = [0.0; N];
        for i in 0..N {
            let [r1, r2, r3, r4, r5] = [
                self.r[0][i],
                self.r[1][i],
                self.r[2][i],
                self.r[3][i],
                self.r[4][i],
            ];
            let s = r4 + th1 * r5;
            let rr = r3 + theta * s;
            let q = r2 + th1 * rr;
            y[i] = r1 + theta * q;
            let ds = -r5;
            let drr = s + theta * ds;
            let dq = -rr + th1 * drr;
            dy[i] = (q + theta * dq) / self.h;
        }
        DenseSample { t, y, dy }
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn is_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn error_norm<const N: usize>(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn defect_norm<const N: usize, F, S>(
        &self,
        f: &mut F,
        scale: &S,
        interp: &Interpolant<N>,
    ) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        S: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut worst = 0.0f64;
        for theta in [0.15, 0.5, 0.85] {
            let s = interp.sample(interp.t0 + theta * interp.h);
            let fs = f(s.t, &s.y);
            let magnitude = scale(s.t, &s.y);
            let mut acc = 0.0;
            for i in 0..N {
                // the last term is the rounding floor of the interpolant's derivative
                let sc = self.atol
                    + self.rtol * magnitude[i]
                    + 8.0 * f64::EPSILON * s.y[i].abs() / interp.h;
                acc += ((s.dy[i] - fs[i]) / sc).powi(2);
            }
            worst = worst.max((acc / N as f64).sqrt());
        }
        DEFECT_SAFETY * worst
    }

    fn initial_step<const N: usize, F>(
        &self,
        f: &mut F,
        t0: f64,
        y0: &[f64; N],
        f0: &[f64; N],
        span: f64,
    ) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let scale = |i: usize| self.atol + self.rtol * y0[i].abs();
        let d0 = (0..N)
            .map(|i| (y0[i] / scale(i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (N as f64).sqrt();
        let d1 = (0..N)
            .map(|i| (f0[i] / scale(i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (N as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1 = axpy(y0, h0, &[(1.0, f0)]);
        let f1 = f(t0 + h0, &y1);
        let d2 = (0..N)
            .map(|i| ((f1[i] - f0[i]) / scale(i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (N as f64).sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        let h = (100.0 * h0).min(h1).min(span);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            span
        }
    }

    /// Integrate `y' = f(t, y)` from `t0` to `t_end` (forward only), sampling the
    /// continuous extension at every time in `outputs` (sorted, inside
    /// `[t0, t_end]`). Trial steps whose state fails `admissible` are rejected
    /// and retried with a smaller step.
    pub fn integrate<const N: usize, F, G>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        outputs: &[f64],
        admissible: G,
    ) -> Result<Solution<N>, IntegrationError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        G: Fn(&[f64; N]) -> bool,
    {
        self.run(
            f,
            t0,
            y0,
            t_end,
            outputs,
            admissible,
            None::<fn(f64, &[f64; N]) -> [f64; N]>,
        )
    }

    /// As [`integrate`](Self::integrate), but every accepted step must also keep
    /// the defect `|p'(t) − f(t, p(t))|` of its continuous extension within
    /// `atol + rtol·scale(t, p(t))`, probed at three interior points.
    /// `scale` gives the typical size of each derivative component.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_with_defect<const N: usize, F, G, S>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        outputs: &[f64],
        admissible: G,
        scale: S,
    ) -> Result<Solution<N>, IntegrationError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        G: Fn(&[f64; N]) -> bool,
        S: Fn(f64, &[f64; N]) -> [f64; N],
    {
        self.run(f, t0, y0, t_end, outputs, admissible, Some(scale))
    }

    #[allow(clippy::too_many_arguments)]
    fn run<const N: usize, F, G, S>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        outputs: &[f64],
        admissible: G,
        defect_scale: Option<S>,
    ) -> Result<Solution<N>, IntegrationError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        G: Fn(&[f64; N]) -> bool,
        S: Fn(f64, &[f64; N]) -> [f64; N],
    {
        if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(IntegrationError::InvalidInput(format!(
                "interval [{t0}, {t_end}]"
            )));
        }
        if outputs.windows(2).any(|w| w[1] < w[0]) {
            return Err(IntegrationError::InvalidInput(
                "output times not sorted".into(),
            ));
        }
        if let (Some(&first), Some(&last)) = (outputs.first(), outputs.last()) {
            let slack = 1e-12 * (1.0 + t_end.abs());
            if first < t0 - slack || last > t_end + slack {
                return Err(IntegrationError::InvalidInput(format!(
                    "output times [{first}, {last}] outside [{t0}, {t_end}]"
                )));
            }
        }
        if !admissible(&y0) || !is_finite(&y0) {
            return Err(IntegrationError::GuardViolation {
                t: t0,
                state: y0.to_vec(),
            });
        }

        let mut samples = Vec::with_capacity(outputs.len());
        let mut next_out = 0usize;
        let mut k1 = f(t0, &y0);
        let span = t_end - t0;
        if span == 0.0 {
            while next_out < outputs.len() {
                samples.push(DenseSample {
                    t: outputs[next_out],
                    y: y0,
                    dy: k1,
                });
                next_out += 1;
            }
            return Ok(Solution {
                t_end,
                y_end: y0,
                samples,
                accepted_steps: 0,
                rejected_steps: 0,
            });
        }

        let h_max = self.h_max.unwrap_or(span).min(span);
        let mut h = self.initial_step(&mut f, t0, &y0, &k1, span).min(h_max);
        let mut t = t0;
        let mut y = y0;
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut guard_hit = false;

        while t < t_end {
            if accepted + rejected >= self.max_steps {
                return Err(IntegrationError::MaxStepsExceeded {
                    t,
                    max_steps: self.max_steps,
                });
            }
            let mut last = false;
            if t + h >= t_end || (t_end - (t + h)) < 1e-12 * h {
                h = t_end - t;
                last = true;
            }
            let h_min = 16.0 * f64::EPSILON * t.abs().max(span);
            if h < h_min {
                if guard_hit {
                    return Err(IntegrationError::GuardViolation {
                        t,
                        state: y.to_vec(),
                    });
                }
                return Err(IntegrationError::StepSizeUnderflow { t, h });
            }

            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                t + C4 * h,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = axpy(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if last { t_end } else { t + h };

            if !is_finite(&y_new) || !admissible(&y_new) {
                guard_hit = true;
                rejected += 1;
                h *= 0.25;
                continue;
            }
            let k7 = f(t_new, &y_new);
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let en = self.error_norm(&y, &y_new, &err);
            if !en.is_finite() {
                rejected += 1;
                h *= 0.25;
                continue;
            }
            let fac = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            if en <= 1.0 {
                guard_hit = false;
                let mut r = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    r[0][i] = y[i];
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - h * k7[i] - bspl;
                    r[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let interp = Interpolant { t0: t, h, r };
                let dn = match &defect_scale {
                    Some(scale) => self.defect_norm(&mut f, scale, &interp),
                    None => 0.0,
                };
                if !(dn <= 1.0) {
                    rejected += 1;
                    h *= if dn.is_finite() {
                        (0.9 * dn.powf(-0.25)).clamp(0.2, 0.9)
                    } else {
                        0.25
                    };
                    continue;
                }
                let fac = if dn > 0.0 {
                    fac.min((0.9 * dn.powf(-0.25)).max(1.0))
                } else {
                    fac
                };
                while next_out < outputs.len() && (outputs[next_out] <= t_new || last) {
                    samples.push(interp.sample(outputs[next_out].min(t_end)));
                    next_out += 1;
                }
                t = t_new;
                y = y_new;
                k1 = k7;
                accepted += 1;
                h = (h * fac).min(h_max);
            } else {
                rejected += 1;
                h *= fac.min(1.0);
            }
        }

        Ok(Solution {
            t_end: t,
            y_end: y,
            samples,
            accepted_steps: accepted,
            rejected_steps: rejected,
        })
    }
}
