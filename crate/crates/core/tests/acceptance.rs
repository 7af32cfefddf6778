//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use squeeze_equiv::app::run_simulate;
use squeeze_equiv::equivalence::{jump_vs_ramp_problem, solve_equivalence};
use squeeze_equiv::ermakov::{
    end_state, final_segment, rho_constant, solve, ErmakovState, Route, SolverOptions,
};
use squeeze_equiv::presets::preset;
use squeeze_equiv::protocols::{
    AnsatzBasis, AnsatzSpec, FrequencyProtocol, QuasiOptimalSpec, Segment, SegmentKind,
};
use squeeze_equiv::squeeze::{
    adiabaticity, excitation_prob, ground_distribution, mean_energy, mean_excitations, record,
    squeeze_param, transition_prob,
};
use squeeze_equiv::Units;

// Pinned tolerances.
const JANSZKY_R: f64 = 1e-10;
const JANSZKY_TIME: Duration = Duration::from_secs(1);
const ROOT: (f64, f64) = (2.657887, 4.473165);
const ROOT_TOL: f64 = 1e-4;
const ROOT_TIME: Duration = Duration::from_secs(30);
const ROUTE_AGREEMENT: f64 = 1e-8;
const EP_RESIDUAL: f64 = 1e-8;
const INVARIANT: f64 = 1e-12;
const R_DRIFT: f64 = 1e-10;
const SHORTCUT_PAIR: f64 = 1e-8;
const SHORTCUT_ZERO: f64 = 1e-10;
const IDENTITY: f64 = 1e-10;
const DISTRIBUTION_SUM: f64 = 1e-8;
const SPOT: f64 = 1e-12;

/// Tight integration for the ODE route.
fn tight() -> SolverOptions {
    SolverOptions::default().with_tolerances(1e-12, 1e-14)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64) -> f64 {
    lo * 10f64.powf(rng.gen::<f64>())
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn janszky_recovery() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for ratio in [2.0, 5.0, 0.5] {
        for q in 1..=3 {
            let omega1 = ratio;
            let tau = q as f64 * PI / omega1;
            let p = FrequencyProtocol::sudden_jump(1.0, 1.0, omega1, 1.0, tau)
                .map_err(|e| e.to_string())?;
            for (route, opts) in [
                (Route::Formal, SolverOptions::default()),
                (Route::Ode, tight()),
            ] {
                let end = end_state(&p, route, &opts).map_err(|e| e.to_string())?;
                let r = squeeze_param(&end, 1.0, 1.0).map_err(|e| e.to_string())?;
                worst = worst.max(r);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(
        worst <= JANSZKY_R && elapsed < JANSZKY_TIME,
        format!(
            "max r_f = {worst:.3e} (≤ {JANSZKY_R:e}), {:.3} s (< {} s)",
            elapsed.as_secs_f64(),
            JANSZKY_TIME.as_secs()
        ),
    )
}

fn transcendental_root() -> Outcome {
    let start = Instant::now();
    let solution = solve_equivalence(&jump_vs_ramp_problem(SolverOptions::default()))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let best = solution
        .roots
        .iter()
        .map(|r| {
            (
                (r.params[0] - ROOT.0)
                    .abs()
                    .max((r.params[1] - ROOT.1).abs()),
                r.params.clone(),
            )
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| "no roots".to_string())?;
    ensure(
        best.0 <= ROOT_TOL && elapsed < ROOT_TIME,
        format!(
            "root ({:.7}, {:.7}), max deviation {:.2e} (≤ {ROOT_TOL:e}), {} roots, {:.2} s (< {} s)",
            best.1[0],
            best.1[1],
            best.0,
            solution.roots.len(),
            elapsed.as_secs_f64(),
            ROOT_TIME.as_secs()
        ),
    )
}

/// One random protocol: piecewise constant/ramp segments, an ansatz design or a quasi-optimal design.
fn random_protocol(rng: &mut ChaCha8Rng) -> FrequencyProtocol {
    let omega0 = log_uniform(rng, 0.5);
    let omegaf = log_uniform(rng, 0.5);
    let tau = log_uniform(rng, 0.2);
    match rng.gen_range(0..4) {
        0 | 1 => {
            let n = rng.gen_range(1..=3);
            let mut cuts: Vec<f64> = (1..n).map(|_| rng.gen::<f64>() * tau).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.insert(0, 0.0);
            cuts.push(tau);
            let segments = cuts
                .windows(2)
                .map(|w| {
                    let omega = log_uniform(rng, 0.5);
                    let kind = if rng.gen::<bool>() {
                        SegmentKind::Constant { omega }
                    } else {
                        let scale =
                            log_uniform(rng, 0.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        SegmentKind::ExponentialRamp {
                            omega: omega * (-w[0] / scale).exp(),
                            scale,
                        }
                    };
                    Segment {
                        start: w[0],
                        end: w[1],
                        kind,
                    }
                })
                .collect();
            FrequencyProtocol::new(1.0, omega0, omegaf, tau, segments).unwrap()
        }
        2 => {
            let basis = if rng.gen::<bool>() {
                AnsatzBasis::Polynomial {
                    beta: log_uniform(rng, 0.2),
                }
            } else {
                AnsatzBasis::Exponential {
                    kappa: log_uniform(rng, 0.2),
                }
            };
            let spec = AnsatzSpec {
                basis,
                rho0: rho_constant(1.0, omega0),
                delta: rho_constant(1.0, omegaf) * log_uniform(rng, 0.5).min(2.0),
                epsilon: rng.gen_range(-1.0..1.0),
                gamma: 0.0,
                tau,
            };
            FrequencyProtocol::from_ansatz(1.0, omegaf, &spec).unwrap()
        }
        _ => {
            let sigma = rng.gen_range(0.1..0.4);
            FrequencyProtocol::quasi_optimal(&QuasiOptimalSpec::new(
                omega0, omegaf, tau, sigma, 1.0,
            ))
            .unwrap()
        }
    }
}

fn route_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let (mut worst_end, mut worst_residual) = (0.0f64, 0.0f64);
    let mut kinds = std::collections::BTreeSet::new();
    for _ in 0..50 {
        let p = random_protocol(&mut rng);
        for s in &p.segments {
            kinds.insert(s.kind.label());
        }
        let formal = end_state(&p, Route::Formal, &tight()).map_err(|e| e.to_string())?;
        let ode = end_state(&p, Route::Ode, &tight()).map_err(|e| e.to_string())?;
        // ρ̇ compared on the scale of ρω₀ so a vanishing slope is not divided by zero
        let rate = formal.rho_dot.abs().max(formal.rho * p.omega0);
        worst_end = worst_end
            .max(rel(formal.rho, ode.rho))
            .max((formal.rho_dot - ode.rho_dot).abs() / rate);
        let grid: Vec<f64> = (1..=60).map(|i| 1.2 * p.tau * i as f64 / 60.0).collect();
        for route in [Route::Formal, Route::Ode] {
            let traj = solve(&p, &grid, route, &tight()).map_err(|e| e.to_string())?;
            worst_residual = worst_residual.max(traj.max_relative_residual());
        }
    }
    ensure(
        worst_end <= ROUTE_AGREEMENT && worst_residual <= EP_RESIDUAL,
        format!(
            "50 protocols ({}): end-state mismatch {worst_end:.2e} (≤ {ROUTE_AGREEMENT:e}), residual {worst_residual:.2e} (≤ {EP_RESIDUAL:e})",
            kinds.into_iter().collect::<Vec<_>>().join(", ")
        ),
    )
}

fn final_segment_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_inv, mut worst_drift) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let delta = log_uniform(&mut rng, 0.3);
        let epsilon = rng.gen_range(-3.0..3.0);
        let omegaf = log_uniform(&mut rng, 0.3);
        let m0 = log_uniform(&mut rng, 0.3);
        let tau = log_uniform(&mut rng, 0.1);
        let fs = final_segment(delta, epsilon, omegaf, tau, m0).map_err(|e| e.to_string())?;
        worst_inv = worst_inv.max(rel(fs.invariant(), 1.0 / (m0 * omegaf).powi(2)));
        let at = |t: f64| {
            squeeze_param(
                &ErmakovState {
                    t,
                    rho: fs.rho(t),
                    rho_dot: fs.rho_dot(t),
                },
                omegaf,
                m0,
            )
        };
        let r_tau = squeeze_param(
            &ErmakovState {
                t: tau,
                rho: delta,
                rho_dot: epsilon,
            },
            omegaf,
            m0,
        )
        .map_err(|e| e.to_string())?;
        for k in 1..=200 {
            let t = tau + 10.0 / omegaf * k as f64 / 200.0;
            worst_drift = worst_drift.max((at(t).map_err(|e| e.to_string())? - r_tau).abs());
        }
    }
    ensure(
        worst_inv <= INVARIANT && worst_drift <= R_DRIFT,
        format!("A_fB_f−C_f² error {worst_inv:.2e} (≤ {INVARIANT:e}), r drift {worst_drift:.2e} (≤ {R_DRIFT:e})"),
    )
}

fn preset_finals(name: &str) -> Result<(Vec<(f64, f64)>, bool), String> {
    let cfg = preset(name).ok_or("missing preset")?;
    let report = run_simulate(&cfg).map_err(|e| e.to_string())?;
    let finals = report.summary["protocols"]
        .as_array()
        .ok_or("no protocols")?
        .iter()
        .map(|p| {
            (
                p["final"]["r_f"].as_f64().unwrap(),
                p["final"]["Qstar_f"].as_f64().unwrap(),
            )
        })
        .collect();
    let all = report.summary["equivalence"]["all_equivalent"]
        .as_bool()
        .ok_or("no equivalence block")?;
    Ok((finals, all))
}

fn shortcut_scenarios() -> Outcome {
    let (fig2, _) = preset_finals("fig2")?;
    let (fig3, _) = preset_finals("fig3")?;
    let (fig4, chain) = preset_finals("fig4")?;
    let fig2_gap = (fig2[0].0 - fig2[1].0).abs();
    let fig3_r = fig3
        .iter()
        .map(|f| f.0.abs())
        .fold(0.0, f64::max)
        .max((fig3[0].0 - fig3[1].0).abs());
    let fig3_q = fig3.iter().map(|f| (f.1 - 1.0).abs()).fold(0.0, f64::max);
    ensure(
        fig2_gap <= SHORTCUT_PAIR && fig2[0].0 > 0.0 && fig3_r <= SHORTCUT_ZERO && fig3_q <= SHORTCUT_ZERO && chain && fig4.len() == 3,
        format!(
            "fig2 r_f = {:.8} |Δ| {fig2_gap:.1e}; fig3 max r_f {fig3_r:.1e}, |Q*−1| {fig3_q:.1e}; fig4 chain {chain}",
            fig2[0].0
        ),
    )
}

fn observable_identities() -> Outcome {
    let mut worst = 0.0f64;
    for n0 in [0.0, 0.5625, 2.0, 5.0] {
        let p = transition_prob(0, 0, n0).map_err(|e| e.to_string())?;
        worst = worst.max((p - 1.0 / (n0 + 1.0).sqrt()).abs());
    }
    let mut sum_err = 0.0f64;
    let mut odd = 0.0f64;
    for n0 in [0.0, 0.5625, 2.0, 5.0] {
        let d = ground_distribution(n0, 1e-12, 200_000).map_err(|e| e.to_string())?;
        sum_err = sum_err.max((d.iter().sum::<f64>() - 1.0).abs());
        for mu in 0..8u32 {
            for nu in 0..8u32 {
                if (mu + nu) % 2 == 1 {
                    odd = odd.max(
                        transition_prob(mu, nu, n0)
                            .map_err(|e| e.to_string())?
                            .abs(),
                    );
                }
            }
        }
    }
    let qstar_exact = (0..=100)
        .map(|i| i as f64 * 0.05)
        .all(|r| adiabaticity(r) == 2.0 * mean_excitations(0, r) + 1.0);
    let energy_bound = (0..=100).all(|i| {
        let r = i as f64 * 0.03;
        (0..4).all(|n| {
            let (e, floor) = (mean_energy(n, r, 1.7, 1.0), (n as f64 + 0.5) * 1.7);
            if r == 0.0 {
                e == floor
            } else {
                e > floor
            }
        })
    });
    ensure(
        worst <= IDENTITY && sum_err <= DISTRIBUTION_SUM && odd == 0.0 && qstar_exact && energy_bound,
        format!(
            "P(0→0) err {worst:.1e}, Σ err {sum_err:.1e}, odd max {odd:e}, Q*=2N+1 {qstar_exact}, E≥Ē {energy_bound}"
        ),
    )
}

fn spot_checks() -> Outcome {
    // just after ω₀ → 4ω₀: still the ω₀ ground-state width
    let (omega0, omega1, hbar) = (1.0, 4.0, 1.0);
    let state = ErmakovState {
        t: 0.0,
        rho: rho_constant(1.0, omega0),
        rho_dot: 0.0,
    };
    let rec = record(&state, omega1, 0, Units { m0: 1.0, hbar }).map_err(|e| e.to_string())?;
    let checks = [
        ("r", rec.r, 2f64.ln()),
        ("phi", rec.phi, 0.0),
        ("N", rec.excitations, 0.5625),
        ("P_e", excitation_prob(rec.excitations), 0.2),
        // cosh(2 ln 2) = 2.125
        ("E", rec.energy, 2.125 * 0.5 * hbar * omega1),
    ];
    let worst = checks
        .iter()
        .map(|(_, got, want)| (got - want).abs())
        .fold(0.0, f64::max);
    let detail = checks
        .iter()
        .map(|(n, got, _)| format!("{n}={got:.12}"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure(
        worst <= SPOT,
        format!("{detail}, max err {worst:.1e} (≤ {SPOT:e})"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 null squeezing at half periods", janszky_recovery),
        ("2 jump/ramp equivalence root", transcendental_root),
        ("3 formal and ODE routes agree", route_agreement),
        ("4 final-segment invariants", final_segment_invariants),
        ("5 shortcut scenarios", shortcut_scenarios),
        ("6 observable identities", observable_identities),
        ("7 closed-value spot checks", spot_checks),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
