use proptest::prelude::*;

use squeeze_equiv::equivalence::{check_equivalence, r_f_bound, EndState, Tolerance};
use squeeze_equiv::ermakov::{
    final_segment, relative_residual, rho_constant, solve, ClassicalPair, ErmakovState, Route,
    SolverOptions,
};
use squeeze_equiv::protocols::{
    ansatz_coefficients, omega_from_rho, AnsatzBasis, AnsatzSpec, ExpulsivePolicy,
    FrequencyProtocol, Region, RhoProfile, Segment, SegmentKind,
};
use squeeze_equiv::squeeze::{
    adiabaticity, final_squeeze, ground_distribution, lambda, mean_energy, mean_excitations,
    record, squeeze_param,
};
use squeeze_equiv::Units;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Piecewise-constant protocol with 1..4 segments.
fn piecewise() -> impl Strategy<Value = FrequencyProtocol> {
    (
        log_uniform(0.5, 2.0),
        log_uniform(0.5, 3.0),
        prop::collection::vec((0.1f64..1.0, log_uniform(0.3, 3.0)), 1..4),
    )
        .prop_map(|(omega0, omegaf, pieces)| {
            let mut t = 0.0;
            let segments = pieces
                .iter()
                .map(|&(len, omega)| {
                    let s = Segment {
                        start: t,
                        end: t + len,
                        kind: SegmentKind::Constant { omega },
                    };
                    t += len;
                    s
                })
                .collect();
            FrequencyProtocol::new(1.0, omega0, omegaf, t, segments).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_instant_has_one_region(p in piecewise(), s in 0.0f64..1.5) {
        let t = s * p.tau;
        let region = p.region(t);
        let hits = p.segments.iter().filter(|seg| t > seg.start && t <= seg.end).count();
        match region {
            Region::Initial => prop_assert!(t <= 0.0 && hits == 0),
            Region::Final => prop_assert!(t > p.tau && hits == 0),
            Region::Intermediate(i) => {
                prop_assert_eq!(hits, 1);
                prop_assert!(t > p.segments[i].start && t <= p.segments[i].end);
            }
        }
        // a breakpoint belongs to the segment it closes
        for (i, seg) in p.segments.iter().enumerate() {
            prop_assert_eq!(p.region(seg.end), Region::Intermediate(i));
        }
    }

    #[test]
    fn ansatz_meets_boundary_values(
        poly in any::<bool>(),
        rate in 0.2f64..2.0,
        rho0 in log_uniform(0.2, 5.0),
        delta in log_uniform(0.2, 5.0),
        epsilon in -2.0f64..2.0,
        gamma in -2.0f64..2.0,
        tau in log_uniform(0.3, 2.0),
    ) {
        let basis = if poly { AnsatzBasis::Polynomial { beta: rate } } else { AnsatzBasis::Exponential { kappa: rate } };
        let a = ansatz_coefficients(&AnsatzSpec { basis, rho0, delta, epsilon, gamma, tau }).unwrap();
        prop_assert!(a.boundary_residual() <= 1e-10, "{}", a.boundary_residual());
    }

    #[test]
    fn polynomial_ansatz_is_the_smooth_quintic(omega0 in log_uniform(1.0, 30.0), ratio in log_uniform(1.5, 30.0), tau in log_uniform(0.1, 3.0)) {
        let omegaf = omega0 / ratio;
        let rho0 = 1.0 / omega0.sqrt();
        let spec = AnsatzSpec { basis: AnsatzBasis::Polynomial { beta: 1.0 }, rho0, delta: 1.0 / omegaf.sqrt(), epsilon: 0.0, gamma: 0.0, tau };
        let a = ansatz_coefficients(&spec).unwrap();
        let bf = (omega0 / omegaf).sqrt();
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let b = 1.0 + (bf - 1.0) * s.powi(3) * (10.0 - 15.0 * s + 6.0 * s * s);
            prop_assert!(rel(a.eval(s * tau).rho / rho0, b) < 1e-9, "s={} {} vs {}", s, a.eval(s * tau).rho / rho0, b);
        }
    }

    #[test]
    fn constant_amplitude_inverts_to_its_frequency(omega in log_uniform(0.01, 100.0), m0 in log_uniform(0.1, 10.0)) {
        let rho = rho_constant(m0, omega);
        let grid: Vec<f64> = (0..5).map(|i| i as f64 * 0.3).collect();
        let f = omega_from_rho(&RhoProfile::Constant { rho }, m0, &grid, ExpulsivePolicy::Error).unwrap();
        for i in 0..grid.len() {
            prop_assert!(rel(f.omega(i).unwrap(), omega) < 1e-12);
        }
    }

    #[test]
    fn routes_agree_and_satisfy_the_equation(p in piecewise()) {
        let grid: Vec<f64> = (1..=40).map(|i| p.tau * 1.5 * i as f64 / 40.0).collect();
        let opts = SolverOptions::default().with_tolerances(1e-12, 1e-14);
        let ode = solve(&p, &grid, Route::Ode, &opts).unwrap();
        let formal = solve(&p, &grid, Route::Formal, &opts).unwrap();
        prop_assert!(formal.max_relative_residual() < 1e-10);
        // bounded at ten times the solver tolerance
        prop_assert!(ode.max_relative_residual() <= 1e-11, "{}", ode.max_relative_residual());
        for (a, b) in ode.points.iter().zip(&formal.points) {
            prop_assert!(rel(a.rho, b.rho) < 1e-8, "t={} {} vs {}", a.t, a.rho, b.rho);
            prop_assert!((a.rho_dot - b.rho_dot).abs() < 1e-8 * (1.0 + b.rho_dot.abs()));
            prop_assert!(lambda(&b.state(), b.omega_sq.sqrt(), 1.0).unwrap() >= 1.0);
        }
    }

    #[test]
    fn final_segment_conserves_its_invariant(delta in log_uniform(0.2, 5.0), eps in -3.0f64..3.0, omegaf in log_uniform(0.1, 10.0), m0 in log_uniform(0.2, 5.0)) {
        let tau = 1.3;
        let fs = final_segment(delta, eps, omegaf, tau, m0).unwrap();
        let c0 = fs.conserved(tau);
        let fsq = final_squeeze(delta, eps, omegaf, m0).unwrap();
        prop_assert!(rel(c0, 4.0 * m0 * omegaf * fsq.lambda_f - 2.0 * m0 * omegaf) < 1e-10);
        for k in 1..=20 {
            let t = tau + k as f64 * 0.37 / omegaf;
            prop_assert!(rel(fs.conserved(t), c0) < 1e-10);
            // r along the closed form equals r_f
            let s = ErmakovState { t, rho: fs.rho(t), rho_dot: fs.rho_dot(t) };
            prop_assert!((squeeze_param(&s, omegaf, m0).unwrap() - fsq.r_f).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_wronskian_is_constant(omega in log_uniform(0.1, 10.0), t in 0.0f64..20.0) {
        prop_assert!((ClassicalPair::harmonic(omega, t).wronskian() - ClassicalPair::harmonic(omega, 0.0).wronskian()).abs() < 1e-12);
    }

    #[test]
    fn after_the_modulation_only_the_phase_moves(delta in log_uniform(0.3, 3.0), eps in -2.0f64..2.0, omegaf in log_uniform(0.3, 3.0), n in 0u32..4) {
        let (tau, m0) = (0.8, 1.0);
        let fs = final_segment(delta, eps, omegaf, tau, m0).unwrap();
        let fsq = final_squeeze(delta, eps, omegaf, m0).unwrap();
        prop_assume!(fsq.r_f > 1e-3);
        let units = Units::default();
        let period = std::f64::consts::PI / omegaf;
        let at = |t: f64| record(&ErmakovState { t, rho: fs.rho(t), rho_dot: fs.rho_dot(t) }, omegaf, n, units).unwrap();
        let first = at(tau + 0.1);
        for k in 1..6 {
            let t = tau + 0.1 + k as f64 * 0.29 * period;
            let rec = at(t);
            prop_assert!((rec.r - first.r).abs() < 1e-9);
            prop_assert!(rel(rec.energy, first.energy) < 1e-9);
            prop_assert!(rel(rec.excitations.max(1e-300), first.excitations.max(1e-300)) < 1e-8 || first.excitations < 1e-12);
            prop_assert!((fsq.phase(t, tau).unwrap() - fsq.phase(t + period, tau).unwrap()).abs() < 1e-8);
            // the variances repeat after half an oscillation of ω_f
            let later = at(t + period);
            prop_assert!(rel(later.sigma_x2, rec.sigma_x2) < 1e-8);
        }
    }

    #[test]
    fn ground_row_is_a_distribution(n0 in 0.0f64..5.0) {
        let d = ground_distribution(n0, 1e-10, 50_000).unwrap();
        prop_assert!(d.iter().all(|p| *p >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn qstar_is_twice_n_plus_one(r in 0.0f64..5.0) {
        prop_assert_eq!(adiabaticity(r), 2.0 * mean_excitations(0, r) + 1.0);
        prop_assert!(mean_energy(0, r, 1.3, 1.0) >= 0.5 * 1.3);
    }

    #[test]
    fn positive_checks_bound_r_f_and_the_amplitude(
        delta in log_uniform(0.3, 3.0), eps in -2.0f64..2.0, omegaf in log_uniform(0.3, 3.0),
        u in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let tol = Tolerance::default();
        let a = EndState { delta, epsilon: eps, omegaf };
        let b = EndState {
            delta: delta + u[0] * tol.bound(delta, delta),
            epsilon: eps + u[1] * tol.bound(eps, eps),
            omegaf: omegaf + u[2] * tol.bound(omegaf, omegaf),
        };
        let check = check_equivalence(&a, &b, tol).unwrap();
        prop_assume!(check.equivalent);
        let ra = final_squeeze(a.delta, a.epsilon, a.omegaf, 1.0).unwrap().r_f;
        let rb = final_squeeze(b.delta, b.epsilon, b.omegaf, 1.0).unwrap().r_f;
        prop_assert!((ra - rb).abs() <= r_f_bound(&a, &b, 1.0, tol));
        let fa = final_segment(a.delta, a.epsilon, a.omegaf, 0.0, 1.0).unwrap();
        let fb = final_segment(b.delta, b.epsilon, b.omegaf, 0.0, 1.0).unwrap();
        // near the trough a relative comparison amplifies the frequency slack
        let scale = a.delta + a.epsilon.abs() / a.omegaf + 1.0 / a.omegaf.sqrt();
        for k in 1..10 {
            let t = k as f64 * 0.5;
            prop_assert!((fa.rho(t) - fb.rho(t)).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn exact_equivalence_is_an_equivalence_relation(delta in log_uniform(0.3, 3.0), eps in -2.0f64..2.0, w in log_uniform(0.3, 3.0), other in 0.0f64..1.0) {
        let exact = Tolerance::exact();
        let a = EndState { delta, epsilon: eps, omegaf: w };
        let b = a;
        let c = EndState { delta, epsilon: eps + other, omegaf: w };
        prop_assert!(check_equivalence(&a, &a, exact).unwrap().equivalent);
        let ab = check_equivalence(&a, &b, exact).unwrap().equivalent;
        prop_assert_eq!(ab, check_equivalence(&b, &a, exact).unwrap().equivalent);
        let ac = check_equivalence(&a, &c, exact).unwrap().equivalent;
        prop_assert_eq!(ac, check_equivalence(&c, &a, exact).unwrap().equivalent);
        let bc = check_equivalence(&b, &c, exact).unwrap().equivalent;
        if ab && bc { prop_assert!(ac); }
        prop_assert_eq!(ac, other == 0.0);
    }
}

#[test]
fn residual_helper_is_relative() {
    let rho = rho_constant(1.0, 2.0);
    assert!(relative_residual(rho, 0.0, 4.0, 1.0) < 1e-15);
    assert!(relative_residual(rho, 1.0, 4.0, 1.0) > 0.1);
}
