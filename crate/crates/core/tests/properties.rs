//! Property tests of invariants that hold for every admissible input:
//! service-law contracts, simulation determinism and conservation, coupling
//! dominance, particle-ensemble bookkeeping and fixed points of the
//! self-averaging equation.

use phlab_core::dists::{validate_assumptions, ServiceDistribution};
use phlab_core::nmp::{EnsembleInit, EvolveOptions, ParticleEnsemble};
use phlab_core::queue_sim::{
    coupled_monotone_run, simulate_gfp, simulate_network, Intensity, NetworkConfig, NetworkInit, ServerState,
};
use phlab_core::selfavg::{iterate_monotone, solve_forward, History, InitialGuess, KernelFamily};
use proptest::prelude::*;

fn h2(w: f64, r1: f64, r2: f64) -> ServiceDistribution {
    ServiceDistribution::hyperexponential(&[w, 1.0 - w], &[r1, r2]).unwrap()
}

fn service() -> impl Strategy<Value = ServiceDistribution> {
    prop_oneof![
        Just(ServiceDistribution::exponential()),
        (0.1f64..0.9, 0.3f64..1.0, 1.0f64..4.0).prop_map(|(w, a, b)| h2(w, a, b)),
        Just(ServiceDistribution::uniform(1.0).unwrap()),
    ]
}

fn busy_or_empty() -> impl Strategy<Value = ServerState> {
    prop_oneof![
        Just(ServerState::empty()),
        (1u32..5, 0.0f64..2.0).prop_map(|(n, tau)| ServerState::busy(n, tau).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Validated laws have a finite hazard and residual means below the
    /// reported bound `C̄`.
    #[test]
    fn validated_laws_have_finite_hazard_and_bounded_residual_mean(
        w in 0.1f64..0.9, a in 0.3f64..1.0, b in 1.0f64..4.0, tau in 0.0f64..20.0,
    ) {
        let d = h2(w, a, b);
        let r = validate_assumptions(&d, 1.0);
        prop_assume!(r.all_pass());
        let h = d.hazard(tau).unwrap();
        prop_assert!(h.is_finite() && h > 0.0);
        let m = d.residual_mean(tau).unwrap();
        prop_assert!(m <= r.residual_mean_bound * (1.0 + 1e-9), "E(η|{tau}) = {m} > C̄ = {}", r.residual_mean_bound);
    }

    /// The same configuration and seed give identical paths and flow logs.
    #[test]
    fn gfp_runs_are_deterministic(seed in 0u64..1_000_000, level in 0.1f64..0.9, d in service(), init in busy_or_empty()) {
        let lambda = Intensity::Sinusoid { level, amplitude: 0.5, omega: 1.3, phase: 0.0 };
        let a = simulate_gfp(&init, &lambda, &d, 30.0, seed).unwrap();
        let b = simulate_gfp(&init, &lambda, &d, 30.0, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    /// A server departs only while busy, and timestamps are ordered.
    #[test]
    fn gfp_is_work_conserving(seed in 0u64..1_000_000, rate in 0.1f64..1.5, d in service(), init in busy_or_empty()) {
        let (traj, log) = simulate_gfp(&init, &Intensity::Constant { rate }, &d, 40.0, seed).unwrap();
        prop_assert!(log.arrivals.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(log.departures.windows(2).all(|w| w[0] <= w[1]));
        // Replay the two streams (departures first at ties cannot make n
        // negative if the engine is correct; arrivals first at ties is the
        // conservative order).
        let mut n = i64::from(init.n);
        let (mut i, mut j) = (0, 0);
        while j < log.departures.len() {
            if i < log.arrivals.len() && log.arrivals[i] <= log.departures[j] {
                n += 1;
                i += 1;
            } else {
                prop_assert!(n >= 1, "departure at {} from an empty server", log.departures[j]);
                n -= 1;
                j += 1;
            }
        }
        n += (log.arrivals.len() - i) as i64;
        prop_assert_eq!(n, i64::from(traj.at(40.0)));
        prop_assert_eq!(traj.n.len(), traj.times.len());
    }

    /// The closed network keeps all `N` customers: the pooled time-averaged
    /// queue is exactly `N/M` and the pooled law is a probability vector.
    #[test]
    fn closed_network_conserves_customers(seed in 0u64..1_000_000, m in 1usize..12, n in 1usize..30, d in service()) {
        let cfg = NetworkConfig {
            m, n, horizon: 50.0, burn_in: 0.0, tagged: vec![], corr_dt: 1.0, init: NetworkInit::UniformComposition,
        };
        let run = simulate_network(&cfg, &d, seed).unwrap();
        prop_assert!(run.conservation_audits > 0);
        prop_assert!((run.pooled.mean_queue - n as f64 / m as f64).abs() < 1e-9 * n as f64);
        let mass: f64 = run.pooled.dist.iter().map(|(_, p)| p).sum();
        prop_assert!((mass - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&run.pooled.idle_frac));
    }

    /// Coupled servers never cross: the system with more input stays ahead.
    #[test]
    fn coupling_preserves_order(
        seed in 0u64..1_000_000, low in 0.05f64..0.9, extra in 0.0f64..0.5, d in service(),
        n2 in 0u32..3, more in 0u32..3, tau in 0.0f64..1.0,
    ) {
        let init2 = if n2 == 0 { ServerState::empty() } else { ServerState::busy(n2, tau).unwrap() };
        let init1 = if n2 + more == 0 {
            ServerState::empty()
        } else if n2 == 0 {
            ServerState::busy(more, tau).unwrap()
        } else {
            ServerState::busy(n2 + more, tau).unwrap()
        };
        let run = coupled_monotone_run(
            &init1, &init2, &Intensity::Constant { rate: low + extra }, &Intensity::Constant { rate: low }, &d, 50.0, seed, 0,
        ).unwrap();
        prop_assert_eq!(run.violations, 0);
        prop_assert!(run.checked > 0);
    }

    /// Ensemble bookkeeping: histograms hold every particle, the mean queue
    /// matches the histogram, and binned rates respect the cap.
    #[test]
    fn ensemble_snapshots_are_consistent(seed in 0u64..1_000_000, burst in 0u32..4, k in 1000usize..4000, d in service()) {
        prop_assume!(!matches!(d.spec(), phlab_core::dists::DistSpec::Uniform { .. }));
        let init = if burst == 0 { EnsembleInit::Empty } else { EnsembleInit::Burst { n: burst } };
        let mut e = ParticleEnsemble::new(d, &init, k).unwrap();
        let ev = e.evolve(&EvolveOptions::with_horizon(10.0), seed).unwrap();
        prop_assert_eq!(ev.cap_violations, 0);
        for s in &ev.snapshots {
            let total: u64 = s.hist.iter().sum();
            prop_assert_eq!(total, k as u64);
            let mean = s.hist.iter().enumerate().map(|(n, &c)| n as f64 * c as f64).sum::<f64>() / k as f64;
            prop_assert!((mean - s.mean_queue).abs() < 1e-9);
            prop_assert!((s.idle_frac - s.hist[0] as f64 / k as f64).abs() < 1e-12);
        }
    }

    /// Constants solve the self-averaging equation for every finite-range
    /// kernel.
    #[test]
    fn constants_are_fixed_points(t in 0.5f64..3.0, a in -0.9f64..0.9, omega in 0.1f64..5.0, kappa in 0.01f64..5.0) {
        let h = 2e-3;
        let t = (t / h).round() * h;
        let k = KernelFamily::FiniteRange { t, a, omega };
        let f = solve_forward(&History::constant(t, h, kappa).unwrap(), &k, 15.0).unwrap();
        let z = f.zero_index().unwrap();
        for i in z..f.len() {
            prop_assert!((f.value(i) - kappa).abs() < 1e-6 * kappa, "{} at {}", f.value(i), f.x(i));
        }
    }

    /// From zero, the monotone iteration is nondecreasing, stays below
    /// `sup φ` and approaches the forward solution.
    #[test]
    fn monotone_iteration_is_bounded_and_nondecreasing(a in -0.9f64..0.9, omega in 0.1f64..3.0, c in 0.0f64..1.0) {
        let h = 5e-3;
        let k = KernelFamily::FiniteRange { t: 1.0, a, omega };
        let hist = History::from_fn(1.0, h, |x| 1.0 + c * (4.0 * x).sin()).unwrap();
        let it = iterate_monotone(&hist, &k, 60, 3.0, &InitialGuess::Zero).unwrap();
        prop_assert!(it.monotone);
        for f in &it.iterates {
            prop_assert!(f.iter().all(|&v| v <= it.cap * (1.0 + 1e-12)));
        }
        let exact = solve_forward(&hist, &k, 3.0).unwrap();
        let z = exact.zero_index().unwrap();
        let last = it.iterates.last().unwrap();
        for (i, v) in last.iter().enumerate() {
            prop_assert!((v - exact.value(z + i)).abs() < 1e-6, "{} vs {} at node {i}", v, exact.value(z + i));
        }
    }
}
