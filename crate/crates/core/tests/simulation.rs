use edgemf::balancer::estimate_gradient;
use edgemf::bandit::{average_profile, Simulator};
use edgemf::experiment::calibrate_dmax_with;
use edgemf::oracle::steady_profile_oracle;
use edgemf::reward::{TypeAtoms, TypeLaw};
use edgemf::{NetworkConfig, RewardScaling, TargetProfile};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn traces_independent_of_thread_count() {
    let cfg = NetworkConfig::paper(3000, 3).with_deadline(80.0);
    let sim = Simulator::new(cfg).unwrap();
    let alpha = RewardScaling::new(vec![0.2, 0.3, 0.5]).unwrap();
    let one = in_pool(1, || sim.simulate(&alpha, 60, 42).unwrap());
    let four = in_pool(4, || sim.simulate(&alpha, 60, 42).unwrap());
    assert_eq!(one, four);
    let other = sim.simulate(&alpha, 60, 43).unwrap();
    assert_ne!(one.profiles, other.profiles);
}

/// Mean and largest `|f_t - f_{t-1}|_inf` over the second half of a run.
fn late_variation(m: usize, alpha: &[f64], seed: u64) -> (f64, f64) {
    let cfg = NetworkConfig::paper(m, 2).with_deadline(0.07 * m as f64);
    let sim = Simulator::new(cfg).unwrap();
    let trace = sim
        .simulate(&RewardScaling::new(alpha.to_vec()).unwrap(), 300, seed)
        .unwrap();
    let changes: Vec<f64> = trace.profiles[150..]
        .windows(2)
        .map(|w| {
            w[0].as_slice()
                .iter()
                .zip(w[1].as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let mean = changes.iter().sum::<f64>() / changes.len() as f64;
    (mean, changes.iter().cloned().fold(0.0, f64::max))
}

#[test]
fn profile_settles_at_scale() {
    // Independent choices alone give |f_t - f_{t-1}| a standard deviation of
    // about 0.7 / sqrt(m); the profile should not move more than that.
    for alpha in [[0.5, 0.5], [0.3, 0.7]] {
        let (mean, worst) = late_variation(10_000, &alpha, 7);
        assert!(
            mean < 0.01 && worst < 0.03,
            "m=1e4 {alpha:?}: mean {mean} max {worst}"
        );
    }
    let (mean, worst) = late_variation(100_000, &[0.3, 0.7], 7);
    assert!(worst < 0.02, "m=1e5: mean {mean} max {worst}");
}

#[test]
fn oracle_matches_large_population() {
    // Short lifetimes keep counters below the oracle's saturation cap.
    let m = 100_000;
    let mut cfg = NetworkConfig::paper(m, 2).with_deadline(0.025 * m as f64);
    cfg.continuation = 0.5;
    let atoms = TypeAtoms::from_channel(&cfg, 2).unwrap();
    let alpha = RewardScaling::new(vec![0.3, 0.7]).unwrap();
    let exact = steady_profile_oracle(&cfg, &atoms, &alpha, 6).unwrap();

    let sim = Simulator::with_type_law(cfg, TypeLaw::Atoms(atoms)).unwrap();
    let trace = sim.simulate(&alpha, 300, 5).unwrap();
    let measured = average_profile(&trace, 50).unwrap();
    let gap = (measured[0] - exact.profile[0]).abs();
    assert!(
        gap < 0.02,
        "oracle {:?} vs simulated {:?}",
        exact.profile,
        measured
    );
}

#[test]
fn update_direction_follows_excess_load() {
    let mut cfg = NetworkConfig::paper(100, 2).with_deadline(2.5);
    cfg.continuation = 0.8;
    let atoms = TypeAtoms::from_channel(&cfg, 2).unwrap();
    for (alpha, target) in [([0.5, 0.5], [0.2, 0.8]), ([0.1, 0.9], [0.6, 0.4])] {
        let f = steady_profile_oracle(
            &cfg,
            &atoms,
            &RewardScaling::new(alpha.to_vec()).unwrap(),
            4,
        )
        .unwrap()
        .profile;
        let target = TargetProfile::new(target.to_vec()).unwrap();
        let g = estimate_gradient(&f, &target).unwrap();
        // alpha_1 - s * g_1 moves alpha_1 down exactly when arm 1 is over target.
        if f[0] > target.as_slice()[0] {
            assert!(g[0] > 0.0);
        } else {
            assert!(g[0] < 0.0);
        }
    }
}

#[test]
fn deadline_scales_with_population() {
    // The channel law puts positive density at theta = 0, where the delay
    // blows up like 1/theta, so its mean delay is infinite and sample means
    // are dominated by the worst draw. Scaling is checked on a law with
    // types bounded away from zero.
    let law = |cfg: &NetworkConfig| TypeLaw::Atoms(TypeAtoms::from_channel(cfg, 3).unwrap());
    let run = |m: usize| {
        let cfg = NetworkConfig::paper(m, 2);
        let sizes = edgemf::reward::SizeLaw::new(&cfg);
        calibrate_dmax_with(&cfg, &law(&cfg), 20, 3, |rng| sizes.sample(rng)).unwrap()
    };
    let ratio = run(4000).deadline / run(2000).deadline;
    assert!((ratio / 2.0 - 1.0).abs() < 0.1, "ratio {ratio}");
}
