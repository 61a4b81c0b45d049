use proptest::prelude::*;

use super::*;
use crate::seed;

fn cart() -> EnvironmentSpec {
    EnvironmentSpec::builtin(EnvId::SprintCart)
}

fn full_throttle(spec: &EnvironmentSpec) -> ConstantPolicy {
    ConstantPolicy { obs_dim: spec.obs_dim, action: vec![1.0] }
}

fn feature(trace: &RolloutTrace, name: &str) -> Vec<f64> {
    trace.feature_series(name).unwrap()
}

#[test]
fn builtin_specs_validate() {
    for id in EnvId::ALL {
        let spec = EnvironmentSpec::builtin(id);
        spec.validate().unwrap();
        assert_eq!(spec.dt, 0.02);
        TargetWorldSpec::builtin(id).validate(&spec).unwrap();
    }
    assert_eq!(cart().horizon, 200);
    assert_eq!(EnvironmentSpec::builtin(EnvId::GlobeBalance).horizon, 500);
}

#[test]
fn first_reset_observation_is_zero_state() {
    let spec = cart();
    let mut env = make_environment(&spec, &spec.defaults(), 0).unwrap();
    assert_eq!(env.reset(), vec![0.0; spec.obs_dim]);
}

#[test]
fn negative_friction_is_rejected() {
    let spec = cart();
    let bad = spec.defaults().with("friction", -1.0);
    assert!(matches!(make_environment(&spec, &bad, 0), Err(SimError::OutOfValidRange { .. })));
    let extra = spec.defaults().with("wind", 1.0);
    assert!(matches!(make_environment(&spec, &extra, 0), Err(SimError::UnknownParameter(_))));
}

#[test]
fn step_errors() {
    let spec = cart();
    let mut env = make_environment(&spec, &spec.defaults(), 0).unwrap();
    assert_eq!(env.step(&[0.0]), Err(SimError::NotReset));
    env.reset();
    assert!(matches!(env.step(&[0.0, 1.0]), Err(SimError::DimensionMismatch { .. })));
    for _ in 0..spec.horizon {
        env.step(&[0.0]).unwrap();
    }
    assert_eq!(env.step(&[0.0]), Err(SimError::SteppedAfterTermination));
}

#[test]
fn zero_action_from_rest_does_not_move() {
    let spec = cart();
    let mut env = make_environment(&spec, &spec.defaults(), 0).unwrap();
    env.reset();
    let r = env.step(&[0.0]).unwrap();
    assert_eq!(r.features[spec.feature_index("vx").unwrap()], 0.0);
}

#[test]
fn single_full_step_matches_closed_form() {
    // From rest the viscous term vanishes: vx = dt * MAX_FORCE * motor * rate / M.
    let spec = cart();
    for (payload, motor) in [(0.0, 1.0), (0.5, 1.0), (2.0, 0.5)] {
        let a = spec.defaults().with("payload_mass", payload).with("motor_strength", motor);
        let mut env = make_environment(&spec, &a, 0).unwrap();
        env.reset();
        let r = env.step(&[1.0]).unwrap();
        let m = 1.0 + payload;
        let expected = 0.02 * (8.0 * motor * sprint_cart::ACTUATOR_RATE / m - 0.0);
        let vx = r.features[spec.feature_index("vx").unwrap()];
        assert!((vx - expected).abs() < 1e-15, "{vx} vs {expected}");
    }
}

#[test]
fn actions_are_clipped() {
    let spec = cart();
    let run = |a: f64| {
        let mut env = make_environment(&spec, &spec.defaults(), 0).unwrap();
        env.reset();
        env.step(&[a]).unwrap().features
    };
    assert_eq!(run(1.0), run(7.5));
    assert_eq!(run(-1.0), run(-3.0));
}

/// Exact solution of I w' = tau - d w from rest.
fn disk_oracle(tau: f64, damping: f64, inertia: f64, t: f64) -> f64 {
    tau / damping * (1.0 - (-damping * t / inertia).exp())
}

#[test]
fn spin_disk_spins_up_monotonically_to_equilibrium() {
    let spec = EnvironmentSpec::builtin(EnvId::SpinDisk);
    let trace = rollout(&spec, &spec.defaults(), &full_throttle(&spec), 3).unwrap();
    let w = feature(&trace, "wz");
    assert!(w.windows(2).all(|p| p[1] >= p[0]));
    let tau = spin_disk::MAX_TORQUE * 1.0 / (1.0 + spin_disk::GRIP_HALF);
    let inertia = spin_disk::INERTIA_BASE * 2.0;
    for (t, wt) in w.iter().enumerate() {
        let exact = disk_oracle(tau, 0.01, inertia, (t + 1) as f64 * spec.dt);
        assert!((wt - exact).abs() <= 0.02 * exact.abs() + 1e-9, "t={t}: {wt} vs {exact}");
    }
}

#[test]
fn zero_policy_never_moves_cart() {
    let spec = cart();
    let zero = ConstantPolicy { obs_dim: spec.obs_dim, action: vec![0.0] };
    let trace = rollout(&spec, &spec.defaults(), &zero, 11).unwrap();
    assert_eq!(trace.episode_length, spec.horizon);
    assert!(feature(&trace, "vx").iter().all(|v| *v == 0.0));
}

#[test]
fn rollouts_are_bit_reproducible() {
    let spec = cart();
    let a = spec.defaults().with("push_velocity", 1.0);
    let p = full_throttle(&spec);
    let t1 = rollout(&spec, &a, &p, 5).unwrap();
    let t2 = rollout(&spec, &a, &p, 5).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(t1.content_hash(), t2.content_hash());
    assert_ne!(t1.content_hash(), rollout(&spec, &a, &p, 6).unwrap().content_hash());
}

/// Terminal velocity of M v' = F - c v from rest after time t.
fn cart_oracle(force: f64, drag: f64, mass: f64, t: f64) -> f64 {
    force / drag * (1.0 - (-drag * t / mass).exp())
}

#[test]
fn higher_friction_lowers_terminal_speed() {
    let spec = cart();
    let p = full_throttle(&spec);
    let t_end = spec.horizon as f64 * spec.dt;
    let mut terminal = Vec::new();
    for friction in [0.5, 10.0] {
        let trace = rollout(&spec, &spec.defaults().with("friction", friction), &p, 0).unwrap();
        let vx = *feature(&trace, "vx").last().unwrap();
        let exact = cart_oracle(8.0, friction, 1.0, t_end);
        assert!((vx - exact).abs() < 0.05 * exact, "{vx} vs {exact}");
        terminal.push(vx);
    }
    assert!(terminal[1] < terminal[0]);
}

#[test]
fn terminal_speed_monotone_over_grids() {
    let spec = cart();
    let p = full_throttle(&spec);
    let terminal = |a: &PhysicsAssignment| *feature(&rollout(&spec, a, &p, 0).unwrap(), "vx").last().unwrap();
    let friction: Vec<f64> =
        spec.param("friction").unwrap().grid().iter().map(|f| terminal(&spec.defaults().with("friction", *f))).collect();
    assert!(friction.windows(2).all(|w| w[1] <= w[0]), "{friction:?}");
    let motor: Vec<f64> = spec
        .param("motor_strength")
        .unwrap()
        .grid()
        .iter()
        .map(|m| terminal(&spec.defaults().with("motor_strength", *m)))
        .collect();
    assert!(motor.windows(2).all(|w| w[1] >= w[0]), "{motor:?}");
}

#[test]
fn sampling_respects_intervals() {
    let spec = cart();
    let defaults = spec.defaults();
    let mut rng = seed::rng(1, &[]);
    let empty = DomainRandomizationConfig::no_dr();
    assert_eq!(sample_assignment(&spec, &empty, &defaults, &mut rng).unwrap(), defaults);

    let point = DomainRandomizationConfig::no_dr().with("friction", 0.5, 0.5);
    assert_eq!(sample_assignment(&spec, &point, &defaults, &mut rng).unwrap().get("friction"), Some(0.5));

    let bad = DomainRandomizationConfig::no_dr().with("restitution", 0.5, 1.5);
    assert!(matches!(
        sample_assignment(&spec, &bad, &defaults, &mut rng),
        Err(SimError::IntervalOutsideValidRange { .. })
    ));
}

#[test]
fn uniform_sampling_mean() {
    let spec = cart();
    let defaults = spec.defaults();
    let dr = DomainRandomizationConfig::no_dr().with("friction", 0.0, 10.0);
    let mut rng = seed::rng(2, &[]);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let a = sample_assignment(&spec, &dr, &defaults, &mut rng).unwrap();
        assert_eq!(a.get("restitution"), Some(0.5));
        sum += a.get("friction").unwrap();
    }
    assert!((sum / n as f64 - 5.0).abs() < 0.1);
}

#[test]
fn degenerate_target_world_matches_nominal() {
    let spec = cart();
    let target = TargetWorldSpec {
        base_env_id: EnvId::SprintCart,
        target_assignment: spec.defaults(),
        obs_noise_std: 0.0,
        action_delay_steps: 0,
        torque_ripple_amp: 0.0,
    };
    let p = ConstantPolicy { obs_dim: spec.obs_dim, action: vec![0.6] };
    let nominal = rollout(&spec, &spec.defaults(), &p, 9).unwrap();
    let tw = rollout_instance(make_target_world(&spec, &target, 9).unwrap(), &p, 9).unwrap();
    assert_eq!(nominal.content_hash(), tw.content_hash());
}

#[test]
fn action_delay_pads_with_zero() {
    let spec = cart();
    let target = TargetWorldSpec {
        base_env_id: EnvId::SprintCart,
        target_assignment: spec.defaults(),
        obs_noise_std: 0.0,
        action_delay_steps: 1,
        torque_ripple_amp: 0.0,
    };
    let mut env = make_target_world(&spec, &target, 0).unwrap();
    env.reset();
    let vx = spec.feature_index("vx").unwrap();
    assert_eq!(env.step(&[1.0]).unwrap().features[vx], 0.0);
    assert!(env.step(&[1.0]).unwrap().features[vx] > 0.0);
}

#[test]
fn observation_noise_has_requested_std() {
    let spec = cart();
    let target = TargetWorldSpec {
        base_env_id: EnvId::SprintCart,
        target_assignment: spec.defaults(),
        obs_noise_std: 0.01,
        action_delay_steps: 0,
        torque_ripple_amp: 0.0,
    };
    let mut diffs = Vec::new();
    let mut episode = 0;
    while diffs.len() < 10_000 {
        let mut env = make_target_world(&spec, &target, episode).unwrap();
        let mut obs = env.reset();
        loop {
            diffs.extend(obs.iter().zip(env.clean_observation()).map(|(o, c)| o - c));
            let r = env.step(&[0.3]).unwrap();
            let done = r.done();
            obs = r.observation;
            if done {
                break;
            }
        }
        episode += 1;
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 0.01).abs() < 0.0005, "std {std}");
}

#[test]
fn torque_ripple_stays_within_amplitude() {
    let spec = cart();
    let target = TargetWorldSpec { action_delay_steps: 0, obs_noise_std: 0.0, ..TargetWorldSpec::builtin(EnvId::SprintCart) };
    let trace = rollout_instance(make_target_world(&spec, &target, 4).unwrap(), &full_throttle(&spec), 4).unwrap();
    let nominal = 8.0 * 0.85;
    // Skip the actuator rise; after 150 steps u = 1 - 0.8^150 to round-off.
    for f in feature(&trace, "torque").iter().skip(150) {
        assert!(*f >= nominal * 0.95 - 1e-9 && *f <= nominal * 1.05 + 1e-9);
    }
}

#[test]
fn globe_terminates_on_fall() {
    let spec = EnvironmentSpec::builtin(EnvId::GlobeBalance);
    let trace = rollout(&spec, &spec.defaults(), &full_throttle(&spec), 0).unwrap();
    assert!(trace.episode_length < spec.horizon);
    assert!(trace.steps.last().unwrap().terminated);
    assert!(feature(&trace, "theta").last().unwrap().abs() > globe_balance::FALL_ANGLE);
}

#[test]
fn push_is_applied_once() {
    // Frictionless, unforced and with an elastic bumper: speed only changes at the push.
    let spec = cart();
    let a = spec.defaults().with("push_velocity", 3.0).with("friction", 0.0).with("restitution", 1.0);
    let zero = ConstantPolicy { obs_dim: spec.obs_dim, action: vec![0.0] };
    let mut backward = 0;
    for s in 0..8 {
        let trace = rollout(&spec, &a, &zero, s).unwrap();
        let mut vx = vec![0.0];
        vx.extend(feature(&trace, "vx"));
        let jumps: Vec<usize> = (1..vx.len()).filter(|&t| vx[t] != vx[t - 1]).collect();
        assert_eq!(jumps.len(), 1);
        assert!((vx[jumps[0]] - 3.0).abs() < 1e-12);
        // A backward push hits the bumper within the same step.
        if feature(&trace, "x")[jumps[0] - 1] == 0.0 {
            backward += 1;
        }
    }
    assert!(backward > 0 && backward < 8);
}

#[test]
fn csv_export_has_expected_header() {
    let spec = cart();
    let trace = rollout(&spec, &spec.defaults(), &full_throttle(&spec), 0).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("step,obs_0,obs_1,obs_2,obs_3,obs_4,act_0,vx,x,"));
    assert_eq!(text.lines().count(), spec.horizon + 1);
}

#[test]
fn json_document_round_trip() {
    for id in EnvId::ALL {
        let spec = EnvironmentSpec::builtin(id);
        let target = TargetWorldSpec::builtin(id);
        let doc = EnvironmentDocument::from_spec(&spec, Some(&target));
        let text = doc.to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in ["env_id", "horizon", "dt", "params", "target"] {
            assert!(keys.contains(&k.to_string()));
        }
        let (back, tw) = EnvironmentDocument::from_json(&text).unwrap().to_spec().unwrap();
        assert_eq!(back, spec);
        assert_eq!(tw.unwrap(), target);
    }
}

#[test]
fn json_document_rejects_bad_params() {
    let spec = cart();
    let mut doc = EnvironmentDocument::from_spec(&spec, None);
    doc.params[0].default = -3.0;
    assert!(doc.to_spec().is_err());
    let mut doc = EnvironmentDocument::from_spec(&spec, None);
    doc.params[0].name = "wind".into();
    assert!(matches!(doc.to_spec(), Err(SimError::UnknownParameter(_))));
}

fn in_range_value(p: &PhysicsParameterSpec, u: f64) -> f64 {
    let grid = p.grid();
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    lo + u * (hi - lo)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn features_finite_for_in_range_assignments(
        env_idx in 0usize..3,
        us in proptest::collection::vec(0.0f64..=1.0, 7),
        action in -5.0f64..5.0,
        seed_v in 0u64..1000,
    ) {
        let spec = EnvironmentSpec::builtin(EnvId::ALL[env_idx]);
        let mut a = spec.defaults();
        for (p, u) in spec.param_specs.iter().zip(&us) {
            a.set(&p.name, in_range_value(p, *u));
        }
        let policy = ConstantPolicy { obs_dim: spec.obs_dim, action: vec![action] };
        let trace = rollout(&spec, &a, &policy, seed_v).unwrap();
        prop_assert_eq!(trace.steps.len(), trace.episode_length);
        for s in &trace.steps {
            prop_assert!(s.features.iter().all(|f| f.is_finite()));
            prop_assert!(s.observation.iter().all(|f| f.is_finite()));
        }
    }
}
