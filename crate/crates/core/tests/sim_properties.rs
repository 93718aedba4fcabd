use edgebatch_core::sim::{
    generate_workload, run_baseline_single_instance, run_baseline_static_batching, run_policy_sim,
    run_policy_sim_observed, throughput_upper_bound, BoundVariant, Policy, Scenario, StaticParams,
};
use edgebatch_core::{solve_p2_optimal, solve_p2_suboptimal, ComputeMode};

#[test]
fn poisson_count_is_within_three_sigma() {
    let n = generate_workload(&Scenario::standard(100.0, 100.0, 12)).len() as f64;
    assert!((n - 10_000.0).abs() <= 300.0, "{n}");
}

#[test]
fn workload_is_byte_identical_on_repeat() {
    let s = Scenario::standard(100.0, 10.0, 77);
    assert_eq!(format!("{:?}", generate_workload(&s)), format!("{:?}", generate_workload(&s)));
}

#[test]
fn optimal_never_schedules_fewer_per_epoch() {
    let s = Scenario::standard(150.0, 8.0, 21);
    let mut epochs = 0;
    run_policy_sim_observed(&s, Policy::EeOptimal, |inst, sel| {
        epochs += 1;
        assert!(solve_p2_suboptimal(inst).len() <= sel.len());
        assert_eq!(solve_p2_optimal(inst).0.len(), sel.len());
    });
    assert!(epochs > 10);
}

#[test]
fn all_runs_conserve_tasks() {
    for seed in 0..3 {
        let s = Scenario::standard(110.0, 6.0, seed);
        for p in Policy::ALL {
            let m = run_policy_sim(&s, p);
            assert!(m.is_conserved());
            assert_eq!((m.infeasible_selections, m.deadline_misses), (0, 0));
        }
        for mode in [ComputeMode::FullNetwork, ComputeMode::EarlyExit] {
            assert!(run_baseline_single_instance(&s, mode).is_conserved());
            assert!(run_baseline_static_batching(&s, StaticParams { batch_size: 6, timeout_s: 0.05 }, mode).is_conserved());
        }
    }
}

#[test]
fn full_network_rate_respects_the_slot_bound() {
    for lambda in [60.0, 120.0, 200.0] {
        let s = Scenario::standard(lambda, 20.0, 5);
        let bound = throughput_upper_bound(&s.profile, s.config.comp_slot_s, BoundVariant::SlotLimited);
        let m = run_policy_sim(&s, Policy::FullOptimal);
        let per_epoch = bound * s.config.comp_slot_s;
        assert!(m.completed as f64 <= per_epoch * m.epochs as f64);
        // Backlog drains for at most the longest deadline after arrivals stop.
        let drain = s.deadline_dist.hi / s.duration_s;
        assert!(m.completion_rate <= (bound / lambda) * (1.0 + drain) + 0.02, "{lambda}: {}", m.completion_rate);
    }
}

#[test]
fn policies_are_deterministic() {
    let s = Scenario::standard(90.0, 5.0, 3);
    for p in Policy::ALL {
        assert_eq!(run_policy_sim(&s, p), run_policy_sim(&s, p));
    }
}
