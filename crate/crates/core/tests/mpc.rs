use alslq::systems::PlanarMoverParams;
use alslq::{run_mpc, tasks, MpcConfig, MpcResult, PenaltyStrategy, TickMetrics};
use nalgebra::DVector;

fn config(strategy: PenaltyStrategy, sim_duration: f64) -> MpcConfig {
    MpcConfig {
        strategy,
        sim_duration,
        ..MpcConfig::default()
    }
}

fn without_timing(m: &[TickMetrics]) -> Vec<TickMetrics> {
    m.iter().map(|t| TickMetrics { solve_ms: 0.0, ..*t }).collect()
}

#[test]
fn regulator_at_the_origin_applies_no_input() {
    let mut task = tasks::lq_sanity().unwrap();
    task.ocp.x0 = DVector::zeros(2);
    let res = run_mpc(&task.ocp, &task.completion, &config(PenaltyStrategy::default(), 0.5)).unwrap();
    assert!(res.summary.max_abs_input < 1e-9, "{}", res.summary.max_abs_input);
    assert!(res.states.values().iter().all(|x| x.amax() < 1e-9));
    assert_eq!(res.summary.failed_ticks, 0);
}

#[test]
fn identical_configs_give_identical_runs() {
    let task = tasks::equality_toy().unwrap();
    let cfg = config(PenaltyStrategy::phr(100.0, 10.0), 1.0);
    let a = run_mpc(&task.ocp, &task.completion, &cfg).unwrap();
    let b = run_mpc(&task.ocp, &task.completion, &cfg).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.inputs, b.inputs);
    assert_eq!(without_timing(&a.metrics), without_timing(&b.metrics));
}

#[test]
fn applied_inputs_keep_the_actuators_opposed() {
    let task = tasks::equality_toy().unwrap();
    let res = run_mpc(&task.ocp, &task.completion, &config(PenaltyStrategy::default(), 6.0)).unwrap();
    let worst = res
        .inputs
        .values()
        .iter()
        .map(|u| (u[0] + u[1]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    assert!(res.summary.completed, "{:?}", res.summary.completion_time);
}

#[test]
fn ticks_after_the_first_run_one_riccati_pass_and_one_dual_update() {
    let task = tasks::equality_toy().unwrap();
    let res = run_mpc(
        &task.ocp,
        &task.completion,
        &config(PenaltyStrategy::phr(100.0, 10.0), 0.5),
    )
    .unwrap();
    assert_eq!(res.metrics[0].riccati_passes, 10);
    for m in &res.metrics[1..] {
        assert_eq!((m.riccati_passes, m.dual_updates), (1, 1), "tick {}", m.iteration);
    }
}

#[test]
fn barrier_runs_without_dual_updates() {
    let task = tasks::lq_sanity().unwrap();
    let res = run_mpc(
        &task.ocp,
        &task.completion,
        &config(PenaltyStrategy::relaxed_barrier(0.1, 0.1), 0.3),
    )
    .unwrap();
    assert!(res.metrics.iter().all(|m| m.dual_updates == 0));
}

#[test]
fn step_length_outside_the_stable_range_is_reported() {
    let task = tasks::lq_sanity().unwrap();
    let res = run_mpc(
        &task.ocp,
        &task.completion,
        &config(PenaltyStrategy::phr(10.0, 25.0), 0.1),
    )
    .unwrap();
    assert!(
        res.warnings.iter().any(|w| w.contains("outside (0, 2*rho)")),
        "{:?}",
        res.warnings
    );
}

fn maze(strategy: PenaltyStrategy) -> MpcResult {
    let task = tasks::planar_maze(&PlanarMoverParams::default_maze()).unwrap();
    run_mpc(&task.ocp, &task.completion, &config(strategy, 2.5)).unwrap()
}

#[test]
fn augmented_lagrangian_methods_thread_the_maze() {
    for strategy in [
        PenaltyStrategy::phr(100.0, 10.0),
        PenaltyStrategy::non_slack(100.0, 10.0),
        PenaltyStrategy::smooth_phr(100.0, 0.5),
    ] {
        let s = maze(strategy).summary;
        assert!(s.completed, "{:?} did not reach the goal", strategy.kind);
        assert!(
            s.max_applied_violation <= 0.05,
            "{:?}: {}",
            strategy.kind,
            s.max_applied_violation
        );
    }
}
