//! Closed-loop receding-horizon simulation. After the first tick every MPC
//! call performs exactly one Riccati pass and one multiplier update.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dual::{
    check_stability, update_equality_multipliers, update_multiplier_trajectory, DualUpdateConfig, Stability,
};
use crate::error::{Error, Result};
use crate::integrator::{Integrator, IntegratorSettings};
use crate::penalty::PenaltyStrategy;
use crate::slq::{forward_rollout, AffinePolicy, Multipliers, Nominal, OcpDefinition, SlqSettings, SlqSolver};
use crate::trajectory::{TimeGrid, Trajectory};

/// `sqrt(∫ Σ_i min{0, h_i(t)}² dt)` by the trapezoid rule.
pub fn violation_l2(h: &Trajectory) -> f64 {
    let density: Vec<f64> = h
        .values()
        .iter()
        .map(|v| v.iter().map(|&x| x.min(0.0).powi(2)).sum())
        .collect();
    h.grid()
        .nodes()
        .windows(2)
        .zip(density.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .fold(0.0, |acc, x| acc + x)
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Hz.
    pub mpc_rate: f64,
    /// Prediction horizon in seconds.
    pub horizon: f64,
    /// Largest spacing of the horizon grid.
    pub node_spacing: f64,
    pub initial_solve_iters: usize,
    pub plant_step: f64,
    pub sim_duration: f64,
    pub strategy: PenaltyStrategy,
    /// Overrides the update rule derived from `strategy`.
    pub dual: Option<DualUpdateConfig>,
    /// Initial multiplier value on every constraint and node.
    pub initial_multiplier: f64,
    pub solver: SlqSettings,
    pub max_consecutive_failures: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            mpc_rate: 100.0,
            horizon: 3.0,
            node_spacing: 0.01,
            initial_solve_iters: 10,
            plant_step: 1e-3,
            sim_duration: 6.0,
            strategy: PenaltyStrategy::default(),
            dual: None,
            initial_multiplier: 0.0,
            solver: SlqSettings::default(),
            max_consecutive_failures: 3,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mpc_rate", self.mpc_rate),
            ("horizon", self.horizon),
            ("node_spacing", self.node_spacing),
            ("plant_step", self.plant_step),
            ("sim_duration", self.sim_duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.plant_step > 1.0 / self.mpc_rate + 1e-12 {
            return Err(Error::param("plant_step", "must not exceed the MPC period"));
        }
        if 1.0 / self.mpc_rate >= self.horizon {
            return Err(Error::param("horizon", "must be longer than the MPC period"));
        }
        if self.node_spacing > self.horizon {
            return Err(Error::param("node_spacing", "must not exceed the horizon"));
        }
        if self.initial_solve_iters == 0 {
            return Err(Error::param("initial_solve_iters", "must be at least 1"));
        }
        if self.max_consecutive_failures == 0 {
            return Err(Error::param("max_consecutive_failures", "must be at least 1"));
        }
        if !(self.initial_multiplier >= 0.0 && self.initial_multiplier.is_finite()) {
            return Err(Error::param("initial_multiplier", "must be non-negative"));
        }
        self.strategy.validate()?;
        self.solver.validate()
    }

    pub fn dual_config(&self) -> Option<DualUpdateConfig> {
        self.dual.or_else(|| DualUpdateConfig::for_strategy(&self.strategy))
    }
}

/// When a closed-loop run counts as having achieved its task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompletionRule {
    /// `|wrap(x[index] − target)| < tolerance` held continuously for `hold` seconds.
    Upright {
        index: usize,
        target: f64,
        tolerance: f64,
        hold: f64,
    },
    /// Position within `radius` of `goal`.
    ReachGoal {
        position: [usize; 2],
        goal: [f64; 2],
        radius: f64,
    },
    Never,
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    (a + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone)]
struct CompletionTracker {
    rule: CompletionRule,
    entered: Option<f64>,
    done: Option<f64>,
}

impl CompletionTracker {
    fn observe(&mut self, t: f64, x: &DVector<f64>) {
        if self.done.is_some() {
            return;
        }
        match &self.rule {
            CompletionRule::Upright {
                index,
                target,
                tolerance,
                hold,
            } => {
                if wrap_angle(x[*index] - target).abs() < *tolerance {
                    let start = *self.entered.get_or_insert(t);
                    if t - start >= *hold - 1e-9 {
                        self.done = Some(start);
                    }
                } else {
                    self.entered = None;
                }
            }
            CompletionRule::ReachGoal { position, goal, radius } => {
                let d = (x[position[0]] - goal[0]).hypot(x[position[1]] - goal[1]);
                if d < *radius {
                    self.done = Some(t);
                }
            }
            CompletionRule::Never => {}
        }
    }
}

/// One row per MPC call.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TickMetrics {
    pub iteration: usize,
    pub sim_time: f64,
    /// Penalty-free cost of the current plan.
    pub cost: f64,
    pub violation_l2: f64,
    pub max_violation: f64,
    pub gamma: f64,
    pub solve_ms: f64,
    pub max_nu: f64,
    /// Largest constraint violation of the plant between this tick and the next.
    pub applied_max_violation: f64,
    pub riccati_passes: usize,
    pub dual_updates: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MpcSummary {
    pub ticks: usize,
    pub completed: bool,
    pub completion_time: Option<f64>,
    pub aborted: bool,
    pub failed_ticks: usize,
    pub mean_violation_l2: f64,
    pub peak_violation_l2: f64,
    pub max_applied_violation: f64,
    pub mean_solve_ms: f64,
    pub peak_solve_ms: f64,
    pub p50_solve_ms: f64,
    pub p95_solve_ms: f64,
    pub final_cost: f64,
    /// Mean plan cost over the last tenth of the ticks.
    pub steady_state_cost: f64,
    pub max_abs_input: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcResult {
    /// Plant state at every plant step.
    pub states: Trajectory,
    /// Input applied at every plant step.
    pub inputs: Trajectory,
    pub metrics: Vec<TickMetrics>,
    pub summary: MpcSummary,
    pub warnings: Vec<String>,
    pub abort_reason: Option<String>,
}

/// Runs the closed loop from `template.x0`; the horizon of `template` is
/// replaced by one built from `config`.
pub fn run_mpc(template: &OcpDefinition, completion: &CompletionRule, config: &MpcConfig) -> Result<MpcResult> {
    config.validate()?;
    let mut warnings = Vec::new();
    let dual_cfg = config.dual_config();
    if let Some(cfg) = &dual_cfg {
        if let Stability::Warning(w) = check_stability(cfg) {
            warnings.push(w);
        }
    }
    let period = 1.0 / config.mpc_rate;
    let n_ticks = (config.sim_duration * config.mpc_rate + 1e-9).floor() as usize;
    let mut grid = TimeGrid::with_max_spacing(0.0, config.horizon, config.node_spacing)?;
    let mut x_plant = template.x0.clone();
    let mut solver = SlqSolver::new(
        template.reanchored(x_plant.clone(), grid.clone()),
        config.strategy,
        config.solver,
    )?;
    let nu_floor = config.strategy.multiplier_floor();
    let mut multipliers = Multipliers::constant(solver.ocp(), &grid, config.initial_multiplier.max(nu_floor))?;
    let mut prev_policy: Option<AffinePolicy> = None;
    let mut tracker = CompletionTracker {
        rule: completion.clone(),
        entered: None,
        done: None,
    };
    let mut metrics = Vec::with_capacity(n_ticks);
    let mut times = vec![0.0];
    let mut states = vec![x_plant.clone()];
    let mut inputs = Vec::new();
    let mut consecutive = 0;
    let mut abort_reason = None;
    let mut dual_updates = 0usize;
    let nu_dim = template.input_dim();
    let plant = IntegratorSettings::rk4(config.plant_step);
    tracker.observe(0.0, &x_plant);

    for k in 0..n_ticks {
        let t = k as f64 * period;
        solver.set_ocp(template.reanchored(x_plant.clone(), grid.clone()));
        let passes_before = solver.counters().riccati_passes;
        let dual_before = dual_updates;
        let start = Instant::now();
        let planned = plan_tick(&mut solver, k, config, prev_policy.as_ref(), &multipliers, nu_dim);
        let solve_ms = start.elapsed().as_secs_f64() * 1e3;
        let mut row = TickMetrics {
            iteration: k,
            sim_time: t,
            solve_ms,
            ..Default::default()
        };
        let policy = match planned {
            Ok((nominal, gains, gamma)) => {
                consecutive = 0;
                let merit = solver.merit(&nominal, &multipliers)?;
                row.cost = merit.cost;
                row.violation_l2 = merit.violation_l2;
                row.max_violation = merit.max_violation;
                row.gamma = gamma;
                if let Some(cfg) = &dual_cfg {
                    multipliers = dual_update(solver.ocp(), &nominal, &multipliers, cfg)?;
                    dual_updates += 1;
                }
                AffinePolicy::feedback(nominal, gains)?
            }
            Err(e) => {
                row.failed = true;
                consecutive += 1;
                warnings.push(format!("tick {k} at t = {t:.3}: {e}"));
                match (&prev_policy, consecutive < config.max_consecutive_failures) {
                    (Some(p), true) => p.clone(),
                    _ => {
                        abort_reason = Some(format!("solver failed at tick {k}: {e}"));
                        row.riccati_passes = solver.counters().riccati_passes - passes_before;
                        metrics.push(row);
                        break;
                    }
                }
            }
        };
        row.max_nu = multipliers.max_inequality();
        row.riccati_passes = solver.counters().riccati_passes - passes_before;
        row.dual_updates = dual_updates - dual_before;

        let mut integrator = Integrator::new(plant)?;
        let steps = (period / config.plant_step - 1e-9).ceil().max(1.0) as usize;
        let h = period / steps as f64;
        let model = template.model.clone();
        for j in 0..steps {
            let ts = t + j as f64 * h;
            let u = policy.input(ts, &x_plant);
            row.applied_max_violation = row
                .applied_max_violation
                .max(applied_violation(template, &x_plant, &u, ts));
            inputs.push(u);
            let mut flow = |x: &DVector<f64>, s: f64| model.flow(x, &policy.input(s, x), s);
            x_plant = match integrator.advance(&mut flow, x_plant.clone(), ts, ts + h) {
                Ok(x) => x,
                Err(e) => {
                    abort_reason = Some(format!("plant integration failed at t = {ts:.3}: {e}"));
                    break;
                }
            };
            times.push(ts + h);
            states.push(x_plant.clone());
            tracker.observe(ts + h, &x_plant);
        }
        metrics.push(row);
        if abort_reason.is_some() {
            break;
        }
        prev_policy = Some(policy.shift_and_extrapolate(period)?);
        multipliers = multipliers.shift_and_extrapolate(period)?;
        grid = grid.shifted(period);
    }
    let last_u = inputs.last().cloned().unwrap_or_else(|| DVector::zeros(nu_dim));
    inputs.push(last_u);
    inputs.truncate(times.len());
    let max_abs_input = inputs.iter().map(|u| u.amax()).fold(0.0, f64::max);
    let time_grid = TimeGrid::new(times)?;
    let summary = summarize(&metrics, &tracker, abort_reason.is_some(), max_abs_input);
    Ok(MpcResult {
        states: Trajectory::new(time_grid.clone(), states)?,
        inputs: Trajectory::new(time_grid, inputs)?,
        metrics,
        summary,
        warnings,
        abort_reason,
    })
}

fn applied_violation(ocp: &OcpDefinition, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> f64 {
    let h = ocp.constraints.inequality_values(x, u, t);
    if h.is_empty() {
        0.0
    } else {
        (-h.min()).max(0.0)
    }
}

/// Tick 0 runs `initial_solve_iters` passes from a zero-input rollout; later
/// ticks roll the shifted previous policy out from the measured state and
/// run exactly one pass. Returns the new plan, its gains and the step taken.
fn plan_tick(
    solver: &mut SlqSolver,
    k: usize,
    config: &MpcConfig,
    prev: Option<&AffinePolicy>,
    multipliers: &Multipliers,
    nu: usize,
) -> Result<(Nominal, Trajectory, f64)> {
    let (mut nominal, iters) = match (k, prev) {
        (0, _) | (_, None) => (solver.initial_nominal(&DVector::zeros(nu))?, config.initial_solve_iters),
        (_, Some(p)) => (forward_rollout(solver.ocp(), p, &config.solver.rollout)?, 1),
    };
    let mut last = None;
    for _ in 0..iters {
        let out = solver.slq_iterate(&nominal, multipliers)?;
        nominal = out.nominal;
        last = Some((out.policy.gains, out.stats.gamma));
    }
    let (gains, gamma) = last.expect("at least one pass");
    Ok((nominal, gains, gamma))
}

type ConstraintFn<'a> = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + 'a;

fn dual_update(ocp: &OcpDefinition, plan: &Nominal, nu: &Multipliers, cfg: &DualUpdateConfig) -> Result<Multipliers> {
    let grid = plan.x.grid();
    let cons = &ocp.constraints;
    let eval = |f: &ConstraintFn<'_>| {
        Trajectory::new(
            grid.clone(),
            grid.nodes()
                .iter()
                .enumerate()
                .map(|(i, &t)| f(plan.x.value(i), plan.u.value(i), t))
                .collect(),
        )
    };
    let inequality = if cons.n_inequalities() > 0 {
        let h = eval(&|x, u, t| cons.inequality_values(x, u, t))?;
        update_multiplier_trajectory(&nu.inequality, &h, cfg)?
    } else {
        nu.inequality.clone()
    };
    let state_equality = if cons.n_state_equalities() > 0 {
        let g = eval(&|x, u, t| cons.state_equality_values(x, u, t))?;
        update_equality_multipliers(&nu.state_equality, &g, cfg.alpha)?
    } else {
        nu.state_equality.clone()
    };
    Ok(Multipliers {
        inequality,
        state_equality,
    })
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn summarize(metrics: &[TickMetrics], tracker: &CompletionTracker, aborted: bool, max_abs_input: f64) -> MpcSummary {
    let ok: Vec<&TickMetrics> = metrics.iter().filter(|m| !m.failed).collect();
    let n = ok.len().max(1) as f64;
    let mut times: Vec<f64> = metrics.iter().map(|m| m.solve_ms).collect();
    times.sort_by(f64::total_cmp);
    let tail = (ok.len() / 10).max(1).min(ok.len());
    let steady = if ok.is_empty() {
        0.0
    } else {
        ok[ok.len() - tail..].iter().map(|m| m.cost).sum::<f64>() / tail as f64
    };
    MpcSummary {
        ticks: metrics.len(),
        completed: tracker.done.is_some() && !aborted,
        completion_time: tracker.done,
        aborted,
        failed_ticks: metrics.len() - ok.len(),
        mean_violation_l2: ok.iter().map(|m| m.violation_l2).sum::<f64>() / n,
        peak_violation_l2: ok.iter().map(|m| m.violation_l2).fold(0.0, f64::max),
        max_applied_violation: metrics.iter().map(|m| m.applied_max_violation).fold(0.0, f64::max),
        mean_solve_ms: times.iter().sum::<f64>() / times.len().max(1) as f64,
        peak_solve_ms: times.last().copied().unwrap_or(0.0),
        p50_solve_ms: percentile(&times, 0.5),
        p95_solve_ms: percentile(&times, 0.95),
        final_cost: ok.last().map(|m| m.cost).unwrap_or(f64::NAN),
        steady_state_cost: steady,
        max_abs_input,
    }
}

/// Outcome of one method in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub name: String,
    pub config: MpcConfig,
    pub result: std::result::Result<MpcResult, Error>,
}

/// Runs every configuration from the same initial state, one worker thread per method.
pub fn compare_methods(
    template: &OcpDefinition,
    completion: &CompletionRule,
    configs: &[(String, MpcConfig)],
) -> Result<Vec<MethodRun>> {
    if configs.len() < 2 {
        return Err(Error::param("methods", "a comparison needs at least two methods"));
    }
    let runs = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(name, cfg)| {
                s.spawn(move || MethodRun {
                    name: name.clone(),
                    config: *cfg,
                    result: run_mpc(template, completion, cfg),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    });
    Ok(runs)
}

/// Indices of `runs` ordered by mean violation-L2; failed runs last.
pub fn order_by_violation(runs: &[MethodRun]) -> Vec<usize> {
    let key = |r: &MethodRun| match &r.result {
        Ok(res) if !res.summary.aborted => res.summary.mean_violation_l2,
        _ => f64::INFINITY,
    };
    let mut idx: Vec<usize> = (0..runs.len()).collect();
    idx.sort_by(|&a, &b| key(&runs[a]).total_cmp(&key(&runs[b])));
    idx
}
