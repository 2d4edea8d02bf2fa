use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrator::{integrate_ode, IntegratorSettings};
use crate::mpc::violation_l2;
use crate::penalty::{equality_al_penalty, PenaltyStrategy};
use crate::slq::ocp::{Multipliers, Nominal, OcpDefinition};
use crate::slq::policy::AffinePolicy;
use crate::trajectory::Trajectory;

/// Integrates the dynamics from `ocp.x0` under `policy` and samples states
/// and applied inputs on the horizon grid.
pub fn forward_rollout(ocp: &OcpDefinition, policy: &AffinePolicy, settings: &IntegratorSettings) -> Result<Nominal> {
    let grid = &ocp.horizon;
    let model = &ocp.model;
    let x = integrate_ode(|x, t| model.flow(x, &policy.input(t, x), t), &ocp.x0, grid, settings)?;
    let u = Trajectory::new(
        grid.clone(),
        grid.nodes()
            .iter()
            .zip(x.values())
            .map(|(&t, x)| policy.input(t, x))
            .collect(),
    )?;
    Ok(Nominal { x, u })
}

/// Rollout of the open-loop input trajectory `u`.
pub fn rollout_open_loop(ocp: &OcpDefinition, u: &Trajectory, settings: &IntegratorSettings) -> Result<Nominal> {
    let x_dummy = Trajectory::constant(u.grid().clone(), DVector::zeros(ocp.state_dim()))?;
    forward_rollout(
        ocp,
        &AffinePolicy::open_loop(x_dummy, u.resample(&ocp.horizon))?,
        settings,
    )
}

/// Merit and its components along a trajectory, integrated by the trapezoid rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeritBreakdown {
    /// Cost plus inequality penalty plus state-equality terms.
    pub merit: f64,
    /// Penalty-free cost, including the terminal cost.
    pub cost: f64,
    pub penalty: f64,
    pub violation_l2: f64,
    pub max_violation: f64,
    /// Largest absolute equality residual, state-input and state-only.
    pub equality_residual: f64,
}

pub fn evaluate_merit(
    ocp: &OcpDefinition,
    traj: &Nominal,
    multipliers: &Multipliers,
    strategy: &PenaltyStrategy,
) -> Result<MeritBreakdown> {
    let grid = traj.x.grid();
    let cons = &ocp.constraints;
    let mut cost_rate = Vec::with_capacity(grid.len());
    let mut penalty_rate = Vec::with_capacity(grid.len());
    let mut h_values = Vec::with_capacity(grid.len());
    let mut out = MeritBreakdown::default();
    for (i, &t) in grid.nodes().iter().enumerate() {
        let (x, u) = (traj.x.value(i), traj.u.value(i));
        cost_rate.push(ocp.cost.running(x, u, t));
        let mut p = 0.0;
        let h = cons.inequality_values(x, u, t);
        if !h.is_empty() {
            p += strategy.evaluate(&h, multipliers.inequality.value(i))?.value;
            out.max_violation = out.max_violation.max(-h.min());
        }
        if cons.n_state_equalities() > 0 {
            let g = cons.state_equality_values(x, u, t);
            p += equality_al_penalty(&g, multipliers.state_equality.value(i), strategy.rho).value;
            out.equality_residual = out.equality_residual.max(g.amax());
        }
        if cons.n_state_input_equalities() > 0 {
            out.equality_residual = out
                .equality_residual
                .max(cons.state_input_equality_values(x, u, t).amax());
        }
        penalty_rate.push(p);
        h_values.push(h);
    }
    let trapz = |f: &[f64]| -> f64 {
        grid.nodes()
            .windows(2)
            .zip(f.windows(2))
            .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
            .sum()
    };
    out.cost = trapz(&cost_rate) + ocp.cost.terminal(traj.x.last(), grid.tf());
    out.penalty = trapz(&penalty_rate);
    out.merit = out.cost + out.penalty;
    out.violation_l2 = violation_l2(&Trajectory::new(grid.clone(), h_values)?);
    Ok(out)
}

/// Armijo backtracking constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchSettings {
    pub sigma: f64,
    pub factor: f64,
    pub max_trials: usize,
}

impl Default for LineSearchSettings {
    fn default() -> Self {
        LineSearchSettings {
            sigma: 1e-4,
            factor: 0.5,
            max_trials: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub gamma: f64,
    pub nominal: Nominal,
    pub merit: MeritBreakdown,
    /// Merit of the `γ = 0` rollout the trials are compared against.
    pub merit_before: MeritBreakdown,
    /// No trial step satisfied the Armijo condition; `gamma` is 0 and the
    /// nominal is the `γ = 0` rollout.
    pub failed: bool,
    pub trials: usize,
}

/// Tries `γ = 1, c, c², …` and accepts the first step with
/// `merit(γ) ≤ merit(0) − σ·γ·expected_decrease`, where `merit(0)` comes from
/// rolling out the policy with `γ = 0`. If that rollout fails the stored
/// nominal stands in for it. Rollouts that fail to integrate count as
/// rejected trials.
#[allow(clippy::too_many_arguments)]
pub fn line_search(
    ocp: &OcpDefinition,
    policy: &AffinePolicy,
    multipliers: &Multipliers,
    strategy: &PenaltyStrategy,
    rollout: &IntegratorSettings,
    settings: &LineSearchSettings,
    expected_decrease: f64,
) -> Result<LineSearchResult> {
    let trial = |gamma: f64| {
        forward_rollout(ocp, &policy.with_gamma(gamma), rollout)
            .and_then(|nominal| evaluate_merit(ocp, &nominal, multipliers, strategy).map(|m| (nominal, m)))
    };
    let (base, merit0) = match trial(0.0) {
        Ok(b) => b,
        Err(_) => (
            policy.nominal.clone(),
            evaluate_merit(ocp, &policy.nominal, multipliers, strategy)?,
        ),
    };
    let unchanged = |base: Nominal, trials, failed| LineSearchResult {
        gamma: 0.0,
        nominal: base,
        merit: merit0,
        merit_before: merit0,
        failed,
        trials,
    };
    if expected_decrease <= 1e-14 * (1.0 + merit0.merit.abs()) {
        return Ok(unchanged(base, 0, false));
    }
    let mut gamma = 1.0;
    for trial_no in 1..=settings.max_trials {
        if let Ok((nominal, merit)) = trial(gamma) {
            if merit.merit <= merit0.merit - settings.sigma * gamma * expected_decrease {
                return Ok(LineSearchResult {
                    gamma,
                    nominal,
                    merit,
                    merit_before: merit0,
                    failed: false,
                    trials: trial_no,
                });
            }
        }
        gamma *= settings.factor;
    }
    Ok(unchanged(base, settings.max_trials, true))
}
