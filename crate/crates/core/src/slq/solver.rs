use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::IntegratorSettings;
use crate::penalty::PenaltyStrategy;
use crate::projection::{project_lq_subproblem, InputReconstruction};
use crate::slq::lq::{quadratize, regularize, LqApproximation, QuadratizeOptions};
use crate::slq::ocp::{Multipliers, Nominal, OcpDefinition};
use crate::slq::policy::AffinePolicy;
use crate::slq::riccati::{backward_riccati, RiccatiSolution};
use crate::slq::rollout::{evaluate_merit, line_search, rollout_open_loop, LineSearchSettings, MeritBreakdown};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlqSettings {
    pub riccati: IntegratorSettings,
    pub rollout: IntegratorSettings,
    pub line_search: LineSearchSettings,
    /// Lower bound on the eigenvalues of every input Hessian.
    pub eps_min: f64,
    pub riccati_norm_cap: f64,
    pub exact_constraint_hessians: bool,
}

impl Default for SlqSettings {
    fn default() -> Self {
        SlqSettings {
            riccati: IntegratorSettings::default(),
            rollout: IntegratorSettings::rk4(0.005),
            line_search: LineSearchSettings::default(),
            eps_min: 1e-6,
            riccati_norm_cap: 1e12,
            exact_constraint_hessians: false,
        }
    }
}

impl SlqSettings {
    pub fn validate(&self) -> Result<()> {
        self.riccati.validate()?;
        self.rollout.validate()?;
        let ls = &self.line_search;
        if !(ls.sigma > 0.0 && ls.sigma < 1.0) {
            return Err(Error::param("line_search.sigma", "must lie in (0, 1)"));
        }
        if !(ls.factor > 0.0 && ls.factor < 1.0) {
            return Err(Error::param("line_search.factor", "must lie in (0, 1)"));
        }
        if ls.max_trials == 0 {
            return Err(Error::param("line_search.max_trials", "must be at least 1"));
        }
        if !(self.eps_min > 0.0) {
            return Err(Error::param("eps_min", "must be positive"));
        }
        if !(self.riccati_norm_cap > 0.0) {
            return Err(Error::param("riccati_norm_cap", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Merit and its components after the accepted step.
    #[serde(flatten)]
    pub merit: MeritBreakdown,
    pub merit_before: f64,
    pub gamma: f64,
    pub feedforward_norm: f64,
    pub regularization_shift: f64,
    pub r_condition: f64,
    pub line_search_failed: bool,
    pub wall_ms: f64,
}

/// Running totals, used to check the real-time iteration contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverCounters {
    pub iterations: usize,
    pub riccati_passes: usize,
    pub line_search_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub nominal: Nominal,
    /// Policy about the previous nominal with `gamma` set to the accepted step.
    pub policy: AffinePolicy,
    pub riccati: RiccatiSolution,
    pub stats: IterationStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub nominal: Nominal,
    pub policy: AffinePolicy,
    pub stats: Vec<IterationStats>,
    pub converged: bool,
}

/// Owns the problem and the iteration counters. One control thread at a time.
#[derive(Debug, Clone)]
pub struct SlqSolver {
    ocp: OcpDefinition,
    strategy: PenaltyStrategy,
    settings: SlqSettings,
    counters: SolverCounters,
}

impl SlqSolver {
    pub fn new(ocp: OcpDefinition, strategy: PenaltyStrategy, settings: SlqSettings) -> Result<Self> {
        strategy.validate()?;
        settings.validate()?;
        Ok(SlqSolver {
            ocp,
            strategy,
            settings,
            counters: SolverCounters::default(),
        })
    }

    pub fn ocp(&self) -> &OcpDefinition {
        &self.ocp
    }

    pub fn set_ocp(&mut self, ocp: OcpDefinition) {
        self.ocp = ocp;
    }

    pub fn strategy(&self) -> &PenaltyStrategy {
        &self.strategy
    }

    pub fn settings(&self) -> &SlqSettings {
        &self.settings
    }

    pub fn counters(&self) -> SolverCounters {
        self.counters
    }

    /// Open-loop rollout of a constant input.
    pub fn initial_nominal(&self, u0: &DVector<f64>) -> Result<Nominal> {
        let u = Trajectory::constant(self.ocp.horizon.clone(), u0.clone())?;
        rollout_open_loop(&self.ocp, &u, &self.settings.rollout)
    }

    pub fn zero_multipliers(&self) -> Result<Multipliers> {
        Multipliers::constant(&self.ocp, &self.ocp.horizon, self.strategy.multiplier_floor())
    }

    pub fn merit(&self, nominal: &Nominal, multipliers: &Multipliers) -> Result<MeritBreakdown> {
        evaluate_merit(&self.ocp, nominal, multipliers, &self.strategy)
    }

    /// Quadratize, project, regularize and integrate the Riccati equation;
    /// gains are returned in input coordinates.
    pub fn backward_pass(
        &mut self,
        nominal: &Nominal,
        multipliers: &Multipliers,
    ) -> Result<(RiccatiSolution, LqApproximation, f64, f64)> {
        let options = QuadratizeOptions {
            exact_constraint_hessians: self.settings.exact_constraint_hessians,
        };
        let lq = quadratize(&self.ocp, nominal, multipliers, &self.strategy, options)?;
        let (mut projected, maps) = project_approximation(&lq)?;
        let reg = regularize(&mut projected, self.settings.eps_min);
        self.counters.riccati_passes += 1;
        let mut sol = backward_riccati(&projected, &self.settings.riccati, self.settings.riccati_norm_cap)?;
        if let Some(maps) = maps {
            for ((k, ff), map) in sol.gains.iter_mut().zip(sol.feedforward.iter_mut()).zip(&maps) {
                let (k_u, ff_u) = map.map_policy(k, ff);
                *k = k_u;
                *ff = ff_u;
            }
        }
        Ok((sol, lq, reg.max_shift, reg.max_condition))
    }

    /// One quadratize → project → regularize → Riccati → line-search pass.
    pub fn slq_iterate(&mut self, nominal: &Nominal, multipliers: &Multipliers) -> Result<IterationOutcome> {
        let start = Instant::now();
        if nominal.x.len() != self.ocp.horizon.len() {
            return Err(Error::GridMismatch("nominal is not on the horizon grid".into()));
        }
        let (riccati, _, shift, cond) = self.backward_pass(nominal, multipliers)?;
        let policy = AffinePolicy::new(nominal.clone(), riccati.gains.clone(), riccati.feedforward.clone(), 0.0)?;
        let ls = line_search(
            &self.ocp,
            &policy,
            multipliers,
            &self.strategy,
            &self.settings.rollout,
            &self.settings.line_search,
            riccati.expected_decrease,
        )?;
        self.counters.iterations += 1;
        if ls.failed {
            self.counters.line_search_failures += 1;
        }
        let stats = IterationStats {
            iteration: self.counters.iterations,
            merit: ls.merit,
            merit_before: ls.merit_before.merit,
            gamma: ls.gamma,
            feedforward_norm: policy.feedforward_norm(),
            regularization_shift: shift,
            r_condition: cond,
            line_search_failed: ls.failed,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        Ok(IterationOutcome {
            nominal: ls.nominal,
            policy: policy.with_gamma(ls.gamma),
            riccati,
            stats,
        })
    }

    /// Iterates until `γ·max‖δu_ff‖ < tol` or `max_iters` passes. A pass
    /// whose feedforward is already below `tol` confirms convergence.
    pub fn solve(
        &mut self,
        nominal: Nominal,
        multipliers: &Multipliers,
        max_iters: usize,
        tol: f64,
    ) -> Result<Solution> {
        if max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        let mut nominal = nominal;
        let mut stats = Vec::new();
        let mut policy = None;
        let mut converged = false;
        for _ in 0..max_iters {
            let out = self.slq_iterate(&nominal, multipliers)?;
            let step = out.stats.gamma * out.stats.feedforward_norm;
            let small = out.stats.feedforward_norm < tol;
            stats.push(out.stats);
            nominal = out.nominal;
            policy = Some(out.policy);
            if small || (step < tol && !out.stats.line_search_failed) {
                converged = true;
                break;
            }
        }
        Ok(Solution {
            nominal,
            policy: policy.expect("at least one iteration"),
            stats,
            converged,
        })
    }
}

/// Applies the equality projection to every node. Returns `None` for the
/// maps when the problem has no state-input equalities.
pub fn project_approximation(lq: &LqApproximation) -> Result<(LqApproximation, Option<Vec<InputReconstruction>>)> {
    if lq.equalities.is_empty() {
        return Ok((lq.clone(), None));
    }
    let mut nodes = Vec::with_capacity(lq.nodes.len());
    let mut maps = Vec::with_capacity(lq.nodes.len());
    for (node, eq) in lq.nodes.iter().zip(&lq.equalities) {
        let (p, m) = project_lq_subproblem(node, eq)?;
        nodes.push(p);
        maps.push(m);
    }
    Ok((
        LqApproximation {
            grid: lq.grid.clone(),
            nodes,
            terminal: lq.terminal.clone(),
            equalities: Vec::new(),
        },
        Some(maps),
    ))
}

/// Writes one CSV row per iteration.
pub fn write_iteration_csv<W: Write>(writer: W, stats: &[IterationStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "iteration",
        "merit",
        "cost",
        "penalty",
        "violation_l2",
        "max_violation",
        "gamma",
        "regularization_shift",
        "wall_ms",
    ])?;
    for s in stats {
        w.write_record(&[
            s.iteration.to_string(),
            s.merit.merit.to_string(),
            s.merit.cost.to_string(),
            s.merit.penalty.to_string(),
            s.merit.violation_l2.to_string(),
            s.merit.max_violation.to_string(),
            s.gamma.to_string(),
            s.regularization_shift.to_string(),
            s.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reshapes a flattened gain vector.
pub fn gain_matrix(flat: &DVector<f64>, nu: usize, nx: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(nu, nx, flat.as_slice())
}
