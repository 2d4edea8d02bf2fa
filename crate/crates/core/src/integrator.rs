//! Explicit Runge-Kutta integration: fixed-step RK4 and the Dormand-Prince
//! 5(4) embedded pair with PI step-size control.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{TimeGrid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegratorMode {
    /// Classic RK4; every interval is split into equal sub-steps no longer than `step`.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4). A step is accepted when every component of the
    /// embedded error estimate is below `abs_tol + rel_tol * |x|`.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub mode: IntegratorMode,
    /// Budget of attempted steps for one whole integration.
    pub max_steps: usize,
}

impl IntegratorSettings {
    pub fn rk4(step: f64) -> Self {
        IntegratorSettings {
            mode: IntegratorMode::Rk4 { step },
            max_steps: 100_000,
        }
    }

    pub fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        IntegratorSettings {
            mode: IntegratorMode::Rk45 { abs_tol, rel_tol },
            max_steps: 100_000,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::param("max_steps", "must be at least 1"));
        }
        match self.mode {
            IntegratorMode::Rk4 { step } if !(step > 0.0) => {
                Err(Error::param("step", format!("must be positive, got {step}")))
            }
            IntegratorMode::Rk45 { abs_tol, rel_tol } if !(abs_tol > 0.0 && rel_tol > 0.0) => Err(Error::param(
                "tolerance",
                format!("must be positive, got abs {abs_tol} rel {rel_tol}"),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings::adaptive(1e-8, 1e-6)
    }
}

// Dormand-Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// 5th minus 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Stateful stepper; keeps the step budget and the last accepted adaptive
/// step across successive calls to [`Integrator::advance`].
#[derive(Debug, Clone)]
pub struct Integrator {
    settings: IntegratorSettings,
    steps: usize,
    last_step: Option<f64>,
    evaluations: usize,
}

impl Integrator {
    pub fn new(settings: IntegratorSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Integrator {
            settings,
            steps: 0,
            last_step: None,
            evaluations: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Integrates from `t_from` to `t_to` (either direction) and returns the end state.
    pub fn advance<F>(&mut self, flow: &mut F, x: DVector<f64>, t_from: f64, t_to: f64) -> Result<DVector<f64>>
    where
        F: FnMut(&DVector<f64>, f64) -> DVector<f64>,
    {
        if t_to == t_from {
            return Ok(x);
        }
        match self.settings.mode {
            IntegratorMode::Rk4 { step } => self.advance_rk4(flow, x, t_from, t_to, step),
            IntegratorMode::Rk45 { abs_tol, rel_tol } => self.advance_rk45(flow, x, t_from, t_to, abs_tol, rel_tol),
        }
    }

    fn charge_step(&mut self, t: f64) -> Result<()> {
        self.steps += 1;
        if self.steps > self.settings.max_steps {
            return Err(Error::StepLimitExceeded {
                t,
                max_steps: self.settings.max_steps,
            });
        }
        Ok(())
    }

    fn advance_rk4<F>(
        &mut self,
        flow: &mut F,
        mut x: DVector<f64>,
        t_from: f64,
        t_to: f64,
        step: f64,
    ) -> Result<DVector<f64>>
    where
        F: FnMut(&DVector<f64>, f64) -> DVector<f64>,
    {
        let span = t_to - t_from;
        let n = ((span.abs() / step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for k in 0..n {
            let t = t_from + h * k as f64;
            self.charge_step(t)?;
            let k1 = flow(&x, t);
            let k2 = flow(&(&x + &k1 * (0.5 * h)), t + 0.5 * h);
            let k3 = flow(&(&x + &k2 * (0.5 * h)), t + 0.5 * h);
            let k4 = flow(&(&x + &k3 * h), t + h);
            self.evaluations += 4;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "integrator state",
                    t: t + h,
                });
            }
        }
        Ok(x)
    }

    fn advance_rk45<F>(
        &mut self,
        flow: &mut F,
        mut x: DVector<f64>,
        t_from: f64,
        t_to: f64,
        abs_tol: f64,
        rel_tol: f64,
    ) -> Result<DVector<f64>>
    where
        F: FnMut(&DVector<f64>, f64) -> DVector<f64>,
    {
        let span = t_to - t_from;
        let dir = span.signum();
        let mut h = self.last_step.unwrap_or(span.abs()).min(span.abs()) * dir;
        let mut t = t_from;
        let mut k1 = flow(&x, t);
        self.evaluations += 1;
        let mut prev_err: f64 = 1e-4;
        let mut rejected_last = false;

        loop {
            let remaining = t_to - t;
            let last = h.abs() >= remaining.abs() * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h.abs() <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            self.charge_step(t)?;

            let k2 = flow(&(&x + &k1 * (h * A2[0])), t + C[1] * h);
            let k3 = flow(&(&x + (&k1 * A3[0] + &k2 * A3[1]) * h), t + C[2] * h);
            let k4 = flow(&(&x + (&k1 * A4[0] + &k2 * A4[1] + &k3 * A4[2]) * h), t + C[3] * h);
            let k5 = flow(
                &(&x + (&k1 * A5[0] + &k2 * A5[1] + &k3 * A5[2] + &k4 * A5[3]) * h),
                t + C[4] * h,
            );
            let k6 = flow(
                &(&x + (&k1 * A6[0] + &k2 * A6[1] + &k3 * A6[2] + &k4 * A6[3] + &k5 * A6[4]) * h),
                t + C[5] * h,
            );
            let x_new = &x + (&k1 * B5[0] + &k3 * B5[2] + &k4 * B5[3] + &k5 * B5[4] + &k6 * B5[5]) * h;
            let k7 = flow(&x_new, t + h);
            self.evaluations += 6;

            let err_vec = (&k1 * E[0] + &k3 * E[2] + &k4 * E[3] + &k5 * E[4] + &k6 * E[5] + &k7 * E[6]) * h;
            let mut err: f64 = 0.0;
            for i in 0..x.len() {
                let scale = abs_tol + rel_tol * x[i].abs().max(x_new[i].abs());
                err = err.max(err_vec[i].abs() / scale);
            }
            if !err.is_finite() || x_new.iter().any(|v| !v.is_finite()) {
                // treat as a failed step and shrink hard
                if rejected_last && h.abs() < 1e-10 {
                    return Err(Error::NonFinite {
                        context: "integrator state",
                        t,
                    });
                }
                h *= MIN_FACTOR;
                rejected_last = true;
                continue;
            }

            if err <= 1.0 {
                t = if last { t_to } else { t + h };
                x = x_new;
                k1 = k7;
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    SAFETY * err.powf(-0.7 / 5.0) * prev_err.powf(0.4 / 5.0)
                };
                factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
                if rejected_last {
                    factor = factor.min(1.0);
                }
                prev_err = err.max(1e-4);
                rejected_last = false;
                let next = h * factor;
                if last {
                    // remember the natural step, not the truncated one
                    self.last_step = Some(next.abs().max(h.abs()));
                    return Ok(x);
                }
                h = next;
            } else {
                let factor = (SAFETY * err.powf(-1.0 / 5.0)).max(MIN_FACTOR);
                h *= factor;
                rejected_last = true;
            }
        }
    }
}

/// Integrates `ẋ = flow(x, t)` from `grid.t0()` and samples the state at every node.
pub fn integrate_ode<F>(
    mut flow: F,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    settings: &IntegratorSettings,
) -> Result<Trajectory>
where
    F: FnMut(&DVector<f64>, f64) -> DVector<f64>,
{
    let mut integrator = Integrator::new(*settings)?;
    let probe = flow(x0, grid.t0());
    if probe.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            what: "flow output vs initial state",
            expected: x0.len(),
            got: probe.len(),
        });
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    values.push(x.clone());
    for w in grid.nodes().windows(2) {
        x = integrator.advance(&mut flow, x, w[0], w[1])?;
        values.push(x.clone());
    }
    Trajectory::new(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn zero_flow_is_constant() {
        let grid = TimeGrid::uniform(0.0, 2.0, 7).unwrap();
        for s in [IntegratorSettings::rk4(0.1), IntegratorSettings::adaptive(1e-8, 1e-8)] {
            let tr = integrate_ode(|x, _| DVector::zeros(x.len()), &v(&[1.0]), &grid, &s).unwrap();
            assert!(tr.values().iter().all(|x| x[0] == 1.0));
        }
    }

    #[test]
    fn exponential_growth_adaptive() {
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let s = IntegratorSettings::adaptive(1e-8, 1e-8);
        let tr = integrate_ode(|x, _| x.clone(), &v(&[1.0]), &grid, &s).unwrap();
        assert!((tr.last()[0] - std::f64::consts::E).abs() < 1e-6);
        for (&t, x) in grid.nodes().iter().zip(tr.values()) {
            assert!((x[0] - t.exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn harmonic_oscillator_norm() {
        let grid = TimeGrid::uniform(0.0, 2.0 * std::f64::consts::PI, 20).unwrap();
        let s = IntegratorSettings::adaptive(1e-10, 1e-10);
        let tr = integrate_ode(|x, _| v(&[x[1], -x[0]]), &v(&[1.0, 0.0]), &grid, &s).unwrap();
        for x in tr.values() {
            assert!((x.norm() - 1.0).abs() < 1e-6);
        }
        let end = tr.last();
        assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-6);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let err = |h: f64| {
            let tr = integrate_ode(|x, _| x.clone(), &v(&[1.0]), &grid, &IntegratorSettings::rk4(h)).unwrap();
            (tr.last()[0] - std::f64::consts::E).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn backward_direction() {
        let mut it = Integrator::new(IntegratorSettings::adaptive(1e-10, 1e-10)).unwrap();
        let x = it
            .advance(&mut |x: &DVector<f64>, _| x.clone(), v(&[1.0]), 1.0, 0.0)
            .unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn step_budget_exhaustion() {
        let grid = TimeGrid::uniform(0.0, 10.0, 1).unwrap();
        let s = IntegratorSettings::adaptive(1e-12, 1e-12).with_max_steps(5);
        let r = integrate_ode(|x, _| v(&[x[1], -100.0 * x[0]]), &v(&[1.0, 0.0]), &grid, &s);
        assert!(matches!(r, Err(Error::StepLimitExceeded { .. })));
    }

    #[test]
    fn finite_escape_is_reported() {
        let grid = TimeGrid::uniform(0.0, 2.0, 10).unwrap();
        // x' = x^2 blows up at t = 1
        let r = integrate_ode(
            |x, _| v(&[x[0] * x[0]]),
            &v(&[1.0]),
            &grid,
            &IntegratorSettings::rk4(0.01),
        );
        assert!(r.is_err());
        let r = integrate_ode(
            |x, _| v(&[x[0] * x[0]]),
            &v(&[1.0]),
            &grid,
            &IntegratorSettings::adaptive(1e-8, 1e-8).with_max_steps(10_000),
        );
        assert!(r.is_err());
    }

    #[test]
    fn settings_validation() {
        assert!(IntegratorSettings::rk4(0.0).validate().is_err());
        assert!(IntegratorSettings::adaptive(0.0, 1e-6).validate().is_err());
        assert!(IntegratorSettings::rk4(0.1).with_max_steps(0).validate().is_err());
    }
}
