use std::sync::Arc;

use nalgebra::DVector;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::systems::{ConstraintSet, SystemModel};
use crate::trajectory::{TimeGrid, Trajectory};

/// Optimal control problem over a fixed horizon.
#[derive(Debug, Clone)]
pub struct OcpDefinition {
    pub model: Arc<dyn SystemModel>,
    pub cost: Arc<dyn CostFunction>,
    pub constraints: ConstraintSet,
    pub horizon: TimeGrid,
    pub x0: DVector<f64>,
}

impl OcpDefinition {
    pub fn new(
        model: Arc<dyn SystemModel>,
        cost: Arc<dyn CostFunction>,
        constraints: ConstraintSet,
        horizon: TimeGrid,
        x0: DVector<f64>,
    ) -> Result<Self> {
        if x0.len() != model.state_dim() {
            return Err(Error::DimensionMismatch {
                what: "initial state",
                expected: model.state_dim(),
                got: x0.len(),
            });
        }
        Ok(OcpDefinition {
            model,
            cost,
            constraints,
            horizon,
            x0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    /// Same problem with a new initial state and horizon.
    pub fn reanchored(&self, x0: DVector<f64>, horizon: TimeGrid) -> Self {
        OcpDefinition {
            x0,
            horizon,
            ..self.clone()
        }
    }
}

/// State and input trajectories the next LQ approximation is built around.
#[derive(Debug, Clone, PartialEq)]
pub struct Nominal {
    pub x: Trajectory,
    pub u: Trajectory,
}

impl Nominal {
    pub fn grid(&self) -> &TimeGrid {
        self.x.grid()
    }
}

/// Inequality multipliers `ν` and state-equality multipliers on the horizon grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub inequality: Trajectory,
    pub state_equality: Trajectory,
}

impl Multipliers {
    pub fn constant(ocp: &OcpDefinition, grid: &TimeGrid, nu0: f64) -> Result<Self> {
        let c = &ocp.constraints;
        Ok(Multipliers {
            inequality: Trajectory::constant(grid.clone(), DVector::from_element(c.n_inequalities(), nu0))?,
            state_equality: Trajectory::constant(grid.clone(), DVector::zeros(c.n_state_equalities()))?,
        })
    }

    pub fn max_inequality(&self) -> f64 {
        self.inequality
            .values()
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn shift_and_extrapolate(&self, dt: f64) -> Result<Self> {
        Ok(Multipliers {
            inequality: self.inequality.shift_and_extrapolate(dt)?,
            state_equality: self.state_equality.shift_and_extrapolate(dt)?,
        })
    }
}
