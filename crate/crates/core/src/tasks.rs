//! Ready-made benchmark problems.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::QuadraticCost;
use crate::error::Result;
use crate::mpc::CompletionRule;
use crate::slq::OcpDefinition;
use crate::systems::{
    box_input_constraints, cartpole_model, obstacle_constraints, planar_mover_model, CartPoleParams, ConstraintSet,
    LinearConstraint, LinearSystem, PlanarMoverParams,
};
use crate::trajectory::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    CartpoleSwingup,
    PlanarMaze,
    LqSanity,
    EqualityToy,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::CartpoleSwingup => "cartpole_swingup",
            TaskKind::PlanarMaze => "planar_maze",
            TaskKind::LqSanity => "lq_sanity",
            TaskKind::EqualityToy => "equality_toy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Task {
    pub kind: TaskKind,
    pub ocp: OcpDefinition,
    pub completion: CompletionRule,
}

/// Placeholder horizon; MPC and the solvers replace it.
fn default_horizon() -> Result<TimeGrid> {
    TimeGrid::with_max_spacing(0.0, 3.0, 0.01)
}

/// Swing-up from the hanging rest position with `|u| ≤ u_max`.
pub fn cartpole_swingup(params: CartPoleParams, u_max: f64) -> Result<Task> {
    let model = cartpole_model(params)?;
    let x_ref = DVector::from_column_slice(&[0.0, PI, 0.0, 0.0]);
    let cost = QuadraticCost::diagonal(
        &[1.0, 5.0, 0.1, 0.1],
        &[1.0],
        &[10.0, 50.0, 1.0, 1.0],
        x_ref,
        DVector::zeros(1),
    )?;
    let constraints = ConstraintSet::new().with_inequality(box_input_constraints(DVector::from_element(1, u_max))?);
    Ok(Task {
        kind: TaskKind::CartpoleSwingup,
        ocp: OcpDefinition::new(
            Arc::new(model),
            Arc::new(cost),
            constraints,
            default_horizon()?,
            DVector::zeros(4),
        )?,
        completion: CompletionRule::Upright {
            index: 1,
            target: PI,
            tolerance: 0.05,
            hold: 0.5,
        },
    })
}

/// Point mass driven from the origin through the pillar field to `params.goal`.
pub fn planar_maze(params: &PlanarMoverParams) -> Result<Task> {
    let model = planar_mover_model(params)?;
    let x_ref = DVector::from_column_slice(&[params.goal[0], params.goal[1], 0.0, 0.0]);
    let cost = QuadraticCost::diagonal(
        &[1.0, 1.0, 0.1, 0.1],
        &[0.05, 0.05],
        &[20.0, 20.0, 5.0, 5.0],
        x_ref,
        DVector::zeros(2),
    )?;
    let constraints = ConstraintSet::new().with_inequality(obstacle_constraints(params.obstacles.clone(), [0, 1])?);
    Ok(Task {
        kind: TaskKind::PlanarMaze,
        ocp: OcpDefinition::new(
            Arc::new(model),
            Arc::new(cost),
            constraints,
            default_horizon()?,
            DVector::zeros(4),
        )?,
        completion: CompletionRule::ReachGoal {
            position: [0, 1],
            goal: params.goal,
            radius: 0.1,
        },
    })
}

/// Unconstrained double integrator regulated to the origin.
pub fn lq_sanity() -> Result<Task> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let cost = QuadraticCost::diagonal(&[1.0, 0.1], &[0.1], &[1.0, 0.1], DVector::zeros(2), DVector::zeros(1))?;
    Ok(Task {
        kind: TaskKind::LqSanity,
        ocp: OcpDefinition::new(
            Arc::new(LinearSystem::new(a, b)?),
            Arc::new(cost),
            ConstraintSet::new(),
            default_horizon()?,
            DVector::from_column_slice(&[1.0, 0.0]),
        )?,
        completion: CompletionRule::ReachGoal {
            position: [0, 1],
            goal: [0.0, 0.0],
            radius: 0.05,
        },
    })
}

/// Double integrator with two opposing actuators tied by `u₁ + u₂ = 0`.
pub fn equality_toy() -> Result<Task> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -1.0]);
    let cost = QuadraticCost::diagonal(
        &[1.0, 0.1],
        &[0.1, 0.1],
        &[1.0, 0.1],
        DVector::zeros(2),
        DVector::zeros(2),
    )?;
    let sum = LinearConstraint::new(
        DMatrix::zeros(1, 2),
        DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        DVector::zeros(1),
    )?;
    Ok(Task {
        kind: TaskKind::EqualityToy,
        ocp: OcpDefinition::new(
            Arc::new(LinearSystem::new(a, b)?),
            Arc::new(cost),
            ConstraintSet::new().with_state_input_equality(sum),
            default_horizon()?,
            DVector::from_column_slice(&[1.0, 0.0]),
        )?,
        completion: CompletionRule::ReachGoal {
            position: [0, 1],
            goal: [0.0, 0.0],
            radius: 0.05,
        },
    })
}
