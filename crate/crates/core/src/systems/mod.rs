//! Benchmark dynamical systems and their constraint sets.

mod cartpole;
pub mod constraints;
mod fd;
mod linear;
mod planar_mover;

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

pub use cartpole::{cartpole_model, CartPole, CartPoleParams};
pub use constraints::{
    box_input_constraints, obstacle_constraints, BoxInputConstraint, Constraint, ConstraintHessian, ConstraintJacobian,
    ConstraintSet, LinearConstraint, Obstacle, ObstacleConstraint,
};
pub use fd::{finite_difference_check, FdReport, SampleBox};
pub use linear::LinearSystem;
pub use planar_mover::{planar_mover_model, PlanarMover, PlanarMoverParams};

/// Flow map `ẋ = f(x, u, t)` with analytic Jacobians.
pub trait SystemModel: Send + Sync + Debug {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn flow(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64>;
    /// `(∂f/∂x, ∂f/∂u)`.
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>);
}
