//! Continuous-time constrained SLQ with augmented-Lagrangian inequality
//! handling, an equality projection and a receding-horizon MPC harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod dual;
pub mod error;
pub mod integrator;
pub mod mpc;
pub mod penalty;
pub mod projection;
pub mod slq;
pub mod systems;
pub mod tasks;
pub mod trajectory;

pub use cost::{CostFunction, CostQuadratic, QuadraticCost, TerminalQuadratic};
pub use dual::{check_stability, update_multiplier_trajectory, DualRule, DualUpdateConfig, Stability};
pub use error::{Error, Result};
pub use integrator::{integrate_ode, IntegratorMode, IntegratorSettings};
pub use mpc::{
    compare_methods, run_mpc, violation_l2, CompletionRule, MethodRun, MpcConfig, MpcResult, MpcSummary, TickMetrics,
};
pub use penalty::{PenaltyEvaluation, PenaltyKind, PenaltyStrategy};
pub use projection::{project_lq_subproblem, projection_terms, InputReconstruction, LinearizedEquality};
pub use slq::{AffinePolicy, Multipliers, Nominal, OcpDefinition, SlqSettings, SlqSolver, Solution};
pub use systems::{ConstraintSet, SystemModel};
pub use tasks::{Task, TaskKind};
pub use trajectory::{TimeGrid, Trajectory};
