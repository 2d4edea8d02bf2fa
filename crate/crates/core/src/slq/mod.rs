//! The inner loop: quadratize the augmented Lagrangian, solve the
//! differential Riccati equation backward, roll out the affine policy and
//! line-search the feedforward step.

pub mod lq;
mod ocp;
mod policy;
pub mod riccati;
mod rollout;
mod solver;

pub use lq::{quadratize, regularize, LqApproximation, LqNode, LqTerminal, QuadratizeOptions, RegularizationReport};
pub use ocp::{Multipliers, Nominal, OcpDefinition};
pub use policy::AffinePolicy;
pub use riccati::{backward_riccati, RiccatiSolution};
pub use rollout::{
    evaluate_merit, forward_rollout, line_search, rollout_open_loop, LineSearchResult, LineSearchSettings,
    MeritBreakdown,
};
pub use solver::{
    gain_matrix, project_approximation, write_iteration_csv, IterationOutcome, IterationStats, SlqSettings, SlqSolver,
    Solution, SolverCounters,
};
