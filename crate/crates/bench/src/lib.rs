//! Fixtures shared by the benchmarks.

use alslq::systems::CartPoleParams;
use alslq::{tasks, Multipliers, Nominal, PenaltyStrategy, SlqSettings, SlqSolver};
use nalgebra::DVector;

/// Cart-pole swing-up solver with the hanging open-loop nominal.
pub fn cartpole(strategy: PenaltyStrategy) -> (SlqSolver, Nominal, Multipliers) {
    let task = tasks::cartpole_swingup(CartPoleParams::default(), 5.0).expect("cart-pole task");
    let solver = SlqSolver::new(task.ocp, strategy, SlqSettings::default()).expect("solver");
    let nominal = solver.initial_nominal(&DVector::zeros(1)).expect("nominal");
    let nu = solver.zero_multipliers().expect("multipliers");
    (solver, nominal, nu)
}

/// Cart-pole state after a few iterations, closer to what an MPC tick sees.
pub fn warm_cartpole(strategy: PenaltyStrategy) -> (SlqSolver, Nominal, Multipliers) {
    let (mut solver, nominal, nu) = cartpole(strategy);
    let nominal = solver.solve(nominal, &nu, 5, 0.0).expect("warm start").nominal;
    (solver, nominal, nu)
}
