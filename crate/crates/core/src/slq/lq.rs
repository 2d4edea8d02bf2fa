//! Linear-quadratic approximation of the augmented Lagrangian around a nominal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::penalty::{equality_al_penalty, quadratize_constraint_term, PenaltyStrategy};
use crate::projection::LinearizedEquality;
use crate::slq::ocp::{Multipliers, Nominal, OcpDefinition};
use crate::trajectory::TimeGrid;

/// Per-node LQ data. Dynamics `δẋ = A δx + B δu + c`, cost
/// `q0 + qᵀδx + rᵀδu + ½δxᵀQδx + ½δuᵀRδu + δuᵀPδx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqNode {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub drift: DVector<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `n_u × n_x`
    pub p: DMatrix<f64>,
    pub q_vec: DVector<f64>,
    pub r_vec: DVector<f64>,
    pub q0: f64,
}

impl LqNode {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Linear interpolation between two nodes, used inside the Riccati integration.
    pub(crate) fn lerp(&self, other: &LqNode, w: f64) -> LqNode {
        let mix_m = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * (1.0 - w) + b * w;
        let mix_v = |a: &DVector<f64>, b: &DVector<f64>| a * (1.0 - w) + b * w;
        LqNode {
            a: mix_m(&self.a, &other.a),
            b: mix_m(&self.b, &other.b),
            drift: mix_v(&self.drift, &other.drift),
            q: mix_m(&self.q, &other.q),
            r: mix_m(&self.r, &other.r),
            p: mix_m(&self.p, &other.p),
            q_vec: mix_v(&self.q_vec, &other.q_vec),
            r_vec: mix_v(&self.r_vec, &other.r_vec),
            q0: self.q0 * (1.0 - w) + other.q0 * w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqTerminal {
    pub q: DMatrix<f64>,
    pub q_vec: DVector<f64>,
    pub q0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqApproximation {
    pub grid: TimeGrid,
    pub nodes: Vec<LqNode>,
    pub terminal: LqTerminal,
    /// Linearized state-input equalities per node; empty when the problem has none.
    pub equalities: Vec<LinearizedEquality>,
}

/// Records how much the input Hessians had to be shifted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegularizationReport {
    pub max_shift: f64,
    pub shifted_nodes: usize,
    /// Largest eigenvalue ratio of `R` over the horizon, before shifting.
    pub max_condition: f64,
}

/// Options for [`quadratize`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadratizeOptions {
    /// Add `P'·∇²h` for constraints that supply second derivatives.
    pub exact_constraint_hessians: bool,
}

/// Quadratizes cost, penalty and state-equality terms and linearizes the
/// dynamics and the state-input equalities at every node of the nominal.
pub fn quadratize(
    ocp: &OcpDefinition,
    nominal: &Nominal,
    multipliers: &Multipliers,
    strategy: &PenaltyStrategy,
    options: QuadratizeOptions,
) -> Result<LqApproximation> {
    let grid = nominal.x.grid().clone();
    if multipliers.inequality.len() != grid.len() || multipliers.state_equality.len() != grid.len() {
        return Err(Error::GridMismatch(
            "multipliers and nominal have different node counts".into(),
        ));
    }
    let cons = &ocp.constraints;
    let with_equalities = cons.n_state_input_equalities() > 0;
    let mut nodes = Vec::with_capacity(grid.len());
    let mut equalities = Vec::new();
    for (i, &t) in grid.nodes().iter().enumerate() {
        let x = nominal.x.value(i);
        let u = nominal.u.value(i);
        let (a, b) = ocp.model.jacobians(x, u, t);
        let c = ocp.cost.running_quadratic(x, u, t);
        let mut node = LqNode {
            drift: DVector::zeros(a.nrows()),
            a,
            b,
            q: c.dxx,
            r: c.duu,
            p: c.dux,
            q_vec: c.dx,
            r_vec: c.du,
            q0: c.value,
        };
        if cons.n_inequalities() > 0 {
            let h = cons.inequality_values(x, u, t);
            let eval = strategy.evaluate(&h, multipliers.inequality.value(i))?;
            let jac = cons.inequality_jacobian(x, u, t);
            let hess = options
                .exact_constraint_hessians
                .then(|| cons.inequality_hessians(x, u, t));
            add_term(&mut node, quadratize_constraint_term(&jac, &eval, hess.as_deref()));
        }
        if cons.n_state_equalities() > 0 {
            let g = cons.state_equality_values(x, u, t);
            let eval = equality_al_penalty(&g, multipliers.state_equality.value(i), strategy.rho);
            let jac = cons.state_equality_jacobian(x, u, t);
            add_term(&mut node, quadratize_constraint_term(&jac, &eval, None));
        }
        check_finite(&node, t)?;
        nodes.push(node);
        if with_equalities {
            let jac = cons.state_input_equality_jacobian(x, u, t);
            equalities.push(LinearizedEquality {
                c: jac.dx,
                d: jac.du,
                e: cons.state_input_equality_values(x, u, t),
            });
        }
    }
    let tf = grid.tf();
    let term = ocp.cost.terminal_quadratic(nominal.x.last(), tf);
    let terminal = LqTerminal {
        q: term.dxx,
        q_vec: term.dx,
        q0: term.value,
    };
    if terminal.q.iter().chain(terminal.q_vec.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "terminal quadratization",
            t: tf,
        });
    }
    Ok(LqApproximation {
        grid,
        nodes,
        terminal,
        equalities,
    })
}

fn add_term(node: &mut LqNode, term: crate::cost::CostQuadratic) {
    node.q0 += term.value;
    node.q_vec += term.dx;
    node.r_vec += term.du;
    node.q += term.dxx;
    node.r += term.duu;
    node.p += term.dux;
}

fn check_finite(node: &LqNode, t: f64) -> Result<()> {
    let finite = node
        .a
        .iter()
        .chain(node.b.iter())
        .chain(node.q.iter())
        .chain(node.r.iter())
        .chain(node.p.iter())
        .chain(node.q_vec.iter())
        .chain(node.r_vec.iter())
        .all(|v| v.is_finite())
        && node.q0.is_finite();
    if finite {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: "quadratization",
            t,
        })
    }
}

/// Shifts every `R` by `λ·I` so that its smallest eigenvalue is at least `eps_min`.
pub fn regularize(lq: &mut LqApproximation, eps_min: f64) -> RegularizationReport {
    let mut report = RegularizationReport::default();
    for node in &mut lq.nodes {
        let (shift, cond) = regularize_matrix(&mut node.r, eps_min);
        report.max_condition = report.max_condition.max(cond);
        if shift > 0.0 {
            report.shifted_nodes += 1;
            report.max_shift = report.max_shift.max(shift);
        }
    }
    report
}

/// Returns `(shift, condition number before the shift)`.
pub(crate) fn regularize_matrix(r: &mut DMatrix<f64>, eps_min: f64) -> (f64, f64) {
    let n = r.nrows();
    if n == 0 {
        return (0.0, 1.0);
    }
    let sym = (&*r + r.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    *r = sym;
    if lo >= eps_min {
        return (0.0, cond);
    }
    let shift = eps_min - lo;
    for i in 0..n {
        r[(i, i)] += shift;
    }
    (shift, cond)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularize_leaves_well_conditioned_r() {
        let mut r = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let before = r.clone();
        let (shift, cond) = regularize_matrix(&mut r, 1e-6);
        assert_eq!(shift, 0.0);
        assert_eq!(r, before);
        assert!(cond > 1.0);
    }

    #[test]
    fn regularize_zero_matrix() {
        let mut r = DMatrix::zeros(3, 3);
        let (shift, _) = regularize_matrix(&mut r, 1e-6);
        assert_eq!(shift, 1e-6);
        assert_eq!(r, DMatrix::identity(3, 3) * 1e-6);
    }

    #[test]
    fn regularize_negative_eigenvalue() {
        // eigenvalues -1 and 3
        let mut r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (shift, cond) = regularize_matrix(&mut r, 1e-3);
        assert!((shift - (1.0 + 1e-3)).abs() < 1e-12);
        assert!(cond.is_infinite());
        let eig = r.symmetric_eigen().eigenvalues;
        assert!((eig.min() - 1e-3).abs() < 1e-12);
    }
}
