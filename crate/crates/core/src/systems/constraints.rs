//! Constraint definitions. Inequalities follow the `h(x, u, t) ≥ 0` feasible convention.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintJacobian {
    /// `∂c/∂x`, `n_c × n_x`
    pub dx: DMatrix<f64>,
    /// `∂c/∂u`, `n_c × n_u`
    pub du: DMatrix<f64>,
}

impl ConstraintJacobian {
    pub fn zeros(rows: usize, nx: usize, nu: usize) -> Self {
        ConstraintJacobian {
            dx: DMatrix::zeros(rows, nx),
            du: DMatrix::zeros(rows, nu),
        }
    }
}

/// Second derivatives of one scalar constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintHessian {
    pub dxx: DMatrix<f64>,
    pub duu: DMatrix<f64>,
    /// `∂²c/∂u∂x`, `n_u × n_x`
    pub dux: DMatrix<f64>,
}

/// A vector-valued constraint function with analytic first derivatives.
pub trait Constraint: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> ConstraintJacobian;
    /// One Hessian per scalar component, when available.
    fn second_derivatives(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> Option<Vec<ConstraintHessian>> {
        None
    }
}

/// Inequalities, state-input equalities (handled by projection) and
/// state-only equalities (handled by an augmented-Lagrangian term).
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub inequalities: Vec<Arc<dyn Constraint>>,
    pub state_input_equalities: Vec<Arc<dyn Constraint>>,
    pub state_equalities: Vec<Arc<dyn Constraint>>,
}

fn stack_values(list: &[Arc<dyn Constraint>], x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
    let n: usize = list.iter().map(|c| c.dim()).sum();
    let mut out = DVector::zeros(n);
    let mut row = 0;
    for c in list {
        let v = c.value(x, u, t);
        out.rows_mut(row, v.len()).copy_from(&v);
        row += v.len();
    }
    out
}

fn stack_jacobians(list: &[Arc<dyn Constraint>], x: &DVector<f64>, u: &DVector<f64>, t: f64) -> ConstraintJacobian {
    let n: usize = list.iter().map(|c| c.dim()).sum();
    let mut out = ConstraintJacobian::zeros(n, x.len(), u.len());
    let mut row = 0;
    for c in list {
        let j = c.jacobian(x, u, t);
        let k = j.dx.nrows();
        out.dx.rows_mut(row, k).copy_from(&j.dx);
        out.du.rows_mut(row, k).copy_from(&j.du);
        row += k;
    }
    out
}

fn stack_hessians(
    list: &[Arc<dyn Constraint>],
    x: &DVector<f64>,
    u: &DVector<f64>,
    t: f64,
) -> Vec<Option<ConstraintHessian>> {
    let mut out = Vec::new();
    for c in list {
        match c.second_derivatives(x, u, t) {
            Some(h) => out.extend(h.into_iter().map(Some)),
            None => out.extend(std::iter::repeat_n(None, c.dim())),
        }
    }
    out
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_inequality(mut self, c: impl Constraint + 'static) -> Self {
        self.inequalities.push(Arc::new(c));
        self
    }

    pub fn with_state_input_equality(mut self, c: impl Constraint + 'static) -> Self {
        self.state_input_equalities.push(Arc::new(c));
        self
    }

    pub fn with_state_equality(mut self, c: impl Constraint + 'static) -> Self {
        self.state_equalities.push(Arc::new(c));
        self
    }

    pub fn n_inequalities(&self) -> usize {
        self.inequalities.iter().map(|c| c.dim()).sum()
    }

    pub fn n_state_input_equalities(&self) -> usize {
        self.state_input_equalities.iter().map(|c| c.dim()).sum()
    }

    pub fn n_state_equalities(&self) -> usize {
        self.state_equalities.iter().map(|c| c.dim()).sum()
    }

    pub fn inequality_values(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        stack_values(&self.inequalities, x, u, t)
    }

    pub fn inequality_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> ConstraintJacobian {
        stack_jacobians(&self.inequalities, x, u, t)
    }

    pub fn inequality_hessians(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> Vec<Option<ConstraintHessian>> {
        stack_hessians(&self.inequalities, x, u, t)
    }

    pub fn state_input_equality_values(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        stack_values(&self.state_input_equalities, x, u, t)
    }

    pub fn state_input_equality_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> ConstraintJacobian {
        stack_jacobians(&self.state_input_equalities, x, u, t)
    }

    pub fn state_equality_values(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        stack_values(&self.state_equalities, x, u, t)
    }

    pub fn state_equality_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> ConstraintJacobian {
        stack_jacobians(&self.state_equalities, x, u, t)
    }
}

/// `-u_max ≤ u ≤ u_max` as `h = [u_max - u; u + u_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxInputConstraint {
    u_max: DVector<f64>,
}

pub fn box_input_constraints(u_max: DVector<f64>) -> Result<BoxInputConstraint> {
    if u_max.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::param("u_max", "every bound must be positive"));
    }
    Ok(BoxInputConstraint { u_max })
}

impl BoxInputConstraint {
    pub fn u_max(&self) -> &DVector<f64> {
        &self.u_max
    }
}

impl Constraint for BoxInputConstraint {
    fn dim(&self) -> usize {
        2 * self.u_max.len()
    }

    fn value(&self, _x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        let n = self.u_max.len();
        let mut h = DVector::zeros(2 * n);
        for i in 0..n {
            h[i] = self.u_max[i] - u[i];
            h[n + i] = u[i] + self.u_max[i];
        }
        h
    }

    fn jacobian(&self, x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> ConstraintJacobian {
        let n = self.u_max.len();
        let mut j = ConstraintJacobian::zeros(2 * n, x.len(), n);
        for i in 0..n {
            j.du[(i, i)] = -1.0;
            j.du[(n + i, i)] = 1.0;
        }
        j
    }

    fn second_derivatives(&self, x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> Option<Vec<ConstraintHessian>> {
        let n = self.u_max.len();
        let zero = ConstraintHessian {
            dxx: DMatrix::zeros(x.len(), x.len()),
            duu: DMatrix::zeros(n, n),
            dux: DMatrix::zeros(n, x.len()),
        };
        Some(vec![zero; 2 * n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::param("radius", format!("must be positive, got {}", self.radius)));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("center", "must be finite"));
        }
        Ok(())
    }
}

/// One inequality per obstacle, `h_j = ‖p(x) - c_j‖² - r_j²` where `p(x)`
/// picks two state entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleConstraint {
    obstacles: Vec<Obstacle>,
    position: [usize; 2],
}

pub fn obstacle_constraints(obstacles: Vec<Obstacle>, position_selector: [usize; 2]) -> Result<ObstacleConstraint> {
    for o in &obstacles {
        o.validate()?;
    }
    if position_selector[0] == position_selector[1] {
        return Err(Error::param("position_selector", "indices must differ"));
    }
    Ok(ObstacleConstraint {
        obstacles,
        position: position_selector,
    })
}

impl ObstacleConstraint {
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }
}

impl Constraint for ObstacleConstraint {
    fn dim(&self) -> usize {
        self.obstacles.len()
    }

    fn value(&self, x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DVector<f64> {
        let [ix, iy] = self.position;
        DVector::from_iterator(
            self.obstacles.len(),
            self.obstacles.iter().map(|o| {
                let dx = x[ix] - o.center[0];
                let dy = x[iy] - o.center[1];
                dx * dx + dy * dy - o.radius * o.radius
            }),
        )
    }

    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> ConstraintJacobian {
        let [ix, iy] = self.position;
        let mut j = ConstraintJacobian::zeros(self.obstacles.len(), x.len(), u.len());
        for (k, o) in self.obstacles.iter().enumerate() {
            j.dx[(k, ix)] = 2.0 * (x[ix] - o.center[0]);
            j.dx[(k, iy)] = 2.0 * (x[iy] - o.center[1]);
        }
        j
    }

    fn second_derivatives(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> Option<Vec<ConstraintHessian>> {
        let [ix, iy] = self.position;
        let mut dxx = DMatrix::zeros(x.len(), x.len());
        dxx[(ix, ix)] = 2.0;
        dxx[(iy, iy)] = 2.0;
        let h = ConstraintHessian {
            dxx,
            duu: DMatrix::zeros(u.len(), u.len()),
            dux: DMatrix::zeros(u.len(), x.len()),
        };
        Some(vec![h; self.obstacles.len()])
    }
}

/// Affine `C x + D u + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DVector<f64>,
}

impl LinearConstraint {
    pub fn new(c: DMatrix<f64>, d: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        if c.nrows() != d.nrows() || c.nrows() != e.len() {
            return Err(Error::DimensionMismatch {
                what: "linear constraint rows",
                expected: c.nrows(),
                got: d.nrows().max(e.len()),
            });
        }
        Ok(LinearConstraint { c, d, e })
    }
}

impl Constraint for LinearConstraint {
    fn dim(&self) -> usize {
        self.e.len()
    }

    fn value(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        &self.c * x + &self.d * u + &self.e
    }

    fn jacobian(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> ConstraintJacobian {
        ConstraintJacobian {
            dx: self.c.clone(),
            du: self.d.clone(),
        }
    }
}
