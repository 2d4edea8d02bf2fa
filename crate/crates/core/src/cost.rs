use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Second-order model of the running cost at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CostQuadratic {
    pub value: f64,
    pub dx: DVector<f64>,
    pub du: DVector<f64>,
    pub dxx: DMatrix<f64>,
    pub duu: DMatrix<f64>,
    /// `∂²L/∂u∂x`, `n_u × n_x`
    pub dux: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalQuadratic {
    pub value: f64,
    pub dx: DVector<f64>,
    pub dxx: DMatrix<f64>,
}

/// Running cost `L(x, u, t)` and terminal cost `Φ(x)`.
pub trait CostFunction: Send + Sync + Debug {
    fn running(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> f64;
    fn running_quadratic(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> CostQuadratic;
    fn terminal(&self, x: &DVector<f64>, t: f64) -> f64;
    fn terminal_quadratic(&self, x: &DVector<f64>, t: f64) -> TerminalQuadratic;
}

/// `½(x-x_ref)ᵀQ(x-x_ref) + ½(u-u_ref)ᵀR(u-u_ref)` with terminal `½(x-x_ref)ᵀQ_f(x-x_ref)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub qf: DMatrix<f64>,
    pub x_ref: DVector<f64>,
    pub u_ref: DVector<f64>,
}

impl QuadraticCost {
    pub fn new(
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        qf: DMatrix<f64>,
        x_ref: DVector<f64>,
        u_ref: DVector<f64>,
    ) -> Result<Self> {
        let nx = x_ref.len();
        let nu = u_ref.len();
        let checks = [
            ("Q rows", q.nrows(), nx),
            ("Q cols", q.ncols(), nx),
            ("Qf rows", qf.nrows(), nx),
            ("Qf cols", qf.ncols(), nx),
            ("R rows", r.nrows(), nu),
            ("R cols", r.ncols(), nu),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        for (name, m) in [("Q", &q), ("R", &r), ("Qf", &qf)] {
            if (m - m.transpose()).amax() > 1e-12 {
                return Err(Error::param(name, "must be symmetric"));
            }
        }
        Ok(QuadraticCost { q, r, qf, x_ref, u_ref })
    }

    /// Diagonal weights.
    pub fn diagonal(q: &[f64], r: &[f64], qf: &[f64], x_ref: DVector<f64>, u_ref: DVector<f64>) -> Result<Self> {
        let diag = |d: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(d));
        QuadraticCost::new(diag(q), diag(r), diag(qf), x_ref, u_ref)
    }
}

impl CostFunction for QuadraticCost {
    fn running(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> f64 {
        let dx = x - &self.x_ref;
        let du = u - &self.u_ref;
        0.5 * (dx.dot(&(&self.q * &dx)) + du.dot(&(&self.r * &du)))
    }

    fn running_quadratic(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> CostQuadratic {
        let ex = x - &self.x_ref;
        let eu = u - &self.u_ref;
        CostQuadratic {
            value: self.running(x, u, t),
            dx: &self.q * ex,
            du: &self.r * eu,
            dxx: self.q.clone(),
            duu: self.r.clone(),
            dux: DMatrix::zeros(u.len(), x.len()),
        }
    }

    fn terminal(&self, x: &DVector<f64>, _t: f64) -> f64 {
        let dx = x - &self.x_ref;
        0.5 * dx.dot(&(&self.qf * &dx))
    }

    fn terminal_quadratic(&self, x: &DVector<f64>, t: f64) -> TerminalQuadratic {
        let ex = x - &self.x_ref;
        TerminalQuadratic {
            value: self.terminal(x, t),
            dx: &self.qf * ex,
            dxx: self.qf.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_cost_derivatives() {
        let c = QuadraticCost::diagonal(
            &[2.0, 1.0],
            &[0.5],
            &[3.0, 0.0],
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::zeros(1),
        )
        .unwrap();
        let x = DVector::from_column_slice(&[2.0, 1.0]);
        let u = DVector::from_column_slice(&[2.0]);
        assert_eq!(c.running(&x, &u, 0.0), 0.5 * (2.0 + 1.0 + 0.5 * 4.0));
        let q = c.running_quadratic(&x, &u, 0.0);
        assert_eq!(q.dx, DVector::from_column_slice(&[2.0, 1.0]));
        assert_eq!(q.du, DVector::from_column_slice(&[1.0]));
        assert_eq!(c.terminal(&x, 0.0), 1.5);
    }

    #[test]
    fn asymmetric_weights_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let r = QuadraticCost::new(
            q,
            DMatrix::identity(1, 1),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::zeros(1),
        );
        assert!(r.is_err());
    }
}
