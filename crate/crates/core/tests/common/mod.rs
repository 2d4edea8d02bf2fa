#![allow(dead_code)]

use std::sync::Arc;

use alslq::systems::LinearSystem;
use alslq::{ConstraintSet, OcpDefinition, QuadraticCost, TimeGrid};
use nalgebra::{DMatrix, DVector};

/// Finite-horizon LQR data for `ẋ = Ax + Bu`, cost `½∫xᵀQx + uᵀRu + ½x(tf)ᵀQf x(tf)`.
#[derive(Debug, Clone)]
pub struct Lqr {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub qf: DMatrix<f64>,
}

impl Lqr {
    pub fn scalar(a: f64, b: f64, q: f64, r: f64, qf: f64) -> Self {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Lqr {
            a: m(a),
            b: m(b),
            q: m(q),
            r: m(r),
            qf: m(qf),
        }
    }

    pub fn double_integrator() -> Self {
        Lqr {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            q: DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.1])),
            r: DMatrix::from_element(1, 1, 0.1),
            qf: DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.1])),
        }
    }

    /// `S(t)` from the Hamiltonian flow: `[X; Y](t) = exp(H (t − tf)) [I; Qf]`, `S = Y X⁻¹`.
    pub fn s_exact(&self, t: f64, tf: f64) -> DMatrix<f64> {
        let n = self.a.nrows();
        let rinv = self.r.clone().try_inverse().unwrap();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, n))
            .copy_from(&(-&self.b * &rinv * self.b.transpose()));
        h.view_mut((n, 0), (n, n)).copy_from(&(-&self.q));
        h.view_mut((n, n), (n, n)).copy_from(&(-self.a.transpose()));
        let phi = (h * (t - tf)).exp();
        let mut end = DMatrix::zeros(2 * n, n);
        end.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
        end.view_mut((n, 0), (n, n)).copy_from(&self.qf);
        let xy = phi * end;
        let x = xy.rows(0, n).into_owned();
        let y = xy.rows(n, n).into_owned();
        let s = y * x.try_inverse().unwrap();
        (&s + s.transpose()) * 0.5
    }

    pub fn k_exact(&self, t: f64, tf: f64) -> DMatrix<f64> {
        -self.r.clone().try_inverse().unwrap() * self.b.transpose() * self.s_exact(t, tf)
    }

    pub fn ocp(&self, grid: TimeGrid, x0: DVector<f64>) -> OcpDefinition {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let cost = QuadraticCost::new(
            self.q.clone(),
            self.r.clone(),
            self.qf.clone(),
            DVector::zeros(n),
            DVector::zeros(m),
        )
        .unwrap();
        OcpDefinition::new(
            Arc::new(LinearSystem::new(self.a.clone(), self.b.clone()).unwrap()),
            Arc::new(cost),
            ConstraintSet::new(),
            grid,
            x0,
        )
        .unwrap()
    }
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
