use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::slq::ocp::Nominal;
use crate::trajectory::Trajectory;

/// `u(t, x) = ū(t) + γ·δu_ff(t) + K(t)(x − x̄(t))`. Gains are stored
/// column-major as an `n_u·n_x` trajectory so they interpolate and shift
/// like every other signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolicy {
    pub nominal: Nominal,
    pub gains: Trajectory,
    pub feedforward: Trajectory,
    pub gamma: f64,
}

impl AffinePolicy {
    pub fn new(nominal: Nominal, gains: Vec<DMatrix<f64>>, feedforward: Vec<DVector<f64>>, gamma: f64) -> Result<Self> {
        let grid = nominal.x.grid().clone();
        let (nu, nx) = (nominal.u.dim(), nominal.x.dim());
        if let Some(k) = gains.iter().find(|k| k.shape() != (nu, nx)) {
            return Err(Error::DimensionMismatch {
                what: "feedback gain rows",
                expected: nu,
                got: k.nrows(),
            });
        }
        let flat = gains.iter().map(|k| DVector::from_column_slice(k.as_slice())).collect();
        Ok(AffinePolicy {
            gains: Trajectory::new(grid.clone(), flat)?,
            feedforward: Trajectory::new(grid, feedforward)?,
            nominal,
            gamma,
        })
    }

    /// Pure feedback around `nominal`, no feedforward.
    pub fn feedback(nominal: Nominal, gains: Trajectory) -> Result<Self> {
        let nu = nominal.u.dim();
        let feedforward = Trajectory::constant(nominal.x.grid().clone(), DVector::zeros(nu))?;
        Ok(AffinePolicy {
            nominal,
            gains,
            feedforward,
            gamma: 0.0,
        })
    }

    /// Open loop: `u(t) = ū(t)` with a nominal state that is never used.
    pub fn open_loop(x_dummy: Trajectory, u: Trajectory) -> Result<Self> {
        let (nu, nx) = (u.dim(), x_dummy.dim());
        let gains = Trajectory::constant(u.grid().clone(), DVector::zeros(nu * nx))?;
        AffinePolicy::feedback(Nominal { x: x_dummy, u }, gains)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        AffinePolicy { gamma, ..self.clone() }
    }

    pub fn gain_at(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(
            self.nominal.u.dim(),
            self.nominal.x.dim(),
            self.gains.interpolate(t).as_slice(),
        )
    }

    pub fn gain(&self, node: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(
            self.nominal.u.dim(),
            self.nominal.x.dim(),
            self.gains.value(node).as_slice(),
        )
    }

    pub fn input(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut u = self.nominal.u.interpolate(t);
        if self.gamma != 0.0 {
            u += self.feedforward.interpolate(t) * self.gamma;
        }
        let dx = x - self.nominal.x.interpolate(t);
        u + self.gain_at(t) * dx
    }

    /// Largest feedforward 2-norm over the grid.
    pub fn feedforward_norm(&self) -> f64 {
        self.feedforward.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn shift_and_extrapolate(&self, dt: f64) -> Result<Self> {
        Ok(AffinePolicy {
            nominal: Nominal {
                x: self.nominal.x.shift_and_extrapolate(dt)?,
                u: self.nominal.u.shift_and_extrapolate(dt)?,
            },
            gains: self.gains.shift_and_extrapolate(dt)?,
            feedforward: self.feedforward.shift_and_extrapolate(dt)?,
            gamma: self.gamma,
        })
    }
}
