use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SystemModel;
use crate::error::{Error, Result};

/// Cart-pole with a point mass at the tip of a massless pole.
///
/// State `[cart position, pole angle, cart velocity, pole rate]`, angle
/// measured from the hanging-down position (`θ = π` is upright). The single
/// input is a horizontal force on the cart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            cart_mass: 1.0,
            pole_mass: 0.3,
            pole_length: 0.5,
            gravity: 9.81,
        }
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_length", self.pole_length),
            ("gravity", self.gravity),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    params: CartPoleParams,
}

pub fn cartpole_model(params: CartPoleParams) -> Result<CartPole> {
    params.validate()?;
    Ok(CartPole { params })
}

impl CartPole {
    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    /// Total mechanical energy; conserved when the input is zero.
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        let CartPoleParams {
            cart_mass: mc,
            pole_mass: mp,
            pole_length: l,
            gravity: g,
        } = self.params;
        let (theta, v, w) = (x[1], x[2], x[3]);
        0.5 * (mc + mp) * v * v + mp * l * v * w * theta.cos() + 0.5 * mp * l * l * w * w - mp * g * l * theta.cos()
    }
}

impl SystemModel for CartPole {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn flow(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        let CartPoleParams {
            cart_mass: mc,
            pole_mass: mp,
            pole_length: l,
            gravity: g,
        } = self.params;
        let (s, c) = x[1].sin_cos();
        let w = x[3];
        let d = mc + mp * s * s;
        let n1 = u[0] + mp * s * (l * w * w + g * c);
        let n2 = -u[0] * c - mp * l * w * w * c * s - (mc + mp) * g * s;
        DVector::from_column_slice(&[x[2], w, n1 / d, n2 / (l * d)])
    }

    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let CartPoleParams {
            cart_mass: mc,
            pole_mass: mp,
            pole_length: l,
            gravity: g,
        } = self.params;
        let (s, c) = x[1].sin_cos();
        let w = x[3];
        let d = mc + mp * s * s;
        let dd_dth = 2.0 * mp * s * c;

        let n1 = u[0] + mp * s * (l * w * w + g * c);
        let dn1_dth = mp * c * l * w * w + mp * g * (c * c - s * s);
        let dn1_dw = 2.0 * mp * s * l * w;

        let n2 = -u[0] * c - mp * l * w * w * c * s - (mc + mp) * g * s;
        let dn2_dth = u[0] * s - mp * l * w * w * (c * c - s * s) - (mc + mp) * g * c;
        let dn2_dw = -2.0 * mp * l * w * c * s;

        let mut a = DMatrix::zeros(4, 4);
        a[(0, 2)] = 1.0;
        a[(1, 3)] = 1.0;
        a[(2, 1)] = (dn1_dth * d - n1 * dd_dth) / (d * d);
        a[(2, 3)] = dn1_dw / d;
        a[(3, 1)] = (dn2_dth * d - n2 * dd_dth) / (l * d * d);
        a[(3, 3)] = dn2_dw / (l * d);

        let mut b = DMatrix::zeros(4, 1);
        b[(2, 0)] = 1.0 / d;
        b[(3, 0)] = -c / (l * d);
        (a, b)
    }
}
