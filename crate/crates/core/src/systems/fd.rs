use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SystemModel;

/// Axis-aligned sampling region for states and inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub state: Vec<(f64, f64)>,
    pub input: Vec<(f64, f64)>,
}

impl SampleBox {
    /// Cart position ±2 m, any angle in [-π, 2π], rates ±5, force ±20 N.
    pub fn cartpole() -> Self {
        use std::f64::consts::PI;
        SampleBox {
            state: vec![(-2.0, 2.0), (-PI, 2.0 * PI), (-5.0, 5.0), (-5.0, 5.0)],
            input: vec![(-20.0, 20.0)],
        }
    }

    pub fn planar_mover() -> Self {
        SampleBox {
            state: vec![(-1.0, 4.0), (-3.0, 3.0), (-3.0, 3.0), (-3.0, 3.0)],
            input: vec![(-10.0, 10.0), (-10.0, 10.0)],
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (DVector<f64>, DVector<f64>) {
        let draw = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let x = DVector::from_iterator(self.state.len(), self.state.iter().map(|&b| draw(rng, b)));
        let u = DVector::from_iterator(self.input.len(), self.input.iter().map(|&b| draw(rng, b)));
        (x, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub samples: usize,
    /// Largest entrywise `|analytic - fd| / max(|fd|, 1)` over all samples.
    pub max_rel_error: f64,
    pub worst_state: DVector<f64>,
    pub worst_input: DVector<f64>,
    pub passed: bool,
}

/// Central-difference Jacobian of `f` at `z` with per-entry step `1e-6·max(1, |z_i|)`.
pub fn central_difference<F>(f: F, z: &DVector<f64>, out_dim: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut jac = DMatrix::zeros(out_dim, z.len());
    for j in 0..z.len() {
        let h = 1e-6 * z[j].abs().max(1.0);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += h;
        zm[j] -= h;
        let col = (f(&zp) - f(&zm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

pub(crate) fn relative_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Compares the analytic Jacobians of `model` with central differences at
/// `samples` seeded random points drawn from `region`.
pub fn finite_difference_check(
    model: &dyn SystemModel,
    samples: usize,
    tol: f64,
    region: &SampleBox,
    seed: u64,
) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = model.state_dim();
    let mut report = FdReport {
        samples,
        max_rel_error: 0.0,
        worst_state: DVector::zeros(nx),
        worst_input: DVector::zeros(model.input_dim()),
        passed: true,
    };
    for _ in 0..samples {
        let (x, u) = region.sample(&mut rng);
        let (a, b) = model.jacobians(&x, &u, 0.0);
        let a_fd = central_difference(|xp| model.flow(xp, &u, 0.0), &x, nx);
        let b_fd = central_difference(|up| model.flow(&x, up, 0.0), &u, nx);
        let err = relative_error(&a, &a_fd).max(relative_error(&b, &b_fd));
        if !(err <= report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_state = x;
            report.worst_input = u;
        }
    }
    report.passed = report.max_rel_error < tol;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::LinearSystem;

    #[derive(Debug)]
    struct WrongJacobian;

    impl SystemModel for WrongJacobian {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn flow(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
            DVector::from_element(1, x[0].sin() + u[0])
        }
        fn jacobians(&self, x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
            // derivative of sin taken as sin
            (
                DMatrix::from_element(1, 1, x[0].sin()),
                DMatrix::from_element(1, 1, 1.0),
            )
        }
    }

    #[test]
    fn wrong_jacobian_is_flagged() {
        let region = SampleBox {
            state: vec![(-3.0, 3.0)],
            input: vec![(-1.0, 1.0)],
        };
        let r = finite_difference_check(&WrongJacobian, 20, 1e-4, &region, 1);
        assert!(!r.passed);
        assert!(r.max_rel_error > 0.1);
    }

    #[test]
    fn linear_system_is_exact() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let region = SampleBox {
            state: vec![(-5.0, 5.0); 2],
            input: vec![(-5.0, 5.0)],
        };
        let r = finite_difference_check(&sys, 100, 1e-4, &region, 2);
        assert!(r.passed);
        assert!(r.max_rel_error < 1e-8, "{}", r.max_rel_error);
    }
}
