use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Obstacle, SystemModel};
use crate::error::{Error, Result};

/// Force-controlled point mass in the plane with linear damping, moving
/// through a field of circular pillars.
///
/// State `[px, py, vx, vy]`, input `[fx, fy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarMoverParams {
    pub mass: f64,
    pub damping: f64,
    pub obstacles: Vec<Obstacle>,
    pub goal: [f64; 2],
}

impl PlanarMoverParams {
    /// 20 pillars in two staggered rows. Each row has one narrow gap; the
    /// second gap is offset so the straight line to the goal is blocked.
    pub fn default_maze() -> Self {
        let radius = 0.25;
        let spacing = 0.5;
        let mut obstacles = Vec::with_capacity(20);
        // (row x position, gap centre y, gap half-width measured centre to centre)
        for (x, gap_y) in [(1.0, 0.0), (2.0, -0.3)] {
            let half = 0.35;
            for k in 0..5 {
                let dy = half + spacing * k as f64;
                obstacles.push(Obstacle {
                    center: [x, gap_y + dy],
                    radius,
                });
                obstacles.push(Obstacle {
                    center: [x, gap_y - dy],
                    radius,
                });
            }
        }
        PlanarMoverParams {
            mass: 1.0,
            damping: 0.5,
            obstacles,
            goal: [2.8, -0.3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::param("mass", format!("must be positive, got {}", self.mass)));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::param(
                "damping",
                format!("must be non-negative, got {}", self.damping),
            ));
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        if self.goal.iter().any(|g| !g.is_finite()) {
            return Err(Error::param("goal", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlanarMover {
    mass: f64,
    damping: f64,
}

pub fn planar_mover_model(params: &PlanarMoverParams) -> Result<PlanarMover> {
    params.validate()?;
    Ok(PlanarMover {
        mass: params.mass,
        damping: params.damping,
    })
}

impl PlanarMover {
    fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 2)] = 1.0;
        a[(1, 3)] = 1.0;
        a[(2, 2)] = -self.damping / self.mass;
        a[(3, 3)] = -self.damping / self.mass;
        let mut b = DMatrix::zeros(4, 2);
        b[(2, 0)] = 1.0 / self.mass;
        b[(3, 1)] = 1.0 / self.mass;
        (a, b)
    }
}

impl SystemModel for PlanarMover {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn flow(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        let k = self.damping / self.mass;
        DVector::from_column_slice(&[x[2], x[3], u[0] / self.mass - k * x[2], u[1] / self.mass - k * x[3]])
    }

    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        self.matrices()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate_ode, IntegratorSettings};
    use crate::systems::{finite_difference_check, SampleBox};
    use crate::trajectory::TimeGrid;

    fn undamped() -> PlanarMover {
        planar_mover_model(&PlanarMoverParams {
            mass: 2.0,
            damping: 0.0,
            obstacles: vec![],
            goal: [0.0, 0.0],
        })
        .unwrap()
    }

    #[test]
    fn rest_without_force() {
        let m = planar_mover_model(&PlanarMoverParams::default_maze()).unwrap();
        let x = DVector::from_column_slice(&[0.4, -1.0, 0.0, 0.0]);
        assert!(m.flow(&x, &DVector::zeros(2), 0.0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_force_parabola() {
        let m = undamped();
        let u = DVector::from_column_slice(&[1.0, -3.0]);
        let x0 = DVector::from_column_slice(&[0.5, 0.0, 0.2, 0.1]);
        let grid = TimeGrid::uniform(0.0, 2.0, 8).unwrap();
        let tr = integrate_ode(
            |x, t| m.flow(x, &u, t),
            &x0,
            &grid,
            &IntegratorSettings::adaptive(1e-10, 1e-10),
        )
        .unwrap();
        for (&t, x) in grid.nodes().iter().zip(tr.values()) {
            let px = 0.5 + 0.2 * t + 0.5 * (1.0 / 2.0) * t * t;
            let py = 0.1 * t + 0.5 * (-3.0 / 2.0) * t * t;
            assert!((x[0] - px).abs() < 1e-6 && (x[1] - py).abs() < 1e-6);
        }
    }

    #[test]
    fn jacobians_are_the_linear_matrices() {
        let m = planar_mover_model(&PlanarMoverParams::default_maze()).unwrap();
        let (a, b) = m.jacobians(&DVector::from_element(4, 0.3), &DVector::from_element(2, -1.0), 0.0);
        assert_eq!(a[(2, 2)], -0.5);
        assert_eq!(b[(3, 1)], 1.0);
        let report = finite_difference_check(&m, 50, 1e-8, &SampleBox::planar_mover(), 3);
        assert!(report.passed && report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn default_maze_has_twenty_pillars() {
        let p = PlanarMoverParams::default_maze();
        assert_eq!(p.obstacles.len(), 20);
        p.validate().unwrap();
        // start and goal are clear of every pillar
        for o in &p.obstacles {
            let d0 = (o.center[0].powi(2) + o.center[1].powi(2)).sqrt();
            let dg = ((o.center[0] - p.goal[0]).powi(2) + (o.center[1] - p.goal[1]).powi(2)).sqrt();
            assert!(d0 > o.radius && dg > o.radius);
        }
    }
}
