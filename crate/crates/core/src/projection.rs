//! Null-space projection of linearized state-input equalities
//! `C δx + D δu + e = 0`. Any admissible input step is written as
//! `δu = F δx + f + N w` with `F = −D⁺C`, `f = −D⁺e` and `N = I − D⁺D`,
//! and the LQ subproblem is re-expressed in the free coordinates `w`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::slq::lq::{LqNode, LqTerminal};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedEquality {
    /// `∂g/∂x`, `n_g × n_x`
    pub c: DMatrix<f64>,
    /// `∂g/∂u`, `n_g × n_u`
    pub d: DMatrix<f64>,
    pub e: DVector<f64>,
}

impl LinearizedEquality {
    pub fn residual(&self, dx: &DVector<f64>, du: &DVector<f64>) -> DVector<f64> {
        &self.c * dx + &self.d * du + &self.e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionTerms {
    /// `D⁺`, `n_u × n_g`
    pub d_pinv: DMatrix<f64>,
    /// `I − D⁺D`, `n_u × n_u`
    pub null: DMatrix<f64>,
}

/// Pseudo-inverse and null-space projector of `D` by SVD, with rank
/// tolerance `1e-9·σ_max`.
pub fn projection_terms(eq: &LinearizedEquality) -> Result<ProjectionTerms> {
    let (ng, nu) = eq.d.shape();
    if ng == 0 {
        return Ok(ProjectionTerms {
            d_pinv: DMatrix::zeros(nu, 0),
            null: DMatrix::identity(nu, nu),
        });
    }
    if ng > nu {
        return Err(Error::RankDeficient {
            what: "D",
            rank: nu,
            required: ng,
        });
    }
    let svd = eq.d.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = 1e-9 * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < ng || sigma_max == 0.0 {
        return Err(Error::RankDeficient {
            what: "D",
            rank,
            required: ng,
        });
    }
    let d_pinv = svd.pseudo_inverse(tol).map_err(|e| Error::param("D", e.to_string()))?;
    let mut null = DMatrix::identity(nu, nu) - &d_pinv * &eq.d;
    null = (&null + null.transpose()) * 0.5;
    Ok(ProjectionTerms { d_pinv, null })
}

/// Affine map `(δx, w) ↦ δu = F δx + f + N w`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputReconstruction {
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub null: DMatrix<f64>,
}

impl InputReconstruction {
    pub fn identity(nx: usize, nu: usize) -> Self {
        InputReconstruction {
            gain: DMatrix::zeros(nu, nx),
            offset: DVector::zeros(nu),
            null: DMatrix::identity(nu, nu),
        }
    }

    pub fn apply(&self, dx: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.gain * dx + &self.offset + &self.null * w
    }

    /// Maps a policy `w = K_w δx + w_ff` to `δu = K δx + u_ff`.
    pub fn map_policy(&self, k_w: &DMatrix<f64>, w_ff: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        (&self.gain + &self.null * k_w, &self.offset + &self.null * w_ff)
    }
}

/// Substitutes the constrained parametrization into one LQ node. The
/// returned node optimizes over `w`; `R_w = N R N + (I − N)` keeps the
/// directions that do not reach `δu` at unit curvature so `R_w` stays
/// invertible.
pub fn project_lq_subproblem(node: &LqNode, eq: &LinearizedEquality) -> Result<(LqNode, InputReconstruction)> {
    let nx = node.state_dim();
    let nu = node.input_dim();
    if eq.d.nrows() == 0 {
        return Ok((node.clone(), InputReconstruction::identity(nx, nu)));
    }
    if eq.d.ncols() != nu || eq.c.ncols() != nx {
        return Err(Error::DimensionMismatch {
            what: "equality Jacobian columns",
            expected: nu,
            got: eq.d.ncols(),
        });
    }
    let terms = projection_terms(eq)?;
    let f_gain = -&terms.d_pinv * &eq.c;
    let f_off = -&terms.d_pinv * &eq.e;
    let n = terms.null;
    let eye = DMatrix::<f64>::identity(nu, nu);

    let rf = &node.r * &f_gain;
    let rf_off = &node.r * &f_off;
    let fp = f_gain.transpose() * &node.p;
    let mut q = &node.q + f_gain.transpose() * &rf + &fp + fp.transpose();
    q = (&q + q.transpose()) * 0.5;
    let mut r = &n * &node.r * &n + (&eye - &n);
    r = (&r + r.transpose()) * 0.5;
    let projected = LqNode {
        a: &node.a + &node.b * &f_gain,
        b: &node.b * &n,
        drift: &node.drift + &node.b * &f_off,
        q,
        r,
        p: &n * (&rf + &node.p),
        q_vec: &node.q_vec + f_gain.transpose() * &rf_off + node.p.tr_mul(&f_off) + f_gain.tr_mul(&node.r_vec),
        r_vec: &n * (&rf_off + &node.r_vec),
        q0: node.q0 + node.r_vec.dot(&f_off) + 0.5 * f_off.dot(&rf_off),
    };
    Ok((
        projected,
        InputReconstruction {
            gain: f_gain,
            offset: f_off,
            null: n,
        },
    ))
}

/// State and input sequences of a discrete solution.
pub type DiscreteSolution = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Discrete-time equality-constrained LQ problem
/// `x_{k+1} = A_k x_k + B_k u_k + c_k`, `C_k x_k + D_k u_k + e_k = 0`,
/// with the stage cost of each node and the terminal cost, solved by a
/// projected Riccati recursion. Returns the optimal states and inputs.
pub fn solve_projected_discrete(
    stages: &[LqNode],
    equalities: &[LinearizedEquality],
    terminal: &LqTerminal,
    x0: &DVector<f64>,
) -> Result<DiscreteSolution> {
    if equalities.len() != stages.len() {
        return Err(Error::DimensionMismatch {
            what: "equalities per stage",
            expected: stages.len(),
            got: equalities.len(),
        });
    }
    let mut s_mat = terminal.q.clone();
    let mut s_vec = terminal.q_vec.clone();
    let mut policy = Vec::with_capacity(stages.len());
    for (node, eq) in stages.iter().zip(equalities).rev() {
        let (p, map) = project_lq_subproblem(node, eq)?;
        let sb = &s_mat * &p.b;
        let h = &p.r + p.b.transpose() * &sb;
        let g = &p.p + sb.transpose() * &p.a;
        let next = &s_mat * &p.drift + &s_vec;
        let gv = &p.r_vec + p.b.tr_mul(&next);
        let chol = h.cholesky().ok_or(Error::RankDeficient {
            what: "projected stage Hessian",
            rank: 0,
            required: p.r.nrows(),
        })?;
        let k_w = -chol.solve(&g);
        let w_ff = -chol.solve(&gv);
        let mut s_new = &p.q + p.a.transpose() * &s_mat * &p.a + g.transpose() * &k_w;
        s_new = (&s_new + s_new.transpose()) * 0.5;
        s_vec = &p.q_vec + p.a.tr_mul(&next) + g.tr_mul(&w_ff);
        s_mat = s_new;
        policy.push(map.map_policy(&k_w, &w_ff));
    }
    policy.reverse();
    let mut xs = vec![x0.clone()];
    let mut us = Vec::with_capacity(stages.len());
    for (node, (k, ff)) in stages.iter().zip(&policy) {
        let x = xs.last().unwrap();
        let u = k * x + ff;
        xs.push(&node.a * x + &node.b * &u + &node.drift);
        us.push(u);
    }
    Ok((xs, us))
}
