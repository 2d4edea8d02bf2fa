use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrator::{Integrator, IntegratorSettings};
use crate::slq::lq::{LqApproximation, LqNode};
use crate::trajectory::TimeGrid;

/// Value-function coefficients `S(t)`, `s(t)` on the grid together with the
/// gains `K = −R⁻¹(BᵀS + P)` and feedforward `−R⁻¹(Bᵀs + r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    pub s_matrix: Vec<DMatrix<f64>>,
    pub s_vector: Vec<DVector<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    pub feedforward: Vec<DVector<f64>>,
    /// `½∫ u_ffᵀ R u_ff dt`, the decrease the LQ model predicts for a full feedforward step.
    pub expected_decrease: f64,
    pub steps: usize,
    pub evaluations: usize,
}

fn pack(s: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut z = DVector::zeros(n * n + n);
    z.rows_mut(0, n * n).copy_from_slice(s.as_slice());
    z.rows_mut(n * n, n).copy_from(v);
    z
}

fn unpack(z: &DVector<f64>, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let s = DMatrix::from_column_slice(n, n, &z.as_slice()[..n * n]);
    let v = DVector::from_column_slice(&z.as_slice()[n * n..]);
    (s, v)
}

fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

fn riccati_rhs(node: &LqNode, s: &DMatrix<f64>, v: &DVector<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let chol = node.r.clone().cholesky()?;
    let l = node.b.transpose() * s + &node.p;
    let m = &node.r_vec + node.b.tr_mul(v);
    let rinv_l = chol.solve(&l);
    let rinv_m = chol.solve(&m);
    let at_s = node.a.transpose() * s;
    let s_dot = -(&node.q + &at_s + at_s.transpose() - l.transpose() * rinv_l);
    let v_dot = -(&node.q_vec + node.a.tr_mul(v) + s * &node.drift - l.tr_mul(&rinv_m));
    Some((symmetrize(&s_dot), v_dot))
}

/// Integrates the differential Riccati equation
/// `−Ṡ = Q + AᵀS + SA − (SB+Pᵀ)R⁻¹(BᵀS+P)`,
/// `−ṡ = q + Aᵀs + S c − (SB+Pᵀ)R⁻¹(Bᵀs+r)`
/// backward from `S(t_f) = Q_f`, `s(t_f) = q_f`. LQ data is interpolated
/// linearly between nodes and `S` is symmetrized at every node.
pub fn backward_riccati(lq: &LqApproximation, settings: &IntegratorSettings, norm_cap: f64) -> Result<RiccatiSolution> {
    let n = lq.terminal.q.nrows();
    let nodes = lq.grid.nodes();
    if lq.nodes.len() != nodes.len() {
        return Err(Error::DimensionMismatch {
            what: "LQ nodes vs grid",
            expected: nodes.len(),
            got: lq.nodes.len(),
        });
    }
    let mut integrator = Integrator::new(*settings)?;
    let len = nodes.len();
    let mut s_matrix = vec![DMatrix::zeros(n, n); len];
    let mut s_vector = vec![DVector::zeros(n); len];
    s_matrix[len - 1] = lq.terminal.q.clone();
    s_vector[len - 1] = lq.terminal.q_vec.clone();
    let mut z = pack(&lq.terminal.q, &lq.terminal.q_vec);
    for i in (0..len - 1).rev() {
        let (t0, t1) = (nodes[i], nodes[i + 1]);
        let (lo, hi) = (&lq.nodes[i], &lq.nodes[i + 1]);
        let mut singular = None;
        let mut flow = |z: &DVector<f64>, t: f64| {
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let node = lo.lerp(hi, w);
            let (s, v) = unpack(z, n);
            match riccati_rhs(&node, &s, &v) {
                Some((ds, dv)) => pack(&ds, &dv),
                None => {
                    singular.get_or_insert(t);
                    DVector::from_element(z.len(), f64::NAN)
                }
            }
        };
        let next = integrator.advance(&mut flow, z, t1, t0);
        if singular.is_some() {
            return Err(Error::RankDeficient {
                what: "input Hessian R in the Riccati pass",
                rank: 0,
                required: lo.input_dim(),
            });
        }
        let (s, v) = unpack(&next?, n);
        let s = symmetrize(&s);
        let norm = s.amax();
        if !norm.is_finite() || norm > norm_cap {
            return Err(Error::RiccatiBlowUp {
                t: t0,
                norm,
                cap: norm_cap,
            });
        }
        z = pack(&s, &v);
        s_matrix[i] = s;
        s_vector[i] = v;
    }

    let mut gains = Vec::with_capacity(len);
    let mut feedforward = Vec::with_capacity(len);
    let mut density = Vec::with_capacity(len);
    for (i, node) in lq.nodes.iter().enumerate() {
        let chol = node.r.clone().cholesky().ok_or(Error::RankDeficient {
            what: "input Hessian R",
            rank: 0,
            required: node.input_dim(),
        })?;
        let k = -chol.solve(&(node.b.transpose() * &s_matrix[i] + &node.p));
        let ff = -chol.solve(&(&node.r_vec + node.b.tr_mul(&s_vector[i])));
        density.push(0.5 * ff.dot(&(&node.r * &ff)));
        gains.push(k);
        feedforward.push(ff);
    }
    let expected_decrease = nodes
        .windows(2)
        .zip(density.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .sum();
    Ok(RiccatiSolution {
        grid: lq.grid.clone(),
        s_matrix,
        s_vector,
        gains,
        feedforward,
        expected_decrease,
        steps: integrator.steps_taken(),
        evaluations: integrator.evaluations(),
    })
}
