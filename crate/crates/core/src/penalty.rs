//! Inequality penalties: three augmented-Lagrangian penalties (PHR,
//! non-slack, smooth PHR) and the relaxed log-barrier, together with their
//! chain-rule quadratization into the LQ subproblem.
//!
//! Every penalty is separable across constraints, so the second derivative
//! with respect to `h` is returned as a diagonal.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::CostQuadratic;
use crate::error::{Error, Result};
use crate::systems::{ConstraintHessian, ConstraintJacobian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Phr,
    NonSlack,
    SmoothPhr,
    RelaxedBarrier,
}

impl PenaltyKind {
    pub fn is_augmented_lagrangian(self) -> bool {
        !matches!(self, PenaltyKind::RelaxedBarrier)
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Phr => "phr",
            PenaltyKind::NonSlack => "non_slack",
            PenaltyKind::SmoothPhr => "smooth_phr",
            PenaltyKind::RelaxedBarrier => "relaxed_barrier",
        }
    }
}

/// Inequality-handling method and its parameters. Fields that a kind does
/// not use are ignored (`mu`, `delta` for the AL kinds; `rho`, `alpha` for
/// the barrier).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyStrategy {
    pub kind: PenaltyKind,
    /// Penalty weight ρ̄, constant across MPC iterations.
    pub rho: f64,
    /// Dual ascent step length.
    pub alpha: f64,
    /// Barrier weight.
    pub mu: f64,
    /// Barrier relaxation threshold.
    pub delta: f64,
    /// Junction of ψ's logarithmic and quadratic branches, in (0, 1).
    pub delta_psi: f64,
    /// Lower bound for smooth-PHR multipliers.
    pub nu_min: f64,
}

impl Default for PenaltyStrategy {
    fn default() -> Self {
        PenaltyStrategy {
            kind: PenaltyKind::Phr,
            rho: 100.0,
            alpha: 10.0,
            mu: 0.1,
            delta: 0.1,
            delta_psi: 0.5,
            nu_min: 1e-6,
        }
    }
}

impl PenaltyStrategy {
    pub fn phr(rho: f64, alpha: f64) -> Self {
        PenaltyStrategy {
            kind: PenaltyKind::Phr,
            rho,
            alpha,
            ..Default::default()
        }
    }

    pub fn non_slack(rho: f64, alpha: f64) -> Self {
        PenaltyStrategy {
            kind: PenaltyKind::NonSlack,
            rho,
            alpha,
            ..Default::default()
        }
    }

    pub fn smooth_phr(rho: f64, alpha: f64) -> Self {
        PenaltyStrategy {
            kind: PenaltyKind::SmoothPhr,
            rho,
            alpha,
            ..Default::default()
        }
    }

    pub fn relaxed_barrier(mu: f64, delta: f64) -> Self {
        PenaltyStrategy {
            kind: PenaltyKind::RelaxedBarrier,
            mu,
            delta,
            ..Default::default()
        }
    }

    /// Rejects parameters for which the penalty itself is undefined. The
    /// dual step-length condition is only a warning, see
    /// [`crate::dual::check_stability`].
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        match self.kind {
            PenaltyKind::RelaxedBarrier => {
                positive("mu", self.mu)?;
                positive("delta", self.delta)?;
            }
            kind => {
                positive("rho", self.rho)?;
                if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
                    return Err(Error::param(
                        "alpha",
                        format!("must be non-negative, got {}", self.alpha),
                    ));
                }
                if kind == PenaltyKind::SmoothPhr {
                    if !(self.delta_psi > 0.0 && self.delta_psi < 1.0) {
                        return Err(Error::param(
                            "delta_psi",
                            format!("must lie in (0, 1), got {}", self.delta_psi),
                        ));
                    }
                    positive("nu_min", self.nu_min)?;
                }
            }
        }
        Ok(())
    }

    /// Smallest admissible multiplier for this strategy.
    pub fn multiplier_floor(&self) -> f64 {
        match self.kind {
            PenaltyKind::SmoothPhr => self.nu_min,
            _ => 0.0,
        }
    }

    pub fn evaluate(&self, h: &DVector<f64>, nu: &DVector<f64>) -> Result<PenaltyEvaluation> {
        match self.kind {
            PenaltyKind::Phr => Ok(phr_penalty(h, nu, self.rho)),
            PenaltyKind::NonSlack => Ok(nonslack_penalty(h, nu, self.rho)),
            PenaltyKind::SmoothPhr => smooth_phr_penalty(h, nu, self.rho, self.delta_psi, self.nu_min),
            PenaltyKind::RelaxedBarrier => Ok(relaxed_barrier_penalty(h, self.mu, self.delta)),
        }
    }
}

/// Penalty value with its derivatives with respect to each constraint value.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyEvaluation {
    pub value: f64,
    pub d_dh: DVector<f64>,
    pub d2_dh2: DVector<f64>,
}

impl PenaltyEvaluation {
    fn from_terms(n: usize, term: impl Fn(usize) -> (f64, f64, f64)) -> Self {
        let mut eval = PenaltyEvaluation {
            value: 0.0,
            d_dh: DVector::zeros(n),
            d2_dh2: DVector::zeros(n),
        };
        for i in 0..n {
            let (v, d, dd) = term(i);
            eval.value += v;
            eval.d_dh[i] = d;
            eval.d2_dh2[i] = dd;
        }
        eval
    }

    pub fn zeros(n: usize) -> Self {
        PenaltyEvaluation {
            value: 0.0,
            d_dh: DVector::zeros(n),
            d2_dh2: DVector::zeros(n),
        }
    }
}

pub(crate) fn phr_term(h: f64, nu: f64, rho: f64) -> (f64, f64, f64) {
    let z = nu - rho * h;
    let active = z.max(0.0);
    let value = (active * active - nu * nu) / (2.0 * rho);
    let curvature = if z >= 0.0 { rho } else { 0.0 };
    (value, -active, curvature)
}

pub(crate) fn nonslack_term(h: f64, nu: f64, rho: f64) -> (f64, f64, f64) {
    // the indicator is evaluated with h ≤ 0 so the boundary takes the active branch
    if h <= 0.0 || nu > 0.0 {
        (-nu * h + 0.5 * rho * h * h, -nu + rho * h, rho)
    } else {
        (-nu * h, -nu, 0.0)
    }
}

/// ψ(t) = −ln(t + 1) above `t* = δψ − 1`, continued below by the quadratic
/// that matches value, slope and curvature at `t*`. Returns `(ψ, ψ', ψ'')`.
pub fn psi_function(t: f64, delta_psi: f64) -> (f64, f64, f64) {
    let junction = delta_psi - 1.0;
    if t >= junction {
        let s = t + 1.0;
        (-s.ln(), -1.0 / s, 1.0 / (s * s))
    } else {
        let d = t - junction;
        let inv = 1.0 / delta_psi;
        (
            -delta_psi.ln() - d * inv + 0.5 * d * d * inv * inv,
            -inv + d * inv * inv,
            inv * inv,
        )
    }
}

pub(crate) fn smooth_phr_term(h: f64, nu: f64, rho: f64, delta_psi: f64) -> (f64, f64, f64) {
    let (p, dp, ddp) = psi_function(rho * h / nu, delta_psi);
    (nu * nu / rho * p, nu * dp, rho * ddp)
}

pub(crate) fn barrier_term(h: f64, mu: f64, delta: f64) -> (f64, f64, f64) {
    if h > delta {
        (-mu * h.ln(), -mu / h, mu / (h * h))
    } else {
        let z = (h - 2.0 * delta) / delta;
        (
            0.5 * mu * (z * z - 1.0) - mu * delta.ln(),
            mu * (h - 2.0 * delta) / (delta * delta),
            mu / (delta * delta),
        )
    }
}

/// Powell-Hestenes-Rockafellar penalty `Σ (max{0, ν − ρh}² − ν²) / 2ρ`.
pub fn phr_penalty(h: &DVector<f64>, nu: &DVector<f64>, rho: f64) -> PenaltyEvaluation {
    PenaltyEvaluation::from_terms(h.len(), |i| phr_term(h[i], nu[i], rho))
}

/// Non-slack penalty `Σ −ν h + [h < 0 ∨ ν > 0]·(ρ/2) h²`.
pub fn nonslack_penalty(h: &DVector<f64>, nu: &DVector<f64>, rho: f64) -> PenaltyEvaluation {
    PenaltyEvaluation::from_terms(h.len(), |i| nonslack_term(h[i], nu[i], rho))
}

/// Smooth PHR penalty `Σ (ν²/ρ)·ψ(ρh/ν)`. Multipliers must not be below `nu_min`.
pub fn smooth_phr_penalty(
    h: &DVector<f64>,
    nu: &DVector<f64>,
    rho: f64,
    delta_psi: f64,
    nu_min: f64,
) -> Result<PenaltyEvaluation> {
    // Interpolated multipliers may sit a few ulps under the floor.
    if let Some(&bad) = nu.iter().find(|&&n| !(n >= nu_min * (1.0 - 1e-9))) {
        return Err(Error::MultiplierBelowFloor {
            value: bad,
            floor: nu_min,
        });
    }
    Ok(PenaltyEvaluation::from_terms(h.len(), |i| {
        smooth_phr_term(h[i], nu[i], rho, delta_psi)
    }))
}

/// Relaxed log-barrier: `−μ ln h` above `δ`, quadratic continuation below.
pub fn relaxed_barrier_penalty(h: &DVector<f64>, mu: f64, delta: f64) -> PenaltyEvaluation {
    PenaltyEvaluation::from_terms(h.len(), |i| barrier_term(h[i], mu, delta))
}

/// Classic quadratic augmented Lagrangian `Σ ν g + (ρ/2) g²` for equalities.
pub fn equality_al_penalty(g: &DVector<f64>, nu_eq: &DVector<f64>, rho: f64) -> PenaltyEvaluation {
    PenaltyEvaluation::from_terms(g.len(), |i| {
        (nu_eq[i] * g[i] + 0.5 * rho * g[i] * g[i], nu_eq[i] + rho * g[i], rho)
    })
}

/// Second-order model of `P(h(x, u))` around the current point.
///
/// The default is Gauss-Newton: `P'·∇h` for the gradient and `P''·∇h∇hᵀ`
/// for the Hessian. When `hessians` is given, components that provide
/// second derivatives also contribute `P'·∇²h`; each per-constraint
/// contribution is then clamped to positive semi-definite.
pub fn quadratize_constraint_term(
    jac: &ConstraintJacobian,
    eval: &PenaltyEvaluation,
    hessians: Option<&[Option<ConstraintHessian>]>,
) -> CostQuadratic {
    let nx = jac.dx.ncols();
    let nu = jac.du.ncols();
    let mut out = CostQuadratic {
        value: eval.value,
        dx: jac.dx.tr_mul(&eval.d_dh),
        du: jac.du.tr_mul(&eval.d_dh),
        dxx: DMatrix::zeros(nx, nx),
        duu: DMatrix::zeros(nu, nu),
        dux: DMatrix::zeros(nu, nx),
    };
    for i in 0..eval.d_dh.len() {
        let d1 = eval.d_dh[i];
        let d2 = eval.d2_dh2[i];
        let exact = hessians.and_then(|hs| hs.get(i)).and_then(|h| h.as_ref());
        match exact {
            Some(hess) if d1 != 0.0 => {
                let n = nx + nu;
                let mut g = DVector::zeros(n);
                g.rows_mut(0, nx).copy_from(&jac.dx.row(i).transpose());
                g.rows_mut(nx, nu).copy_from(&jac.du.row(i).transpose());
                let mut m = &g * g.transpose() * d2;
                {
                    let mut xx = m.view_mut((0, 0), (nx, nx));
                    xx += &hess.dxx * d1;
                }
                {
                    let mut uu = m.view_mut((nx, nx), (nu, nu));
                    uu += &hess.duu * d1;
                }
                {
                    let mut ux = m.view_mut((nx, 0), (nu, nx));
                    ux += &hess.dux * d1;
                }
                {
                    let mut xu = m.view_mut((0, nx), (nx, nu));
                    xu += hess.dux.transpose() * d1;
                }
                let m = clamp_psd(m);
                out.dxx += m.view((0, 0), (nx, nx));
                out.duu += m.view((nx, nx), (nu, nu));
                out.dux += m.view((nx, 0), (nu, nx));
            }
            _ => {
                if d2 == 0.0 {
                    continue;
                }
                let gx = jac.dx.row(i);
                let gu = jac.du.row(i);
                out.dxx += gx.transpose() * gx * d2;
                out.duu += gu.transpose() * gu * d2;
                out.dux += gu.transpose() * gx * d2;
            }
        }
    }
    out
}

fn clamp_psd(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}
