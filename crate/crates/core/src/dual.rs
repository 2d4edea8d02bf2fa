//! Multiplier update laws, read as dual gradient-ascent steps of length α.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{psi_function, PenaltyKind, PenaltyStrategy};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualRule {
    /// `max{ν − αh, (1 − α/ρ)ν}`, paired with PHR
    Pi1,
    /// `max{0, ν − αh}`, paired with non-slack
    Pi2,
    /// `−α ν ψ'(ρh/ν)`, paired with smooth PHR
    Pi3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualUpdateConfig {
    pub alpha: f64,
    pub rho: f64,
    pub rule: DualRule,
    pub nu_min: f64,
    pub delta_psi: f64,
}

impl DualUpdateConfig {
    /// Rule matching the penalty kind. `None` for the relaxed barrier, which has no multipliers.
    pub fn for_strategy(strategy: &PenaltyStrategy) -> Option<Self> {
        let rule = match strategy.kind {
            PenaltyKind::Phr => DualRule::Pi1,
            PenaltyKind::NonSlack => DualRule::Pi2,
            PenaltyKind::SmoothPhr => DualRule::Pi3,
            PenaltyKind::RelaxedBarrier => return None,
        };
        Some(DualUpdateConfig {
            alpha: strategy.alpha,
            rho: strategy.rho,
            rule,
            nu_min: strategy.nu_min,
            delta_psi: strategy.delta_psi,
        })
    }

    pub fn floor(&self) -> f64 {
        match self.rule {
            DualRule::Pi3 => self.nu_min,
            _ => 0.0,
        }
    }

    pub fn apply(&self, nu: f64, h: f64) -> f64 {
        match self.rule {
            DualRule::Pi1 => update_pi1(nu, h, self),
            DualRule::Pi2 => update_pi2(nu, h, self),
            DualRule::Pi3 => update_pi3(nu, h, self),
        }
    }
}

/// Clamped at zero: for `ρ < α < 2ρ` the decay branch alone would flip sign.
pub fn update_pi1(nu: f64, h: f64, cfg: &DualUpdateConfig) -> f64 {
    (nu - cfg.alpha * h).max((1.0 - cfg.alpha / cfg.rho) * nu).max(0.0)
}

pub fn update_pi2(nu: f64, h: f64, cfg: &DualUpdateConfig) -> f64 {
    (nu - cfg.alpha * h).max(0.0)
}

pub fn update_pi3(nu: f64, h: f64, cfg: &DualUpdateConfig) -> f64 {
    let nu = nu.max(cfg.nu_min);
    let (_, dpsi, _) = psi_function(cfg.rho * h / nu, cfg.delta_psi);
    (-cfg.alpha * nu * dpsi).max(cfg.nu_min)
}

/// Applies the configured rule at every node and every constraint.
pub fn update_multiplier_trajectory(nu: &Trajectory, h: &Trajectory, cfg: &DualUpdateConfig) -> Result<Trajectory> {
    check_aligned(nu, h)?;
    let values = nu
        .values()
        .iter()
        .zip(h.values())
        .map(|(n, hv)| n.zip_map(hv, |n, hv| cfg.apply(n, hv)))
        .collect();
    Trajectory::new(nu.grid().clone(), values)
}

/// `ν_eq ← ν_eq + α g` for state-only equalities.
pub fn update_equality_multipliers(nu: &Trajectory, g: &Trajectory, alpha: f64) -> Result<Trajectory> {
    check_aligned(nu, g)?;
    let values = nu
        .values()
        .iter()
        .zip(g.values())
        .map(|(n, gv)| n + gv * alpha)
        .collect();
    Trajectory::new(nu.grid().clone(), values)
}

fn check_aligned(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "multiplier vs constraint dimension",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let (ga, gb) = (a.grid().nodes(), b.grid().nodes());
    if ga.len() != gb.len() || ga.iter().zip(gb).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0)) {
        return Err(Error::GridMismatch(
            "multiplier and constraint trajectories differ".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stability {
    Ok,
    Warning(String),
}

/// Flags step lengths outside `(0, 2ρ̄)`, where inactive multipliers stop decaying.
pub fn check_stability(cfg: &DualUpdateConfig) -> Stability {
    if cfg.alpha > 0.0 && cfg.alpha < 2.0 * cfg.rho {
        Stability::Ok
    } else if cfg.alpha <= 0.0 {
        Stability::Warning(format!("alpha = {} makes no dual progress", cfg.alpha))
    } else {
        Stability::Warning(format!(
            "alpha = {} lies outside (0, 2*rho) = (0, {}); inactive multipliers will not decay",
            cfg.alpha,
            2.0 * cfg.rho
        ))
    }
}
