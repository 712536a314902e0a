use serde::{Deserialize, Serialize};

/// Numerical thresholds. All are relative to a local scale, usually
/// `max(1, largest gradient norm)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// `‖X(x)‖ ≤ equilibrium · scale` counts as an equilibrium.
    pub equilibrium: f64,
    /// Relative singular-value threshold for frame dependence.
    pub frame: f64,
    /// `|det Hess F| ≤ hessian_det · max(1, ‖Hess F‖)ⁿ` counts as degenerate.
    pub hessian_det: f64,
    /// `|𝓘| ≤ inconclusive_band · max(1, ‖Hess F‖²)` yields no verdict.
    pub inconclusive_band: f64,
    /// Accepted least-squares residual for the Lagrange multipliers.
    pub multiplier: f64,
    pub ode_rel: f64,
    pub ode_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            equilibrium: 1e-9,
            frame: 1e-9,
            hessian_det: 1e-9,
            inconclusive_band: 1e-9,
            multiplier: 1e-8,
            ode_rel: 1e-12,
            ode_abs: 1e-14,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("equilibrium", self.equilibrium),
            ("frame", self.frame),
            ("hessian_det", self.hessian_det),
            ("multiplier", self.multiplier),
            ("ode_rel", self.ode_rel),
            ("ode_abs", self.ode_abs),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("tolerance `{name}` must be positive, got {v}"));
            }
        }
        if !(self.inconclusive_band >= 0.0 && self.inconclusive_band.is_finite()) {
            return Err("tolerance `inconclusive_band` must be non-negative".into());
        }
        Ok(())
    }
}
