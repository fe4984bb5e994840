use crate::error::{invalid, Result};
use crate::fields::ScalarField;

/// Output of [`strictify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Strictified {
    /// `g_δ ∘ v`.
    pub field: ScalarField,
    /// `min{δε/2, δα²ε²/(2C₀)}`.
    pub mu: f64,
    /// `4‖v‖_∞`, floored at `1e-12`.
    pub c0: f64,
    /// `‖g_δ ∘ v - v‖_∞`.
    pub perturbation: f64,
    /// `perturbation ≤ δ`.
    pub within_delta: bool,
    /// `‖v‖_∞` was too small for the transform; `field` equals `v`.
    pub degenerate: bool,
}

/// `g_δ(t) = (1+δ)t - δt²/(4C₀)` on `|t| ≤ 2C₀`, continued linearly.
pub fn g_delta(t: f64, delta: f64, c0: f64) -> f64 {
    let q = |s: f64| (1.0 + delta) * s - delta * s * s / (4.0 * c0);
    let edge = 2.0 * c0;
    if t.abs() <= edge {
        q(t)
    } else {
        let e = edge.copysign(t);
        let slope = (1.0 + delta) - delta * e / (2.0 * c0);
        q(e) + slope * (t - e)
    }
}

pub fn strictify(v: &ScalarField, delta: f64, eps: f64, alpha: f64) -> Result<Strictified> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(invalid("alpha", "must be at least 1"));
    }
    let raw = 4.0 * v.sup_norm();
    let degenerate = raw < 1e-12;
    let c0 = raw.max(1e-12);
    let mu = (delta * eps / 2.0).min(delta * alpha * alpha * eps * eps / (2.0 * c0));
    let field = if degenerate {
        v.clone()
    } else {
        v.map(|t| g_delta(t, delta, c0))?
    };
    let perturbation = v
        .domain()
        .active_nodes()
        .map(|i| (field.values()[i] - v.values()[i]).abs())
        .fold(0.0, f64::max);
    Ok(Strictified {
        field,
        mu,
        c0,
        perturbation,
        within_delta: perturbation <= delta,
        degenerate,
    })
}
