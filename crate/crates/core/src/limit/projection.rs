use serde::{Deserialize, Serialize};

use super::bound::LimitResult;
use super::{domain, LimitError};
use crate::model::PhysicsConstants;
use crate::Real;

/// Operating point from which a projection starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityModel<T> {
    /// Excess uncertainty reached after `reference_live_time_s`.
    pub sigma_delta: T,
    pub reference_live_time_s: T,
    pub current_a: T,
    pub efficiency: T,
    pub n_sigma: T,
}

impl<T: Real> SensitivityModel<T> {
    pub fn from_limit(limit: &LimitResult<T>, live_time_s: T, current_a: T) -> Self {
        Self {
            sigma_delta: limit.delta.delta.sigma,
            reference_live_time_s: live_time_s,
            current_a,
            efficiency: limit.efficiency,
            n_sigma: limit.n_sigma,
        }
    }

    /// Expected signal counts per unit β²/2 per second of current-on time.
    fn signal_rate(&self, consts: &PhysicsConstants<T>) -> T {
        self.current_a / consts.electron_charge_c * consts.capture_fraction * consts.scatterings_per_electron() * self.efficiency
    }

    /// Limit reached after `live_time_s` with σ_Δ growing as √t.
    pub fn limit_at(&self, live_time_s: T, consts: &PhysicsConstants<T>) -> T {
        let sigma = self.sigma_delta * (live_time_s / self.reference_live_time_s).sqrt();
        self.n_sigma * sigma / (self.signal_rate(consts) * live_time_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    pub target: T,
    pub reference_limit: T,
    /// Live time reaching the target when σ_Δ ∝ √t (constant background rate).
    pub live_time_scaling_sigma_s: T,
    /// Live time reaching the target if σ_Δ stayed at its reference value.
    pub live_time_fixed_sigma_s: T,
    /// Exposure × efficiency gain needed at fixed σ_Δ: reference limit / target.
    pub improvement_factor_fixed_sigma: T,
    /// Exposure gain needed when σ_Δ ∝ √t: (reference limit / target)².
    pub improvement_factor_scaling_sigma: T,
}

/// Solves `limit(t) = target` under both noise-scaling assumptions.
pub fn project_sensitivity<T: Real>(target: T, model: &SensitivityModel<T>, consts: &PhysicsConstants<T>) -> Result<Projection<T>, LimitError> {
    if !(target > T::zero()) || !target.is_finite() {
        return Err(domain(format!("target must be positive, got {target}")));
    }
    if !(model.reference_live_time_s > T::zero()) {
        return Err(domain("reference live time must be positive"));
    }
    let rate = model.signal_rate(consts);
    let reference_limit = model.limit_at(model.reference_live_time_s, consts);
    let fixed = model.n_sigma * model.sigma_delta / (rate * target);
    let root = model.n_sigma * model.sigma_delta / (model.reference_live_time_s.sqrt() * rate * target);
    let scaling = root * root;
    for (name, t) in [("scaling-sigma", scaling), ("fixed-sigma", fixed)] {
        if !t.is_finite() || !(t > T::zero()) {
            return Err(LimitError::Unreachable(format!(
                "{name} solution for target {target} is {t}"
            )));
        }
    }
    Ok(Projection {
        target,
        reference_limit,
        live_time_scaling_sigma_s: scaling,
        live_time_fixed_sigma_s: fixed,
        improvement_factor_fixed_sigma: fixed / model.reference_live_time_s,
        improvement_factor_scaling_sigma: scaling / model.reference_live_time_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIVE: f64 = 34.0 * 86_400.0;

    fn model() -> SensitivityModel<f64> {
        SensitivityModel {
            sigma_delta: 66.0,
            reference_live_time_s: LIVE,
            current_a: 100.0,
            efficiency: 0.01,
            n_sigma: 3.0,
        }
    }

    #[test]
    fn fixed_point() {
        let c = PhysicsConstants::default();
        let m = model();
        let current = m.limit_at(LIVE, &c);
        let p = project_sensitivity(current, &m, &c).unwrap();
        assert!((p.live_time_scaling_sigma_s / LIVE - 1.0).abs() < 1e-12);
        assert!((p.live_time_fixed_sigma_s / LIVE - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tenfold_target_needs_hundredfold_time() {
        let c = PhysicsConstants::default();
        let m = model();
        let current = m.limit_at(LIVE, &c);
        let p = project_sensitivity(current / 10.0, &m, &c).unwrap();
        assert!((p.live_time_scaling_sigma_s / LIVE - 100.0).abs() < 1e-9);
        assert!((p.live_time_fixed_sigma_s / LIVE - 10.0).abs() < 1e-9);
    }

    #[test]
    fn goal_factor() {
        let c = PhysicsConstants::default();
        let p = project_sensitivity(1e-31, &model(), &c).unwrap();
        assert!((p.reference_limit / 4.2e-29 - 1.0).abs() < 0.02);
        assert!((p.improvement_factor_fixed_sigma / 420.0 - 1.0).abs() < 0.02);
        let f = p.improvement_factor_fixed_sigma;
        assert!((p.improvement_factor_scaling_sigma - f * f).abs() / (f * f) < 1e-12);
    }

    #[test]
    fn unreachable_and_invalid_targets() {
        let c = PhysicsConstants::default();
        let mut m = model();
        m.current_a = 0.0;
        assert!(matches!(project_sensitivity(1e-31, &m, &c), Err(LimitError::Unreachable(_))));
        assert!(project_sensitivity(0.0, &model(), &c).is_err());
        assert!(project_sensitivity(-1.0, &model(), &c).is_err());
    }
}
