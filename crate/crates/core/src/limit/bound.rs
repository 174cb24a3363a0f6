use serde::{Deserialize, Serialize};

use super::subtract::SubtractionResult;
use super::{domain, LimitError};
use crate::model::{PhysicsConstants, RunMeta};
use crate::Real;

/// How the excess bound is formed from ΔN ± σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundConvention {
    /// `n_sigma · σ`, independent of the central value.
    #[default]
    Paper,
    /// `max(ΔN + n_sigma · σ, 0)`.
    CentralPlusNsigma,
}

impl BoundConvention {
    pub fn label(self) -> &'static str {
        match self {
            BoundConvention::Paper => "paper",
            BoundConvention::CentralPlusNsigma => "central-plus-nsigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResult<T> {
    pub delta: SubtractionResult<T>,
    pub n_new: T,
    pub n_int: T,
    pub capture_fraction: T,
    pub efficiency: T,
    /// Expected signal counts per unit β²/2.
    pub denominator: T,
    pub n_sigma: T,
    pub convention: BoundConvention,
    pub excess_bound: T,
    pub beta2_over_2_limit: T,
    pub confidence_label: String,
}

/// Electrons driven through the conductor, `I·Δt / e`.
pub fn compute_n_new<T: Real>(run: &RunMeta<T>, consts: &PhysicsConstants<T>) -> Result<T, LimitError> {
    run.validate().map_err(|e| domain(e.to_string()))?;
    Ok(run.charge_c() / consts.electron_charge_c)
}

/// Two-sided Gaussian coverage of ±n σ, e.g. "99.7% C.L." for n = 3.
pub fn confidence_label<T: Real>(n_sigma: T) -> String {
    let coverage = (n_sigma / T::SQRT_2()).erf() * T::lit(100.0);
    format!("{:.1}% C.L.", coverage.as_f64())
}

pub fn compute_limit<T: Real>(
    delta: &SubtractionResult<T>,
    run: &RunMeta<T>,
    consts: &PhysicsConstants<T>,
    efficiency: T,
    n_sigma: T,
    convention: BoundConvention,
) -> Result<LimitResult<T>, LimitError> {
    consts.validate().map_err(|e| domain(e.to_string()))?;
    if !(efficiency > T::zero() && efficiency <= T::one()) {
        return Err(domain(format!("efficiency {efficiency} outside (0, 1]")));
    }
    if !(n_sigma > T::zero()) {
        return Err(domain(format!("n_sigma must be positive, got {n_sigma}")));
    }
    if !(delta.delta.sigma >= T::zero()) {
        return Err(domain("excess uncertainty must be >= 0"));
    }
    let n_new = compute_n_new(run, consts)?;
    if !(n_new > T::zero()) {
        return Err(domain(format!(
            "run `{}` has zero exposure (no current-on charge); no limit computable",
            run.run_id
        )));
    }
    let n_int = consts.scatterings_per_electron();
    let denominator = n_new * consts.capture_fraction * n_int * efficiency;
    if !(denominator > T::zero()) || !denominator.is_finite() {
        return Err(domain(format!("denominator {denominator} is not positive and finite")));
    }
    let spread = n_sigma * delta.delta.sigma;
    let excess_bound = match convention {
        BoundConvention::Paper => spread,
        BoundConvention::CentralPlusNsigma => (delta.delta.value + spread).max(T::zero()),
    };
    Ok(LimitResult {
        delta: *delta,
        n_new,
        n_int,
        capture_fraction: consts.capture_fraction,
        efficiency,
        denominator,
        n_sigma,
        convention,
        excess_bound,
        beta2_over_2_limit: excess_bound / denominator,
        confidence_label: confidence_label(n_sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{subtract, Measured, Normalized};

    const DAY: f64 = 86_400.0;

    fn published_run() -> RunMeta<f64> {
        RunMeta::current_on("on", 100.0, 34.0 * DAY).unwrap()
    }

    fn published_delta() -> SubtractionResult<f64> {
        subtract(Measured::new(2222.0, 47.0), Normalized::identity(Measured::new(2181.0, 47.0)))
    }

    #[test]
    fn n_new_examples() {
        let c = PhysicsConstants::default();
        // oracle: 100 A · 34 d · 86400 s/d / 1.602e-19 C
        let oracle = 100.0 * 34.0 * 86_400.0 / 1.602e-19;
        let n = compute_n_new(&published_run(), &c).unwrap();
        assert!((n - oracle).abs() / oracle < 1e-12);
        assert!((n / 1.834e27 - 1.0).abs() < 1e-3);
        assert_eq!(compute_n_new(&RunMeta::current_off("off", 10.0).unwrap(), &c).unwrap(), 0.0);
        let one_second = compute_n_new(&RunMeta::current_on("vip", 40.0, 1.0).unwrap(), &c).unwrap();
        assert!((one_second / 2.497e20 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn published_limit() {
        let r = compute_limit(&published_delta(), &published_run(), &PhysicsConstants::default(), 0.01, 3.0, BoundConvention::Paper).unwrap();
        assert!((r.denominator / 4.70e30 - 1.0).abs() < 0.01);
        assert!((r.beta2_over_2_limit / 4.2e-29 - 1.0).abs() < 0.02);
        assert_eq!(r.confidence_label, "99.7% C.L.");
        assert_eq!(r.excess_bound, 3.0 * r.delta.delta.sigma);
    }

    #[test]
    fn central_plus_nsigma_convention() {
        let r = compute_limit(&published_delta(), &published_run(), &PhysicsConstants::default(), 0.01, 3.0, BoundConvention::CentralPlusNsigma).unwrap();
        let spread = 3.0 * r.delta.delta.sigma;
        assert!((r.excess_bound - (41.0 + spread)).abs() < 1e-9);
        assert!((r.beta2_over_2_limit / 5.1e-29 - 1.0).abs() < 0.02);
        let negative = subtract(Measured::new(0.0, 1.0), Normalized::identity(Measured::new(1000.0, 1.0)));
        let r = compute_limit(&negative, &published_run(), &PhysicsConstants::default(), 0.01, 3.0, BoundConvention::CentralPlusNsigma).unwrap();
        assert_eq!(r.beta2_over_2_limit, 0.0);
    }

    #[test]
    fn doubling_efficiency_halves_limit() {
        let c = PhysicsConstants::default();
        let a = compute_limit(&published_delta(), &published_run(), &c, 0.01, 3.0, BoundConvention::Paper).unwrap();
        let b = compute_limit(&published_delta(), &published_run(), &c, 0.02, 3.0, BoundConvention::Paper).unwrap();
        assert_eq!(a.beta2_over_2_limit, 2.0 * b.beta2_over_2_limit);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let c = PhysicsConstants::default();
        for eff in [0.0, -0.1, 1.5] {
            assert!(compute_limit(&published_delta(), &published_run(), &c, eff, 3.0, BoundConvention::Paper).is_err());
        }
        let off = RunMeta::current_off("off", 10.0).unwrap();
        assert!(compute_limit(&published_delta(), &off, &c, 0.01, 3.0, BoundConvention::Paper).is_err());
        let empty = RunMeta::current_on("on", 100.0, 0.0).unwrap();
        assert!(compute_limit(&published_delta(), &empty, &c, 0.01, 3.0, BoundConvention::Paper).is_err());
    }

    #[test]
    fn vip_era_order_of_magnitude() {
        // Assumed CCD-era inputs: 40 A for about one year of current-on
        // running, a 1 % efficiency and an excess uncertainty of ~100 counts.
        // Only the order of magnitude is meaningful.
        let run = RunMeta::current_on("vip", 40.0, 365.0 * DAY).unwrap();
        let delta = subtract(Measured::new(0.0, 75.0), Normalized::identity(Measured::new(0.0, 75.0)));
        let r = compute_limit(&delta, &run, &PhysicsConstants::default(), 0.01, 3.0, BoundConvention::Paper).unwrap();
        assert!(r.beta2_over_2_limit > 1e-29 && r.beta2_over_2_limit < 1e-28, "{}", r.beta2_over_2_limit);
    }

    #[test]
    fn labels() {
        assert_eq!(confidence_label(3.0), "99.7% C.L.");
        assert_eq!(confidence_label(2.0), "95.4% C.L.");
        assert_eq!(confidence_label(1.0f32), "68.3% C.L.");
    }
}
