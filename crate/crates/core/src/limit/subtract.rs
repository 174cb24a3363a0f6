use serde::{Deserialize, Serialize};

use super::roi::Measured;
use super::{domain, LimitError};
use crate::Real;

/// Uncertainty treatment when rescaling a count to another live time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    /// σ = √(scaled count), as if the normalized value were itself a Poisson
    /// count. Reproduces the published 2181 ± 47.
    #[default]
    PaperNaive,
    /// σ = (to/from)·√(raw count), the statistically correct propagation.
    Propagated,
}

impl ErrorMode {
    pub fn label(self) -> &'static str {
        match self {
            ErrorMode::PaperNaive => "paper-naive",
            ErrorMode::Propagated => "propagated",
        }
    }
}

/// A count rescaled to a reference live time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalized<T> {
    pub count: Measured<T>,
    pub raw: Measured<T>,
    pub factor: T,
    pub mode: ErrorMode,
}

impl<T: Real> Normalized<T> {
    /// Already on the reference footing.
    pub fn identity(count: Measured<T>) -> Self {
        Self {
            count,
            raw: count,
            factor: T::one(),
            mode: ErrorMode::PaperNaive,
        }
    }
}

pub fn normalize_livetime<T: Real>(raw: Measured<T>, from_s: T, to_s: T, mode: ErrorMode) -> Result<Normalized<T>, LimitError> {
    if !(from_s > T::zero()) {
        return Err(domain(format!("source live time must be positive, got {from_s}")));
    }
    if !(to_s >= T::zero()) {
        return Err(domain(format!("target live time must be >= 0, got {to_s}")));
    }
    let factor = to_s / from_s;
    let value = raw.value * factor;
    let sigma = match mode {
        ErrorMode::PaperNaive => value.max(T::zero()).sqrt(),
        ErrorMode::Propagated => factor * raw.value.max(T::zero()).sqrt(),
    };
    Ok(Normalized {
        count: Measured::new(value, sigma),
        raw,
        factor,
        mode,
    })
}

/// Current-on minus normalized current-off counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtractionResult<T> {
    pub n_on: Measured<T>,
    pub n_off_raw: Measured<T>,
    pub n_off_normalized: Measured<T>,
    pub delta: Measured<T>,
    pub normalization_factor: T,
    pub error_mode: ErrorMode,
}

impl<T: Real> SubtractionResult<T> {
    /// Excess in units of its uncertainty.
    pub fn significance(&self) -> T {
        self.delta.value / self.delta.sigma
    }
}

/// Uncertainties add in quadrature.
pub fn subtract<T: Real>(on: Measured<T>, off: Normalized<T>) -> SubtractionResult<T> {
    let delta = Measured::new(on.value - off.count.value, on.sigma.hypot(off.count.sigma));
    SubtractionResult {
        n_on: on,
        n_off_raw: off.raw,
        n_off_normalized: off.count,
        delta,
        normalization_factor: off.factor,
        error_mode: off.mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: f64 = 86_400.0;

    #[test]
    fn published_off_normalization() {
        let n = normalize_livetime(Measured::poisson(1796.0), 28.0 * DAY, 34.0 * DAY, ErrorMode::PaperNaive).unwrap();
        assert_eq!(n.count.value.round(), 2181.0);
        assert_eq!(n.count.sigma.round(), 47.0);
    }

    #[test]
    fn propagated_normalization() {
        let n = normalize_livetime(Measured::poisson(1796.0), 28.0 * DAY, 34.0 * DAY, ErrorMode::Propagated).unwrap();
        let oracle = 34.0 / 28.0 * 1796f64.sqrt();
        assert!((n.count.sigma - oracle).abs() < 1e-12);
        assert!((n.count.sigma - 51.5).abs() < 0.05);
    }

    #[test]
    fn identity_normalization_both_modes() {
        for mode in [ErrorMode::PaperNaive, ErrorMode::Propagated] {
            let raw = Measured::poisson(123.0);
            let n = normalize_livetime(raw, 5.0, 5.0, mode).unwrap();
            assert_eq!(n.count, raw);
        }
        assert!(normalize_livetime(Measured::poisson(1.0), 0.0, 5.0, ErrorMode::Propagated).is_err());
    }

    #[test]
    fn published_subtraction() {
        let on = Measured::new(2222.0f64, 47.0);
        let off = Normalized::identity(Measured::new(2181.0, 47.0));
        let r = subtract(on, off);
        assert_eq!(r.delta.value, 41.0);
        assert_eq!(r.delta.sigma.round(), 66.0);
    }

    #[test]
    fn self_subtraction_and_quadrature() {
        let x = Measured::new(500.0, 20.0);
        let r = subtract(x, Normalized::identity(x));
        assert_eq!(r.delta.value, 0.0);
        assert!((r.delta.sigma - 20.0 * 2f64.sqrt()).abs() < 1e-12);

        let r = subtract(Measured::new(100.0f64, 10.0), Normalized::identity(Measured::new(50.0, 5.0)));
        assert_eq!(r.delta.value, 50.0);
        assert!((r.delta.sigma - 11.18).abs() < 0.005);
    }
}
