use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bound::{compute_limit, BoundConvention, LimitResult};
use super::report::audit_report;
use super::roi::Measured;
use super::subtract::{normalize_livetime, subtract, ErrorMode};
use super::LimitError;
use crate::model::{PhysicsConstants, RunMeta, SECONDS_PER_DAY};
use crate::Real;

/// Counting inputs of the published analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PublishedInputs<T> {
    pub n_on: T,
    pub n_off_raw: T,
    pub on_live_days: T,
    pub off_live_days: T,
    pub current_a: T,
    pub efficiency: T,
    pub n_sigma: T,
    pub expected_limit: T,
    /// Allowed relative deviation of the recomputed limit.
    pub limit_tolerance: T,
}

impl<T: Real> Default for PublishedInputs<T> {
    fn default() -> Self {
        Self {
            n_on: T::lit(2222.0),
            n_off_raw: T::lit(1796.0),
            on_live_days: T::lit(34.0),
            off_live_days: T::lit(28.0),
            current_a: T::lit(100.0),
            efficiency: T::lit(0.01),
            n_sigma: T::lit(3.0),
            expected_limit: T::lit(4.2e-29),
            limit_tolerance: T::lit(0.02),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDiff {
    pub name: &'static str,
    pub expected: f64,
    pub configured: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction<T> {
    pub limit: LimitResult<T>,
    pub on_run: RunMeta<T>,
    /// `limit / expected - 1`.
    pub deviation: T,
    pub pass: bool,
    /// Configured values that differ from the published ones.
    pub diffs: Vec<ConstantDiff>,
    pub report: String,
}

fn compare<T: Real>(diffs: &mut Vec<ConstantDiff>, name: &'static str, expected: T, configured: T) {
    let (e, c) = (expected.as_f64(), configured.as_f64());
    if (e - c).abs() > 1e-9 * e.abs().max(c.abs()) {
        diffs.push(ConstantDiff {
            name,
            expected: e,
            configured: c,
        });
    }
}

/// Recomputes the published limit from `inputs` and `consts`, listing every
/// intermediate and any departure from the published constants.
pub fn reproduce_paper<T: Real>(
    inputs: &PublishedInputs<T>,
    consts: &PhysicsConstants<T>,
    error_mode: ErrorMode,
    convention: BoundConvention,
) -> Result<Reproduction<T>, LimitError> {
    let day = T::lit(SECONDS_PER_DAY);
    let on_run = RunMeta::current_on("published-on", inputs.current_a, inputs.on_live_days * day).map_err(|e| LimitError::Domain(e.to_string()))?;
    let off = normalize_livetime(
        Measured::poisson(inputs.n_off_raw),
        inputs.off_live_days * day,
        inputs.on_live_days * day,
        error_mode,
    )?;
    let delta = subtract(Measured::poisson(inputs.n_on), off);
    let limit = compute_limit(&delta, &on_run, consts, inputs.efficiency, inputs.n_sigma, convention)?;

    let published = PublishedInputs::<T>::default();
    let reference = PhysicsConstants::<T>::default();
    let mut diffs = Vec::new();
    compare(&mut diffs, "n_on", published.n_on, inputs.n_on);
    compare(&mut diffs, "n_off_raw", published.n_off_raw, inputs.n_off_raw);
    compare(&mut diffs, "on_live_days", published.on_live_days, inputs.on_live_days);
    compare(&mut diffs, "off_live_days", published.off_live_days, inputs.off_live_days);
    compare(&mut diffs, "current_a", published.current_a, inputs.current_a);
    compare(&mut diffs, "efficiency", published.efficiency, inputs.efficiency);
    compare(&mut diffs, "n_sigma", published.n_sigma, inputs.n_sigma);
    compare(&mut diffs, "electron_charge_c", reference.electron_charge_c, consts.electron_charge_c);
    compare(&mut diffs, "electron_mean_free_path_cm", reference.electron_mean_free_path_cm, consts.electron_mean_free_path_cm);
    compare(&mut diffs, "strip_length_cm", reference.strip_length_cm, consts.strip_length_cm);
    compare(&mut diffs, "capture_fraction", reference.capture_fraction, consts.capture_fraction);
    if error_mode != ErrorMode::PaperNaive {
        diffs.push(ConstantDiff {
            name: "error_mode (paper-naive expected)",
            expected: 0.0,
            configured: 1.0,
        });
    }
    if convention != BoundConvention::Paper {
        diffs.push(ConstantDiff {
            name: "bound_convention (paper expected)",
            expected: 0.0,
            configured: 1.0,
        });
    }

    let deviation = limit.beta2_over_2_limit / inputs.expected_limit - T::one();
    let pass = deviation.abs() <= inputs.limit_tolerance;

    let mut report = audit_report(&limit, &on_run, consts);
    let _ = writeln!(report);
    if diffs.is_empty() {
        let _ = writeln!(report, "inputs match the published values");
    } else {
        let _ = writeln!(report, "inputs differing from the published values:");
        for d in &diffs {
            let _ = writeln!(report, "  {:<36} expected {:<12e} configured {:e}", d.name, d.expected, d.configured);
        }
    }
    let _ = writeln!(
        report,
        "published limit {:.1e}; recomputed {:.4e}; deviation {:+.2}% (tolerance {:.1}%)",
        inputs.expected_limit.as_f64(),
        limit.beta2_over_2_limit.as_f64(),
        100.0 * deviation.as_f64(),
        100.0 * inputs.limit_tolerance.as_f64()
    );
    let _ = writeln!(report, "{}", if pass { "PASS" } else { "FAIL" });
    Ok(Reproduction {
        limit,
        on_run,
        deviation,
        pass,
        diffs,
        report,
    })
}
