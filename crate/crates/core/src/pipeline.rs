//! Stage glue shared by the command-line front end and the test suites:
//! event selection and binning, then ROI counting through to the limit.

use std::borrow::Borrow;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::event_io::{histogram, select_events, EventRecord, HistogramMode, Spectrum, SpectrumError, TriggerFilter};
use crate::limit::{compute_limit, count_roi, normalize_livetime, subtract, LimitError, LimitResult, Measured, SubtractionResult};
use crate::model::{PhysicsConstants, RunMeta};
use crate::Real;

/// SDD-triggered events of the configured detectors, after the veto policy.
pub fn selected_spectrum<T, I>(events: I, mode: &HistogramMode<T>, live_time_s: T, analysis: &AnalysisConfig<T>) -> Result<Spectrum<T>, SpectrumError>
where
    T: Real,
    I: IntoIterator,
    I::Item: Borrow<EventRecord>,
{
    let detectors: BTreeSet<u8> = analysis.detectors.iter().copied().collect();
    histogram(select_events(events, TriggerFilter::SDD, analysis.veto_policy), mode, live_time_s, &detectors)
}

/// ROI counts of a current-on/current-off pair and the excess they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiComparison<T> {
    pub on_run: RunMeta<T>,
    pub off_run: RunMeta<T>,
    pub roi_low_ev: T,
    pub roi_high_ev: T,
    pub on_counts: Measured<T>,
    pub off_counts: Measured<T>,
    pub subtraction: SubtractionResult<T>,
}

pub fn compare_roi<T: Real>(
    on: &Spectrum<T>,
    on_run: &RunMeta<T>,
    off: &Spectrum<T>,
    off_run: &RunMeta<T>,
    analysis: &AnalysisConfig<T>,
) -> Result<RoiComparison<T>, LimitError> {
    let on_counts = count_roi(on, &analysis.roi)?;
    let off_counts = count_roi(off, &analysis.roi)?;
    let normalized = normalize_livetime(off_counts, off_run.live_time_s, on_run.live_time_s, analysis.error_mode)?;
    Ok(RoiComparison {
        on_run: on_run.clone(),
        off_run: off_run.clone(),
        roi_low_ev: analysis.roi.low_ev,
        roi_high_ev: analysis.roi.high_ev,
        on_counts,
        off_counts,
        subtraction: subtract(on_counts, normalized),
    })
}

impl<T: Real> RoiComparison<T> {
    pub fn limit(&self, consts: &PhysicsConstants<T>, efficiency: T, analysis: &AnalysisConfig<T>) -> Result<LimitResult<T>, LimitError> {
        compute_limit(&self.subtraction, &self.on_run, consts, efficiency, analysis.n_sigma, analysis.bound_convention)
    }

    pub fn to_text(&self) -> String {
        let f = |x: T| x.as_f64();
        let s = &self.subtraction;
        format!(
            "ROI [{:.0}, {:.0}) eV\n\
             on  run {:<20} live {:>10.0} s  I = {} A  counts {:.0}\n\
             off run {:<20} live {:>10.0} s  counts {:.0}\n\
             off normalized x{:.6} = {:.1} +/- {:.1} ({})\n\
             Delta N = {:.1} +/- {:.1}  ({:.2} sigma)\n",
            f(self.roi_low_ev),
            f(self.roi_high_ev),
            self.on_run.run_id,
            f(self.on_run.live_time_s),
            f(self.on_run.current_a),
            f(self.on_counts.value),
            self.off_run.run_id,
            f(self.off_run.live_time_s),
            f(self.off_counts.value),
            f(s.normalization_factor),
            f(s.n_off_normalized.value),
            f(s.n_off_normalized.sigma),
            s.error_mode.label(),
            f(s.delta.value),
            f(s.delta.sigma),
            f(s.significance()),
        )
    }
}
