//! Synthetic event streams for current-on and current-off runs.
//!
//! A run is generated in one-day time slices. Each (component, slice) pair has
//! its own random substream, and per-slice counts are drawn up front from a
//! per-component count stream, so the header event count is known before any
//! event is produced and enabling one component never perturbs another.

mod generate;
mod source;

pub use generate::{simulate_campaign, simulate_run, Campaign, SimSetup, ComponentReport, EventStream, GenerationReport, RunSimulation, SLICE_SECONDS};
pub use source::{
    expected_violation_counts, roi_containment, CalibrationSource, Continuum, ContinuumShape, InjectionConfig, LineSource, MuonSource, SignalNormalization,
    SourceModel, WeightedLine, PUBLISHED_ROI_COUNTS_PER_DAY,
};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn domain(msg: impl Into<String>) -> SimError {
    SimError::Domain(msg.into())
}
