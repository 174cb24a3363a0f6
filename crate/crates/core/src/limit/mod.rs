//! From ROI counts to the upper limit on the violation probability β²/2.
//!
//! The chain is: count both spectra in the analysis window, scale the
//! current-off count to the current-on live time, subtract, and divide an
//! excess bound by the expected signal per unit β²/2:
//!
//! ```text
//! denominator = N_new · capture_fraction · N_int · efficiency
//! N_new = Σ I Δt / e,   N_int = D / μ
//! β²/2 ≤ bound(ΔN) / denominator
//! ```

mod bound;
mod projection;
mod report;
mod reproduce;
mod roi;
mod subtract;

pub use bound::{compute_limit, compute_n_new, confidence_label, BoundConvention, LimitResult};
pub use projection::{project_sensitivity, Projection, SensitivityModel};
pub use report::audit_report;
pub use reproduce::{reproduce_paper, ConstantDiff, PublishedInputs, Reproduction};
pub use roi::{count_roi, Measured, RoiDefinition};
pub use subtract::{normalize_livetime, subtract, ErrorMode, Normalized, SubtractionResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("target unreachable: {0}")]
    Unreachable(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> LimitError {
    LimitError::Domain(msg.into())
}
