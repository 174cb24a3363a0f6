//! Physical constants, line tables, detector response and geometry shared by
//! the simulation and analysis stages.
//!
//! Everything here is plain data validated at construction; once built, the
//! values are immutable and can be shared freely across worker threads.

mod constants;
mod geometry;
mod lines;
mod response;
mod run;

pub use constants::PhysicsConstants;
pub use geometry::{DetectorPlane, GeometryConfig, StripGeometry, Vec3};
pub use lines::{default_line_table, EmissionLine, LineTable};
pub use response::{fwhm_to_sigma, sigma_to_fwhm, Digitized, EnergyScale, ResponseModel};
pub use run::RunMeta;

use thiserror::Error;

/// Lower edge of the analysis window for the forbidden transition, in eV.
pub const ROI_LOW_EV: f64 = 7629.0;
/// Upper edge of the analysis window, in eV.
pub const ROI_HIGH_EV: f64 = 7829.0;
/// Energy of the Pauli-forbidden 2p→1s copper transition: the midpoint of the
/// analysis window, about 300 eV below normal Cu Kα.
pub const PEP_FORBIDDEN_EV: f64 = 0.5 * (ROI_LOW_EV + ROI_HIGH_EV);

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown emission line `{0}`")]
    UnknownLine(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> ModelError {
    ModelError::Domain(msg.into())
}
