//! Energy calibration from Ti/Mn fluorescence peaks: peak search, Gaussian
//! plus constant fits, and an affine channel-to-energy fit.
//!
//! Fits run in `f64` internally whatever the scalar type of the spectrum.

mod fit;
mod peaks;
mod scale;

pub use fit::{fit_gaussian, fit_gaussian_with_neighbours, FitWindow, PeakFit, MAX_ITERATIONS};
pub use peaks::{find_peaks, PeakCandidate};
pub use scale::{calibrate_spectrum, fit_calibration, CalibrationOptions, CalibrationResult, LineMatch, Residual};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration error: spectrum is empty")]
    EmptySpectrum,
    #[error("calibration error: expected {expected} peaks, found {} at {found:?}", found.len())]
    TooFewPeaks { expected: usize, found: Vec<f64> },
    #[error("fit error: window [{first}, {end}) has {bins} bins, need at least 7")]
    WindowTooSmall { first: usize, end: usize, bins: usize },
    #[error("fit error: window [{first}, {end}) holds {counts} counts, need at least 100")]
    TooFewCounts { first: usize, end: usize, counts: u64 },
    #[error("fit error: no convergence after {iterations} iterations (chi2 {chi2:.4e}, amplitude {amplitude:.4e}, centroid {centroid:.4}, sigma {sigma:.4}, background {background:.4e})")]
    NonConvergence {
        iterations: usize,
        chi2: f64,
        amplitude: f64,
        centroid: f64,
        sigma: f64,
        background: f64,
    },
    #[error("fit error: {0}")]
    InvalidFit(String),
    #[error("calibration error: degenerate fit: {0}")]
    Degenerate(String),
    #[error("calibration error: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
