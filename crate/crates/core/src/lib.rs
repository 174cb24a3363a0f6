//! Toolkit for counting-experiment searches for Pauli-exclusion-violating
//! x-ray transitions in copper: event files, spectrum simulation, detector
//! efficiency, energy calibration, and the upper-limit computation.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod config;
pub mod efficiency;
pub mod event_io;
pub mod limit;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod sim;
mod scalar;

pub use scalar::Real;

pub type Config = config::Config<f64>;
pub type PhysicsConstants = model::PhysicsConstants<f64>;
pub type RunMeta = model::RunMeta<f64>;
pub type ResponseModel = model::ResponseModel<f64>;
pub type GeometryConfig = model::GeometryConfig<f64>;
pub type LineTable = model::LineTable<f64>;
pub type Spectrum = event_io::Spectrum<f64>;
pub type SourceModel = sim::SourceModel<f64>;
pub type InjectionConfig = sim::InjectionConfig<f64>;
pub type SimSetup = sim::SimSetup<f64>;
pub type EfficiencyResult = efficiency::EfficiencyResult<f64>;
pub type CalibrationResult = calibration::CalibrationResult<f64>;
pub type PeakFit = calibration::PeakFit<f64>;
pub type LimitResult = limit::LimitResult<f64>;
pub type SubtractionResult = limit::SubtractionResult<f64>;
