use serde::{Deserialize, Serialize};

use super::{domain, ModelError};
use crate::Real;

/// Constants entering the violation-rate model and the photon transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PhysicsConstants<T> {
    /// Elementary charge `e`.
    pub electron_charge_c: T,
    /// Electron mean free path `μ` in copper.
    pub electron_mean_free_path_cm: T,
    /// Conductor length `D`.
    pub strip_length_cm: T,
    /// Photon attenuation length in copper near 8 keV.
    pub cu_attenuation_length_cm: T,
    /// Photon attenuation length in silicon near 8 keV.
    pub si_attenuation_length_cm: T,
    pub sdd_thickness_cm: T,
    /// Lower bound on the capture probability relative to the scattering
    /// probability; used as an equality, which gives the weakest signal.
    pub capture_fraction: T,
}

impl<T: Real> Default for PhysicsConstants<T> {
    fn default() -> Self {
        Self {
            electron_charge_c: T::lit(1.602e-19),
            electron_mean_free_path_cm: T::lit(3.9e-6),
            strip_length_cm: T::lit(10.0),
            cu_attenuation_length_cm: T::lit(2.1e-3),
            si_attenuation_length_cm: T::lit(7.0e-3),
            sdd_thickness_cm: T::lit(0.045),
            capture_fraction: T::lit(0.1),
        }
    }
}

impl<T: Real> PhysicsConstants<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("electron_charge_c", self.electron_charge_c),
            ("electron_mean_free_path_cm", self.electron_mean_free_path_cm),
            ("strip_length_cm", self.strip_length_cm),
            ("cu_attenuation_length_cm", self.cu_attenuation_length_cm),
            ("si_attenuation_length_cm", self.si_attenuation_length_cm),
            ("sdd_thickness_cm", self.sdd_thickness_cm),
        ];
        for (name, value) in positive {
            if !(value > T::zero() && value.is_finite()) {
                return Err(domain(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.capture_fraction > T::zero() && self.capture_fraction <= T::one()) {
            return Err(domain(format!(
                "capture_fraction {} outside (0, 1]",
                self.capture_fraction
            )));
        }
        Ok(())
    }

    /// Minimum number of lattice scatterings per electron, `D / μ`.
    pub fn scatterings_per_electron(&self) -> T {
        self.strip_length_cm / self.electron_mean_free_path_cm
    }
}
