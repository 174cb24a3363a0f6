use serde::{Deserialize, Serialize};

use super::{domain, LimitError};
use crate::event_io::{Axis, Spectrum};
use crate::model::{ROI_HIGH_EV, ROI_LOW_EV};
use crate::Real;

/// A value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured<T> {
    pub value: T,
    pub sigma: T,
}

impl<T: Real> Measured<T> {
    pub fn new(value: T, sigma: T) -> Self {
        Self { value, sigma }
    }

    /// Poisson count: σ = √N.
    pub fn poisson(count: T) -> Self {
        Self {
            value: count,
            sigma: count.max(T::zero()).sqrt(),
        }
    }
}

/// Energy window searched for the forbidden transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct RoiDefinition<T> {
    pub low_ev: T,
    pub high_ev: T,
}

impl<T: Real> Default for RoiDefinition<T> {
    /// 7629–7829 eV: one resolution FWHM centred on the forbidden line.
    fn default() -> Self {
        Self {
            low_ev: T::lit(ROI_LOW_EV),
            high_ev: T::lit(ROI_HIGH_EV),
        }
    }
}

impl<T: Real> RoiDefinition<T> {
    pub fn new(low_ev: T, high_ev: T) -> Result<Self, LimitError> {
        if !(low_ev < high_ev) {
            return Err(domain(format!("ROI low {low_ev} must be below high {high_ev}")));
        }
        Ok(Self { low_ev, high_ev })
    }

    pub fn width_ev(&self) -> T {
        self.high_ev - self.low_ev
    }

    pub fn midpoint_ev(&self) -> T {
        T::lit(0.5) * (self.low_ev + self.high_ev)
    }

    pub fn contains(&self, energy_ev: T) -> bool {
        energy_ev >= self.low_ev && energy_ev < self.high_ev
    }
}

/// Sum of the bins whose centres lie in `[low, high)`, with Poisson σ.
pub fn count_roi<T: Real>(spectrum: &Spectrum<T>, roi: &RoiDefinition<T>) -> Result<Measured<T>, LimitError> {
    let (low, high) = match spectrum.axis {
        Axis::Energy { low_ev, high_ev, .. } => (low_ev, high_ev),
        Axis::RawChannel { .. } => return Err(domain("ROI counting needs an energy-axis spectrum")),
    };
    if !(roi.low_ev < roi.high_ev) {
        return Err(domain("ROI low edge must be below high edge"));
    }
    if roi.low_ev < low || roi.high_ev > high {
        return Err(domain(format!(
            "ROI [{}, {}) eV outside spectrum range [{low}, {high}) eV",
            roi.low_ev, roi.high_ev
        )));
    }
    let total: u64 = spectrum
        .counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| roi.contains(spectrum.axis.bin_center(i)))
        .map(|(_, &c)| c)
        .sum();
    Ok(Measured::poisson(T::count(total)))
}
