use serde::{Deserialize, Serialize};

use super::{domain, ModelError};
use crate::Real;

/// `2·sqrt(2·ln 2)`: ratio of FWHM to standard deviation for a Gaussian.
fn fwhm_per_sigma<T: Real>() -> T {
    T::lit(2.0) * (T::lit(2.0) * T::LN_2()).sqrt()
}

pub fn fwhm_to_sigma<T: Real>(fwhm: T) -> Result<T, ModelError> {
    if !(fwhm > T::zero()) || !fwhm.is_finite() {
        return Err(domain(format!("FWHM must be positive, got {fwhm}")));
    }
    Ok(fwhm / fwhm_per_sigma())
}

pub fn sigma_to_fwhm<T: Real>(sigma: T) -> Result<T, ModelError> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(sigma * fwhm_per_sigma())
}

/// Affine channel→energy map: `energy = offset + gain·channel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct EnergyScale<T> {
    pub gain_ev_per_channel: T,
    pub offset_ev: T,
}

impl<T: Real> Default for EnergyScale<T> {
    /// Identity map, 1 eV per channel.
    fn default() -> Self {
        Self {
            gain_ev_per_channel: T::one(),
            offset_ev: T::zero(),
        }
    }
}

impl<T: Real> EnergyScale<T> {
    pub fn new(gain_ev_per_channel: T, offset_ev: T) -> Result<Self, ModelError> {
        let scale = Self {
            gain_ev_per_channel,
            offset_ev,
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.gain_ev_per_channel > T::zero()) || !self.gain_ev_per_channel.is_finite() {
            return Err(domain(format!("gain must be positive, got {}", self.gain_ev_per_channel)));
        }
        if !self.offset_ev.is_finite() {
            return Err(domain("offset must be finite"));
        }
        Ok(())
    }

    pub fn energy_of(&self, channel: T) -> T {
        self.offset_ev + self.gain_ev_per_channel * channel
    }

    /// Fractional channel for an energy; inverse of [`Self::energy_of`].
    pub fn channel_of(&self, energy_ev: T) -> T {
        (energy_ev - self.offset_ev) / self.gain_ev_per_channel
    }
}

/// Result of digitizing one energy deposit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Digitized {
    InRange(u16),
    /// Below channel 0, clamped to 0.
    Underflow,
    /// Above the top channel, clamped to it.
    Overflow(u16),
}

impl Digitized {
    pub fn channel(self) -> u16 {
        match self {
            Digitized::InRange(c) | Digitized::Overflow(c) => c,
            Digitized::Underflow => 0,
        }
    }
}

/// Gaussian detector response with a constant FWHM and an affine ADC scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ResponseModel<T> {
    pub fwhm_at_reference_ev: T,
    pub reference_energy_ev: T,
    #[serde(flatten)]
    pub scale: EnergyScale<T>,
    pub channel_count: u32,
}

impl<T: Real> Default for ResponseModel<T> {
    fn default() -> Self {
        Self {
            fwhm_at_reference_ev: T::lit(200.0),
            reference_energy_ev: T::lit(8040.0),
            scale: EnergyScale::default(),
            channel_count: 16_384,
        }
    }
}

impl<T: Real> ResponseModel<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        fwhm_to_sigma(self.fwhm_at_reference_ev)?;
        if !(self.reference_energy_ev > T::zero()) {
            return Err(domain("reference energy must be positive"));
        }
        self.scale.validate()?;
        if !(2..=1 << 16).contains(&self.channel_count) {
            return Err(domain(format!(
                "channel_count {} outside [2, 65536]",
                self.channel_count
            )));
        }
        Ok(())
    }

    /// Resolution (standard deviation) in eV; energy independent.
    pub fn sigma_ev(&self) -> T {
        self.fwhm_at_reference_ev / fwhm_per_sigma()
    }

    pub fn sigma_channels(&self) -> T {
        self.sigma_ev() / self.scale.gain_ev_per_channel
    }

    pub fn energy_of(&self, channel: u16) -> T {
        self.scale.energy_of(T::lit(f64::from(channel)))
    }

    pub fn top_channel(&self) -> u16 {
        (self.channel_count - 1) as u16
    }

    /// Nearest ADC channel for an energy, clamped to the ADC range.
    pub fn digitize(&self, energy_ev: T) -> Digitized {
        let channel = self.scale.channel_of(energy_ev).round();
        let top = self.top_channel();
        if channel.is_nan() || channel < T::zero() {
            Digitized::Underflow
        } else if channel > T::lit(f64::from(top)) {
            Digitized::Overflow(top)
        } else {
            Digitized::InRange(channel.to_u16().expect("channel within u16"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: bisect for σ such that a Gaussian of that width
    /// drops to one half at ±fwhm/2.
    fn sigma_by_bisection(fwhm: f64) -> f64 {
        let half = fwhm / 2.0;
        let f = |s: f64| (-(half * half) / (2.0 * s * s)).exp() - 0.5;
        let (mut lo, mut hi) = (1e-9 * fwhm, fwhm);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fwhm_examples_match_bisection_oracle() {
        let oracle_200 = sigma_by_bisection(200.0);
        assert!((oracle_200 - 84.932).abs() < 1e-3);
        assert!((fwhm_to_sigma(200.0).unwrap() - oracle_200).abs() < 1e-9);

        let oracle_round = sigma_by_bisection(235.48);
        assert!((oracle_round - 100.0).abs() < 1e-3);
        assert!((fwhm_to_sigma(235.48).unwrap() - oracle_round).abs() < 1e-9);
    }

    #[test]
    fn vanishing_width() {
        let s = fwhm_to_sigma(1e-12).unwrap();
        assert!(s > 0.0 && s < 1e-12);
        assert!(fwhm_to_sigma(0.0).is_err());
        assert!(fwhm_to_sigma(-5.0).is_err());
        assert!(sigma_to_fwhm(0.0).is_err());
    }

    #[test]
    fn f32_conversion() {
        assert!((fwhm_to_sigma(200.0f32).unwrap() - 84.932).abs() < 1e-3);
    }

    #[test]
    fn digitize_clamps() {
        let r = ResponseModel::<f64>::default();
        assert_eq!(r.digitize(-10.0), Digitized::Underflow);
        assert_eq!(r.digitize(1e6), Digitized::Overflow(16_383));
        assert_eq!(r.digitize(8040.4), Digitized::InRange(8040));
        assert_eq!(r.digitize(8040.6), Digitized::InRange(8041));
    }

    #[test]
    fn invalid_response_rejected() {
        let mut r = ResponseModel::<f64>::default();
        r.channel_count = 1;
        assert!(r.validate().is_err());
        let mut r = ResponseModel::<f64>::default();
        r.scale.gain_ev_per_channel = 0.0;
        assert!(r.validate().is_err());
    }

    proptest! {
        #[test]
        fn fwhm_sigma_round_trip(fwhm in 1e-6f64..1e6) {
            let back = sigma_to_fwhm(fwhm_to_sigma(fwhm).unwrap()).unwrap();
            prop_assert!(((back - fwhm) / fwhm).abs() < 1e-12);
        }

        #[test]
        fn channel_energy_round_trip(gain in 0.1f64..10.0, offset in -500.0f64..500.0, channel in 0u16..16_000) {
            let r = ResponseModel { scale: EnergyScale::new(gain, offset).unwrap(), channel_count: 1 << 16, ..Default::default() };
            let energy = r.energy_of(channel);
            prop_assert_eq!(r.digitize(energy), Digitized::InRange(channel));
            let next = r.energy_of(channel + 1);
            prop_assert!(next > energy);
        }

        #[test]
        fn digitization_error_below_half_gain(gain in 0.2f64..10.0, offset in -500.0f64..500.0, energy in 3000.0f64..10_000.0) {
            let r = ResponseModel { scale: EnergyScale::new(gain, offset).unwrap(), channel_count: 1 << 16, ..Default::default() };
            let ch = r.digitize(energy).channel();
            prop_assert!((r.energy_of(ch) - energy).abs() <= gain / 2.0 + 1e-9);
        }
    }
}
