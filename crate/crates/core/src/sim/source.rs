use serde::{Deserialize, Serialize};

use super::{domain, SimError};
use crate::model::{EmissionLine, LineTable, PhysicsConstants, ResponseModel, RunMeta, PEP_FORBIDDEN_EV, ROI_HIGH_EV, ROI_LOW_EV, SECONDS_PER_DAY};
use crate::Real;

/// Background ROI rate implied by the published current-off count normalized
/// to the current-on live time: 2181 counts over 34 days.
pub const PUBLISHED_ROI_COUNTS_PER_DAY: f64 = 1796.0 * (34.0 / 28.0) / 34.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSource<T> {
    pub line: EmissionLine<T>,
    pub rate_hz: T,
}

/// `shape = "flat"` or `shape = { exponential = { scale_ev = ... } }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuumShape<T> {
    Flat,
    /// Density proportional to `exp(-E / scale_ev)` within the band.
    Exponential { scale_ev: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Continuum<T> {
    pub shape: ContinuumShape<T>,
    pub rate_hz: T,
    pub low_ev: T,
    pub high_ev: T,
}

impl<T: Real> Continuum<T> {
    pub fn flat(rate_hz: T) -> Self {
        Self {
            shape: ContinuumShape::Flat,
            rate_hz,
            low_ev: T::lit(2000.0),
            high_ev: T::lit(12000.0),
        }
    }

    fn cdf(&self, energy_ev: T) -> T {
        let e = energy_ev.max(self.low_ev).min(self.high_ev);
        match self.shape {
            ContinuumShape::Flat => (e - self.low_ev) / (self.high_ev - self.low_ev),
            ContinuumShape::Exponential { scale_ev } => {
                let f = |x: T| (-(x - self.low_ev) / scale_ev).exp();
                (T::one() - f(e)) / (T::one() - f(self.high_ev))
            }
        }
    }

    /// Energy at cumulative fraction `u`.
    pub fn quantile(&self, u: T) -> T {
        match self.shape {
            ContinuumShape::Flat => self.low_ev + u * (self.high_ev - self.low_ev),
            ContinuumShape::Exponential { scale_ev } => {
                let tail = (-(self.high_ev - self.low_ev) / scale_ev).exp();
                self.low_ev - scale_ev * (T::one() - u * (T::one() - tail)).ln()
            }
        }
    }

    /// Fraction of the continuum emitted inside `[low, high)`, before smearing.
    pub fn fraction_in(&self, low_ev: T, high_ev: T) -> T {
        self.cdf(high_ev) - self.cdf(low_ev)
    }

    fn validate(&self) -> Result<(), SimError> {
        nonnegative("continuum rate", self.rate_hz)?;
        if !(self.low_ev >= T::zero() && self.high_ev > self.low_ev) {
            return Err(domain("continuum band needs 0 <= low < high"));
        }
        if let ContinuumShape::Exponential { scale_ev } = self.shape {
            if !(scale_ev > T::zero()) {
                return Err(domain("continuum scale must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedLine<T> {
    pub line: EmissionLine<T>,
    pub weight: T,
}

/// Ti/Mn fluorescence source; photons are split among lines by weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSource<T> {
    pub rate_hz: T,
    pub lines: Vec<WeightedLine<T>>,
}

impl<T: Real> CalibrationSource<T> {
    /// Equal Ti and Mn yields; within an element Kα and Kβ follow the
    /// relative intensities of the table.
    pub fn ti_mn(rate_hz: T, table: &LineTable<T>) -> Result<Self, SimError> {
        let mut lines = Vec::new();
        for element in ["ti", "mn"] {
            let ka = table.lookup(&format!("{element}_ka"))?;
            let kb = table.lookup(&format!("{element}_kb"))?;
            let total = ka.relative_intensity + kb.relative_intensity;
            for l in [ka, kb] {
                lines.push(WeightedLine {
                    line: l.clone(),
                    weight: T::lit(0.5) * l.relative_intensity / total,
                });
            }
        }
        Ok(Self { rate_hz, lines })
    }

    pub fn total_weight(&self) -> T {
        self.lines.iter().fold(T::zero(), |acc, l| acc + l.weight)
    }

    fn validate(&self) -> Result<(), SimError> {
        nonnegative("calibration rate", self.rate_hz)?;
        for l in &self.lines {
            l.line.validate()?;
            nonnegative("calibration line weight", l.weight)?;
        }
        if self.rate_hz > T::zero() && !(self.total_weight() > T::zero()) {
            return Err(domain("calibration source has rate but no weighted lines"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct MuonSource<T> {
    pub rate_hz: T,
    /// Probability that both veto layers fire on a muon crossing an SDD.
    pub veto_tag_probability: T,
    /// Deposited energy, sampled uniformly; far above the ADC range by default.
    pub deposit_low_ev: T,
    pub deposit_high_ev: T,
    /// Rate of veto triggers without an SDD hit.
    pub veto_only_rate_hz: T,
}

impl<T: Real> Default for MuonSource<T> {
    fn default() -> Self {
        Self {
            rate_hz: T::zero(),
            veto_tag_probability: T::lit(0.95),
            deposit_low_ev: T::lit(1.0e5),
            deposit_high_ev: T::lit(5.0e5),
            veto_only_rate_hz: T::zero(),
        }
    }
}

/// Detected-rate model of everything the SDDs see apart from the signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SourceModel<T> {
    pub lines: Vec<LineSource<T>>,
    pub continuum: Continuum<T>,
    pub calibration: CalibrationSource<T>,
    pub muons: MuonSource<T>,
    /// Additional Cu Kα/Kβ rate per ampere, current-on runs only.
    #[serde(default)]
    pub current_correlated_cu_hz_per_a: T,
}

impl<T: Real> SourceModel<T> {
    pub fn silent() -> Self {
        Self {
            lines: Vec::new(),
            continuum: Continuum::flat(T::zero()),
            calibration: CalibrationSource {
                rate_hz: T::zero(),
                lines: Vec::new(),
            },
            muons: MuonSource::default(),
            current_correlated_cu_hz_per_a: T::zero(),
        }
    }

    /// Cu fluorescence, a 2 Hz Ti/Mn source, cosmic muons, and a flat
    /// continuum tuned so the ROI background matches the published rate.
    pub fn published_default(table: &LineTable<T>, response: &ResponseModel<T>) -> Result<Self, SimError> {
        let cu_ka = table.lookup("cu_ka")?.clone();
        let cu_kb = table.lookup("cu_kb")?.clone();
        let ka_rate = T::lit(0.01);
        let kb_rate = ka_rate * cu_kb.relative_intensity / cu_ka.relative_intensity;
        let mut model = Self {
            lines: vec![
                LineSource { line: cu_ka, rate_hz: ka_rate },
                LineSource { line: cu_kb, rate_hz: kb_rate },
            ],
            continuum: Continuum::flat(T::zero()),
            calibration: CalibrationSource::ti_mn(T::lit(2.0), table)?,
            muons: MuonSource {
                rate_hz: T::lit(0.005),
                ..MuonSource::default()
            },
            current_correlated_cu_hz_per_a: T::zero(),
        };
        model.tune_continuum(response, T::lit(PUBLISHED_ROI_COUNTS_PER_DAY / SECONDS_PER_DAY))?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for l in &self.lines {
            l.line.validate()?;
            nonnegative(&format!("rate of line `{}`", l.line.label), l.rate_hz)?;
        }
        self.continuum.validate()?;
        self.calibration.validate()?;
        let m = &self.muons;
        nonnegative("muon rate", m.rate_hz)?;
        nonnegative("veto-only rate", m.veto_only_rate_hz)?;
        if !(m.veto_tag_probability >= T::zero() && m.veto_tag_probability <= T::one()) {
            return Err(domain(format!("veto_tag_probability {} outside [0, 1]", m.veto_tag_probability)));
        }
        if !(m.deposit_low_ev > T::zero() && m.deposit_high_ev >= m.deposit_low_ev) {
            return Err(domain("muon deposit range needs 0 < low <= high"));
        }
        nonnegative("current-correlated Cu rate", self.current_correlated_cu_hz_per_a)
    }

    /// Expected background rate inside `[low, high)` after Gaussian smearing.
    /// The continuum is counted unsmeared, which is exact for a flat shape
    /// away from its band edges.
    pub fn roi_rate_hz(&self, response: &ResponseModel<T>, current_a: T, low_ev: T, high_ev: T) -> T {
        let sigma = response.sigma_ev();
        let line = |l: &EmissionLine<T>| gaussian_fraction(l.energy_ev, sigma, low_ev, high_ev);
        let mut rate = self.continuum.rate_hz * self.continuum.fraction_in(low_ev, high_ev);
        for l in &self.lines {
            rate += l.rate_hz * line(&l.line);
        }
        let total = self.calibration.total_weight();
        if total > T::zero() {
            for l in &self.calibration.lines {
                rate += self.calibration.rate_hz * l.weight / total * line(&l.line);
            }
        }
        for (l, share) in self.correlated_lines() {
            rate += self.current_correlated_cu_hz_per_a * current_a * share * line(&l.line);
        }
        rate
    }

    /// Sets the continuum rate so the default ROI sees `target_hz` in total.
    pub fn tune_continuum(&mut self, response: &ResponseModel<T>, target_hz: T) -> Result<(), SimError> {
        self.continuum.rate_hz = T::zero();
        let (lo, hi) = (T::lit(ROI_LOW_EV), T::lit(ROI_HIGH_EV));
        let others = self.roi_rate_hz(response, T::zero(), lo, hi);
        let fraction = self.continuum.fraction_in(lo, hi);
        if !(fraction > T::zero()) {
            return Err(domain("continuum band does not cover the ROI"));
        }
        if others > target_hz {
            return Err(domain(format!(
                "line leakage {} Hz already exceeds the ROI target {} Hz",
                others, target_hz
            )));
        }
        self.continuum.rate_hz = (target_hz - others) / fraction;
        Ok(())
    }

    /// Cu lines shared out by their configured rates, used by the
    /// current-correlated term.
    pub(crate) fn correlated_lines(&self) -> Vec<(&LineSource<T>, T)> {
        let cu: Vec<&LineSource<T>> = self.lines.iter().filter(|l| l.line.label.starts_with("cu_")).collect();
        let total = cu.iter().fold(T::zero(), |acc, l| acc + l.rate_hz);
        if !(total > T::zero()) {
            return Vec::new();
        }
        cu.into_iter().map(|l| (l, l.rate_hz / total)).collect()
    }
}

/// What the injected `β²/2` rate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalNormalization {
    /// λ is the expected excess inside the ROI; the emitted photon count is
    /// scaled up by the Gaussian ROI containment.
    #[default]
    RoiCounts,
    /// λ is the number of detected photons, wherever they land.
    DetectedPhotons,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionConfig<T> {
    pub beta2_over_2: T,
    pub enabled: bool,
    #[serde(default)]
    pub normalization: SignalNormalization,
}

impl<T: Real> InjectionConfig<T> {
    pub fn off() -> Self {
        Self {
            beta2_over_2: T::zero(),
            enabled: false,
            normalization: SignalNormalization::default(),
        }
    }

    pub fn at(beta2_over_2: T) -> Self {
        Self {
            beta2_over_2,
            enabled: true,
            normalization: SignalNormalization::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        nonnegative("beta2_over_2", self.beta2_over_2)
    }
}

/// `λ = (β²/2) · (I·Δt/e) · (D/μ) · capture · efficiency`; zero when the
/// current is off or injection is disabled.
pub fn expected_violation_counts<T: Real>(inj: &InjectionConfig<T>, run: &RunMeta<T>, consts: &PhysicsConstants<T>, efficiency: T) -> Result<T, SimError> {
    if !(efficiency > T::zero() && efficiency <= T::one()) {
        return Err(domain(format!("efficiency {efficiency} outside (0, 1]")));
    }
    inj.validate()?;
    run.validate()?;
    consts.validate()?;
    if !inj.enabled || !run.current_on {
        return Ok(T::zero());
    }
    let n_new = run.charge_c() / consts.electron_charge_c;
    Ok(inj.beta2_over_2 * n_new * consts.scatterings_per_electron() * consts.capture_fraction * efficiency)
}

/// Fraction of a Gaussian line at the forbidden energy that lands in the
/// default ROI.
pub fn roi_containment<T: Real>(response: &ResponseModel<T>) -> T {
    gaussian_fraction(T::lit(PEP_FORBIDDEN_EV), response.sigma_ev(), T::lit(ROI_LOW_EV), T::lit(ROI_HIGH_EV))
}

pub(crate) fn gaussian_fraction<T: Real>(mean: T, sigma: T, low: T, high: T) -> T {
    let phi = |x: T| T::lit(0.5) * (T::one() + ((x - mean) / (sigma * T::SQRT_2())).erf());
    phi(high) - phi(low)
}

fn nonnegative<T: Real>(what: &str, value: T) -> Result<(), SimError> {
    if value >= T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{what} must be >= 0, got {value}")))
    }
}
