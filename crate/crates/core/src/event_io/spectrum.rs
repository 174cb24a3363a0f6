use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::record::{EventRecord, SDD_COUNT};
use crate::model::EnergyScale;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("domain error: histogram needs at least one bin")]
    ZeroBins,
    #[error("domain error: invalid range [{low}, {high})")]
    BadRange { low: f64, high: f64 },
    #[error("cannot merge spectra with different binning")]
    AxisMismatch,
}

/// Binning of a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis<T> {
    /// One bin per ADC channel starting at `first_channel`.
    RawChannel { first_channel: u32, bins: usize },
    /// Uniform bins over `[low_ev, high_ev)`.
    Energy { low_ev: T, high_ev: T, bins: usize },
}

impl<T: Real> Axis<T> {
    pub fn bins(&self) -> usize {
        match *self {
            Axis::RawChannel { bins, .. } | Axis::Energy { bins, .. } => bins,
        }
    }

    /// 1 eV bins over 2–12 keV.
    pub fn default_energy() -> Self {
        Axis::Energy {
            low_ev: T::lit(2000.0),
            high_ev: T::lit(12_000.0),
            bins: 10_000,
        }
    }

    pub fn bin_width(&self) -> T {
        match *self {
            Axis::RawChannel { .. } => T::one(),
            Axis::Energy { low_ev, high_ev, bins } => (high_ev - low_ev) / T::count(bins as u64),
        }
    }

    pub fn bin_center(&self, i: usize) -> T {
        match *self {
            Axis::RawChannel { first_channel, .. } => T::lit(f64::from(first_channel) + i as f64),
            Axis::Energy { low_ev, .. } => low_ev + self.bin_width() * (T::count(i as u64) + T::lit(0.5)),
        }
    }

    fn validate(&self) -> Result<(), SpectrumError> {
        if self.bins() == 0 {
            return Err(SpectrumError::ZeroBins);
        }
        if let Axis::Energy { low_ev, high_ev, .. } = *self {
            if !(low_ev < high_ev) || !low_ev.is_finite() || !high_ev.is_finite() {
                return Err(SpectrumError::BadRange {
                    low: low_ev.as_f64(),
                    high: high_ev.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// How events are placed on the axis.
#[derive(Debug, Clone, PartialEq)]
pub enum HistogramMode<T> {
    RawChannel { first_channel: u32, bins: usize },
    /// Channels converted with a calibration before binning.
    Energy {
        scale: EnergyScale<T>,
        low_ev: T,
        high_ev: T,
        bins: usize,
    },
}

impl<T: Real> HistogramMode<T> {
    pub fn energy(scale: EnergyScale<T>) -> Self {
        match Axis::<T>::default_energy() {
            Axis::Energy { low_ev, high_ev, bins } => HistogramMode::Energy {
                scale,
                low_ev,
                high_ev,
                bins,
            },
            Axis::RawChannel { .. } => unreachable!(),
        }
    }

    /// Full 16-bit ADC range, one bin per channel.
    pub fn raw() -> Self {
        HistogramMode::RawChannel {
            first_channel: 0,
            bins: 1 << 16,
        }
    }

    fn axis(&self) -> Axis<T> {
        match *self {
            HistogramMode::RawChannel { first_channel, bins } => Axis::RawChannel { first_channel, bins },
            HistogramMode::Energy { low_ev, high_ev, bins, .. } => Axis::Energy { low_ev, high_ev, bins },
        }
    }
}

/// Binned counts with exposure and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub axis: Axis<T>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// Events outside the detector selection, including veto-only records.
    pub skipped: u64,
    pub live_time_s: T,
    pub detector_selection: BTreeSet<u8>,
    /// Sorted list of contributing run ids.
    pub run_ids: Vec<String>,
}

impl<T: Real> Spectrum<T> {
    pub fn empty(axis: Axis<T>, live_time_s: T) -> Result<Self, SpectrumError> {
        axis.validate()?;
        Ok(Self {
            counts: vec![0; axis.bins()],
            axis,
            underflow: 0,
            overflow: 0,
            skipped: 0,
            live_time_s,
            detector_selection: (0..SDD_COUNT).collect(),
            run_ids: Vec::new(),
        })
    }

    pub fn with_run_id(mut self, run_id: impl Into<String>) -> Self {
        self.run_ids.push(run_id.into());
        self.run_ids.sort();
        self
    }

    pub fn with_detectors(mut self, detectors: impl IntoIterator<Item = u8>) -> Self {
        self.detector_selection = detectors.into_iter().collect();
        self
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Binned plus underflow and overflow entries.
    pub fn entries(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }

    fn place(&mut self, position: T) {
        let bins = self.counts.len();
        let index = match self.axis {
            Axis::RawChannel { first_channel, .. } => (position - T::lit(f64::from(first_channel))).floor(),
            Axis::Energy { low_ev, .. } => ((position - low_ev) / self.axis.bin_width()).floor(),
        };
        if index < T::zero() {
            self.underflow += 1;
        } else if index >= T::count(bins as u64) {
            self.overflow += 1;
        } else {
            let i = index.to_usize().expect("index in range");
            self.counts[i] += 1;
        }
    }

    /// Adds bin contents and exposure of a spectrum with identical binning.
    /// Commutative and associative.
    pub fn merge(&self, other: &Self) -> Result<Self, SpectrumError> {
        if self.axis != other.axis {
            return Err(SpectrumError::AxisMismatch);
        }
        let mut run_ids: Vec<String> = self.run_ids.iter().chain(&other.run_ids).cloned().collect();
        run_ids.sort();
        Ok(Self {
            axis: self.axis.clone(),
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
            underflow: self.underflow + other.underflow,
            overflow: self.overflow + other.overflow,
            skipped: self.skipped + other.skipped,
            live_time_s: self.live_time_s + other.live_time_s,
            detector_selection: self.detector_selection.union(&other.detector_selection).copied().collect(),
            run_ids,
        })
    }

    /// Two-column text (bin center, counts) behind a `#` metadata header.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let axis = match self.axis {
            Axis::RawChannel { .. } => "channel",
            Axis::Energy { .. } => "energy_ev",
        };
        let detectors: Vec<String> = self.detector_selection.iter().map(u8::to_string).collect();
        let _ = writeln!(out, "# axis = {axis}");
        let _ = writeln!(out, "# bins = {}", self.counts.len());
        let _ = writeln!(out, "# live_time_s = {}", self.live_time_s);
        let _ = writeln!(out, "# run_ids = {}", self.run_ids.join(","));
        let _ = writeln!(out, "# detectors = {}", detectors.join(","));
        let _ = writeln!(out, "# underflow = {}", self.underflow);
        let _ = writeln!(out, "# overflow = {}", self.overflow);
        let _ = writeln!(out, "# skipped = {}", self.skipped);
        let _ = writeln!(out, "# {axis} counts");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{} {c}", self.axis.bin_center(i));
        }
        out
    }
}

/// Fills a spectrum from SDD events of the selected detectors; each accepted
/// event lands in exactly one bin or in the underflow/overflow tallies.
pub fn histogram<T, I>(events: I, mode: &HistogramMode<T>, live_time_s: T, detectors: &BTreeSet<u8>) -> Result<Spectrum<T>, SpectrumError>
where
    T: Real,
    I: IntoIterator,
    I::Item: Borrow<EventRecord>,
{
    if let HistogramMode::Energy { scale, .. } = mode {
        scale.validate().map_err(|_| SpectrumError::BadRange {
            low: scale.offset_ev.as_f64(),
            high: scale.gain_ev_per_channel.as_f64(),
        })?;
    }
    let mut spectrum = Spectrum::empty(mode.axis(), live_time_s)?.with_detectors(detectors.iter().copied());
    for event in events {
        let event = event.borrow();
        if !event.has_sdd() || !detectors.contains(&event.sdd_id) {
            spectrum.skipped += 1;
            continue;
        }
        let channel = T::lit(f64::from(event.adc));
        let position = match mode {
            HistogramMode::RawChannel { .. } => channel,
            HistogramMode::Energy { scale, .. } => scale.energy_of(channel),
        };
        spectrum.place(position);
    }
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::{select_events, TriggerFilter, VetoPolicy, QDC_CHANNELS, TRIGGER_SDD, TRIGGER_VETO_INNER, TRIGGER_VETO_OUTER, VETO_ONLY_SDD_ID};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sdd_event(adc: u16, sdd: u8) -> EventRecord {
        EventRecord {
            timestamp_ns: 0,
            trigger_flags: TRIGGER_SDD,
            sdd_id: sdd,
            adc,
            qdc: [0; QDC_CHANNELS],
            sdd_timing_ns: 0,
        }
    }

    fn all() -> BTreeSet<u8> {
        (0..6).collect()
    }

    fn unit_energy() -> HistogramMode<f64> {
        HistogramMode::energy(EnergyScale::new(1.0, 0.0).unwrap())
    }

    #[test]
    fn no_events_all_zero() {
        let s = histogram(Vec::<EventRecord>::new(), &unit_energy(), 1.0, &all()).unwrap();
        assert_eq!(s.counts.len(), 10_000);
        assert_eq!(s.entries(), 0);
    }

    #[test]
    fn zero_bins_rejected() {
        let mode = HistogramMode::Energy { scale: EnergyScale::new(1.0, 0.0).unwrap(), low_ev: 0.0, high_ev: 1.0, bins: 0 };
        assert_eq!(histogram(Vec::<EventRecord>::new(), &mode, 1.0, &all()), Err(SpectrumError::ZeroBins));
    }

    #[test]
    fn single_event_lands_in_calibrated_bin() {
        let scale = EnergyScale::new(2.5, -300.0).unwrap();
        let mode = HistogramMode::energy(scale);
        let s = histogram([sdd_event(3000, 2)], &mode, 1.0, &all()).unwrap();
        let energy: f64 = -300.0 + 2.5 * 3000.0;
        let bin = s.counts.iter().position(|&c| c == 1).unwrap();
        let center = s.axis.bin_center(bin);
        assert!((center - energy).abs() <= 0.5);
        assert_eq!(s.entries(), 1);
    }

    #[test]
    fn out_of_range_and_skipped_tallies() {
        let veto_only = EventRecord { trigger_flags: TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER, sdd_id: VETO_ONLY_SDD_ID, ..sdd_event(0, 0) };
        let events = [sdd_event(100, 0), sdd_event(60_000, 1), sdd_event(5000, 3), veto_only];
        let s = histogram(&events, &unit_energy(), 1.0, &[0, 1, 2].into_iter().collect()).unwrap();
        assert_eq!((s.underflow, s.overflow, s.skipped, s.in_range()), (1, 1, 2, 0));
    }

    #[test]
    fn uniform_fill_is_poisson_flat() {
        // 1e5 events uniform over 100 bins: every bin within 5σ of 1000
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let events: Vec<_> = (0..100_000).map(|_| sdd_event(rng.random_range(1000..2000), 0)).collect();
        let mode = HistogramMode::Energy { scale: EnergyScale::new(1.0, 0.0).unwrap(), low_ev: 1000.0, high_ev: 2000.0, bins: 100 };
        let s = histogram(&events, &mode, 1.0, &all()).unwrap();
        for &c in &s.counts {
            assert!((c as f64 - 1000.0).abs() < 5.0 * 1000f64.sqrt(), "bin count {c}");
        }
        assert_eq!(s.entries(), 100_000);
    }

    #[test]
    fn merge_requires_same_axis() {
        let a = Spectrum::<f64>::empty(Axis::default_energy(), 1.0).unwrap();
        let b = Spectrum::<f64>::empty(Axis::RawChannel { first_channel: 0, bins: 10 }, 1.0).unwrap();
        assert_eq!(a.merge(&b), Err(SpectrumError::AxisMismatch));
    }

    #[test]
    fn text_export() {
        let s = histogram([sdd_event(0, 0)], &HistogramMode::RawChannel { first_channel: 0, bins: 3 }, 10.0, &all())
            .unwrap()
            .with_run_id("r1");
        let text = s.to_text();
        assert!(text.starts_with("# axis = channel\n"));
        assert!(text.contains("# run_ids = r1\n"));
        assert!(text.ends_with("0 1\n1 0\n2 0\n"));
    }

    fn arb_spectrum() -> impl Strategy<Value = Spectrum<f64>> {
        (prop::collection::vec(0u64..1000, 8), 0u64..10, 0u64..10, 0u32..1000, prop::collection::vec("[a-c]", 0..3), prop::collection::btree_set(0u8..6, 0..6))
            .prop_map(|(counts, under, over, live, ids, dets)| {
                let mut s = Spectrum::empty(Axis::RawChannel { first_channel: 0, bins: 8 }, f64::from(live)).unwrap().with_detectors(dets);
                s.counts = counts;
                s.underflow = under;
                s.overflow = over;
                for id in ids {
                    s = s.with_run_id(id);
                }
                s
            })
    }

    proptest! {
        #[test]
        fn merge_commutative_associative(a in arb_spectrum(), b in arb_spectrum(), c in arb_spectrum()) {
            prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
            prop_assert_eq!(a.merge(&b).unwrap().merge(&c).unwrap(), a.merge(&b.merge(&c).unwrap()).unwrap());
            let m = a.merge(&b).unwrap();
            prop_assert_eq!(m.live_time_s, a.live_time_s + b.live_time_s);
        }

        #[test]
        fn entries_conserved_under_every_policy(raw in prop::collection::vec((any::<u16>(), 0u8..6, 0u8..8), 0..300)) {
            let events: Vec<_> = raw.iter().map(|&(adc, sdd, flags)| EventRecord { trigger_flags: flags | TRIGGER_SDD, ..sdd_event(adc, sdd) }).collect();
            for policy in [VetoPolicy::KeepAll, VetoPolicy::RejectVetoCoincidence] {
                let selected: Vec<_> = select_events(&events, TriggerFilter::SDD, policy).collect();
                let s = histogram(selected.iter().copied(), &unit_energy(), 1.0, &all()).unwrap();
                prop_assert_eq!(s.entries(), selected.len() as u64);
                prop_assert_eq!(s.skipped, 0);
            }
        }
    }
}
