use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::source::{roi_containment, InjectionConfig, SignalNormalization, SourceModel};
use super::{domain, expected_violation_counts, SimError};
use crate::event_io::{write_run, EventRecord, FormatError, RunHeader, QDC_CHANNELS, SDD_COUNT, TRIGGER_SDD, TRIGGER_VETO_INNER, TRIGGER_VETO_OUTER, VETO_ONLY_SDD_ID};
use crate::model::{Digitized, PhysicsConstants, ResponseModel, RunMeta, PEP_FORBIDDEN_EV, SECONDS_PER_DAY};
use crate::rng::{derive_seed, substream};
use crate::Real;

pub const SLICE_SECONDS: u64 = 86_400;
const NS: u64 = 1_000_000_000;
const QDC_PEDESTAL: u16 = 100;
const TIMING_JITTER_NS: f64 = 100.0;

/// Everything a run needs besides its metadata and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup<T> {
    pub source: SourceModel<T>,
    pub injection: InjectionConfig<T>,
    pub response: ResponseModel<T>,
    pub efficiency: T,
    pub consts: PhysicsConstants<T>,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Signal,
    Calibration,
    Continuum,
    Muons,
    VetoOnly,
    CorrelatedCu,
    Line(usize),
}

impl Kind {
    fn stream_id(&self) -> u64 {
        match self {
            Kind::Signal => 0,
            Kind::Calibration => 1,
            Kind::Continuum => 2,
            Kind::Muons => 3,
            Kind::VetoOnly => 4,
            Kind::CorrelatedCu => 5,
            Kind::Line(i) => 6 + *i as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    name: String,
    kind: Kind,
    expected: f64,
    slice_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    pub name: String,
    pub expected: f64,
    pub sampled: u64,
    /// Events clamped to the top ADC channel.
    pub overflow: u64,
    /// Events clamped to channel 0.
    pub underflow: u64,
}

/// Expected versus sampled counts per source component.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub run_id: String,
    pub seed: u64,
    pub live_time_s: u64,
    pub components: Vec<ComponentReport>,
}

impl GenerationReport {
    pub fn total_sampled(&self) -> u64 {
        self.components.iter().map(|c| c.sampled).sum()
    }

    pub fn total_expected(&self) -> f64 {
        self.components.iter().map(|c| c.expected).sum()
    }

    pub fn component(&self, name: &str) -> Option<&ComponentReport> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("run {}  seed {}  live time {} s\n", self.run_id, self.seed, self.live_time_s);
        out.push_str(&format!("{:<24} {:>14} {:>10} {:>9} {:>9}\n", "component", "expected", "sampled", "overflow", "underflow"));
        for c in &self.components {
            out.push_str(&format!("{:<24} {:>14.1} {:>10} {:>9} {:>9}\n", c.name, c.expected, c.sampled, c.overflow, c.underflow));
        }
        out.push_str(&format!("{:<24} {:>14.1} {:>10}\n", "total", self.total_expected(), self.total_sampled()));
        out
    }
}

/// A fully planned run: per-slice counts are fixed, events are produced on
/// demand by [`RunSimulation::events`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSimulation<T> {
    header: RunHeader,
    seed: u64,
    source: SourceModel<T>,
    response: ResponseModel<T>,
    current_a: T,
    components: Vec<Component>,
    slices: Vec<(u64, u64)>,
}

pub fn simulate_run<T: Real>(setup: &SimSetup<T>, run: &RunMeta<T>, seed: u64) -> Result<RunSimulation<T>, SimError> {
    setup.source.validate()?;
    setup.response.validate()?;
    let lambda = expected_violation_counts(&setup.injection, run, &setup.consts, setup.efficiency)?;
    let emitted = match setup.injection.normalization {
        SignalNormalization::RoiCounts if lambda > T::zero() => lambda / roi_containment(&setup.response),
        _ => lambda,
    };

    let live_s = RunHeader::from_meta(run, 0)?.live_time_s;
    let total_ns = live_s * NS;
    let slice_ns = SLICE_SECONDS * NS;
    let slices: Vec<(u64, u64)> = (0..live_s.div_ceil(SLICE_SECONDS))
        .map(|s| (s * slice_ns, slice_ns.min(total_ns - s * slice_ns)))
        .collect();
    let live = live_s as f64;

    let src = &setup.source;
    let current = if run.current_on { run.current_a } else { T::zero() };
    let mut planned = vec![
        (String::from("pep_signal"), Kind::Signal, emitted.as_f64()),
        ("calibration".into(), Kind::Calibration, src.calibration.rate_hz.as_f64() * live),
        ("continuum".into(), Kind::Continuum, src.continuum.rate_hz.as_f64() * live),
        ("muons".into(), Kind::Muons, src.muons.rate_hz.as_f64() * live),
        ("veto_only".into(), Kind::VetoOnly, src.muons.veto_only_rate_hz.as_f64() * live),
        (
            "cu_current_correlated".into(),
            Kind::CorrelatedCu,
            (src.current_correlated_cu_hz_per_a * current).as_f64() * live,
        ),
    ];
    for (i, l) in src.lines.iter().enumerate() {
        planned.push((l.line.label.clone(), Kind::Line(i), l.rate_hz.as_f64() * live));
    }

    let components = planned
        .into_iter()
        .map(|(name, kind, expected)| {
            let mut rng = substream(seed, kind.stream_id());
            let slice_counts = slices
                .iter()
                .map(|&(_, len)| poisson(&mut rng, expected * len as f64 / total_ns.max(1) as f64))
                .collect();
            Component {
                name,
                kind,
                expected,
                slice_counts,
            }
        })
        .collect::<Vec<_>>();

    let event_count = components.iter().flat_map(|c| &c.slice_counts).sum();
    Ok(RunSimulation {
        header: RunHeader::from_meta(run, event_count)?,
        seed,
        source: setup.source.clone(),
        response: setup.response.clone(),
        current_a: current,
        components,
        slices,
    })
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    } else {
        0
    }
}

struct SliceOutput {
    events: Vec<(u64, u32, u32, EventRecord)>,
    overflow: u64,
    underflow: u64,
}

impl<T: Real> RunSimulation<T> {
    pub fn header(&self) -> &RunHeader {
        &self.header
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> EventStream<'_, T> {
        EventStream {
            sim: self,
            next_slice: 0,
            buffer: Vec::new().into_iter(),
            overflow: vec![0; self.components.len()],
            underflow: vec![0; self.components.len()],
        }
    }

    /// Streams all events into `sink` in the binary run format.
    pub fn write<W: Write>(&self, sink: W) -> Result<GenerationReport, FormatError> {
        let mut stream = self.events();
        write_run(&self.header, &mut stream, sink)?;
        Ok(stream.report())
    }

    fn generate(&self, c: usize, slice: usize) -> SliceOutput {
        let comp = &self.components[c];
        let n = comp.slice_counts[slice];
        let (start, len) = self.slices[slice];
        let mut rng = substream(self.seed, ((comp.kind.stream_id() + 1) << 32) | slice as u64);
        let mut out = SliceOutput {
            events: Vec::with_capacity(n as usize),
            overflow: 0,
            underflow: 0,
        };
        let src = &self.source;
        let cal_total = src.calibration.total_weight();
        let correlated = src.correlated_lines();
        for i in 0..n {
            let ts = start + (rng.random::<f64>() * len as f64) as u64;
            let ts = ts.min(start + len.saturating_sub(1));
            let record = match comp.kind {
                Kind::Signal => self.photon(&mut rng, T::lit(PEP_FORBIDDEN_EV), &mut out),
                Kind::Calibration => {
                    let mut u = T::lit(rng.random::<f64>()) * cal_total;
                    let mut energy = src.calibration.lines.last().expect("validated").line.energy_ev;
                    for l in &src.calibration.lines {
                        if u < l.weight {
                            energy = l.line.energy_ev;
                            break;
                        }
                        u -= l.weight;
                    }
                    self.photon(&mut rng, energy, &mut out)
                }
                Kind::Continuum => {
                    let energy = src.continuum.quantile(T::lit(rng.random::<f64>()));
                    self.photon(&mut rng, energy, &mut out)
                }
                Kind::Line(l) => self.photon(&mut rng, src.lines[l].line.energy_ev, &mut out),
                Kind::CorrelatedCu => {
                    let mut u = T::lit(rng.random::<f64>());
                    let mut energy = correlated.last().expect("planned only with Cu lines").0.line.energy_ev;
                    for (l, share) in &correlated {
                        if u < *share {
                            energy = l.line.energy_ev;
                            break;
                        }
                        u -= *share;
                    }
                    self.photon(&mut rng, energy, &mut out)
                }
                Kind::Muons => {
                    let m = &src.muons;
                    let deposit = m.deposit_low_ev + T::lit(rng.random::<f64>()) * (m.deposit_high_ev - m.deposit_low_ev);
                    let tagged = T::lit(rng.random::<f64>()) < m.veto_tag_probability;
                    let mut record = self.photon(&mut rng, deposit, &mut out);
                    if tagged {
                        record.trigger_flags |= TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER;
                        record.qdc = veto_qdc(&mut rng);
                    }
                    record
                }
                Kind::VetoOnly => EventRecord {
                    timestamp_ns: 0,
                    trigger_flags: TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER,
                    sdd_id: VETO_ONLY_SDD_ID,
                    adc: 0,
                    qdc: veto_qdc(&mut rng),
                    sdd_timing_ns: 0,
                },
            };
            out.events.push((ts, c as u32, i as u32, EventRecord { timestamp_ns: ts, ..record }));
        }
        out
    }

    /// An SDD hit: Gaussian smearing, then digitization with clamping.
    fn photon<R: Rng>(&self, rng: &mut R, energy_ev: T, out: &mut SliceOutput) -> EventRecord {
        let z: f64 = rng.sample(StandardNormal);
        let smeared = energy_ev + self.response.sigma_ev() * T::lit(z);
        let adc = match self.response.digitize(smeared) {
            Digitized::InRange(ch) => ch,
            Digitized::Overflow(top) => {
                out.overflow += 1;
                top
            }
            Digitized::Underflow => {
                out.underflow += 1;
                0
            }
        };
        let sdd_id = rng.random_range(0..SDD_COUNT);
        let jitter: f64 = rng.sample(StandardNormal);
        EventRecord {
            timestamp_ns: 0,
            trigger_flags: TRIGGER_SDD,
            sdd_id,
            adc,
            qdc: [QDC_PEDESTAL; QDC_CHANNELS],
            sdd_timing_ns: (jitter * TIMING_JITTER_NS).round() as i32,
        }
    }

    fn planned_report(&self) -> GenerationReport {
        GenerationReport {
            run_id: self.header.run_id.clone(),
            seed: self.seed,
            live_time_s: self.header.live_time_s,
            components: self
                .components
                .iter()
                .map(|c| ComponentReport {
                    name: c.name.clone(),
                    expected: c.expected,
                    sampled: c.slice_counts.iter().sum(),
                    overflow: 0,
                    underflow: 0,
                })
                .collect(),
        }
    }

    /// Current used for the current-correlated term.
    pub fn current_a(&self) -> T {
        self.current_a
    }
}

fn veto_qdc<R: Rng>(rng: &mut R) -> [u16; QDC_CHANNELS] {
    let mut qdc = [QDC_PEDESTAL; QDC_CHANNELS];
    for q in &mut qdc {
        *q += rng.random_range(200..4000);
    }
    qdc
}

/// Time-ordered events of one run, generated a slice at a time.
pub struct EventStream<'a, T> {
    sim: &'a RunSimulation<T>,
    next_slice: usize,
    buffer: std::vec::IntoIter<EventRecord>,
    overflow: Vec<u64>,
    underflow: Vec<u64>,
}

impl<T: Real> EventStream<'_, T> {
    /// Planned counts plus the clamping tallies of the slices generated so far.
    pub fn report(&self) -> GenerationReport {
        let mut report = self.sim.planned_report();
        for (i, c) in report.components.iter_mut().enumerate() {
            c.overflow = self.overflow[i];
            c.underflow = self.underflow[i];
        }
        report
    }

    fn fill(&mut self) -> bool {
        let sim = self.sim;
        while self.next_slice < sim.slices.len() {
            let slice = self.next_slice;
            self.next_slice += 1;
            let outputs: Vec<SliceOutput> = (0..sim.components.len()).into_par_iter().map(|c| sim.generate(c, slice)).collect();
            let mut events = Vec::with_capacity(outputs.iter().map(|o| o.events.len()).sum());
            for (c, out) in outputs.into_iter().enumerate() {
                self.overflow[c] += out.overflow;
                self.underflow[c] += out.underflow;
                events.extend(out.events);
            }
            if events.is_empty() {
                continue;
            }
            events.sort_unstable_by_key(|&(ts, c, i, _)| (ts, c, i));
            self.buffer = events.into_iter().map(|(_, _, _, e)| e).collect::<Vec<_>>().into_iter();
            return true;
        }
        false
    }
}

impl<T: Real> Iterator for EventStream<'_, T> {
    type Item = EventRecord;

    fn next(&mut self) -> Option<EventRecord> {
        loop {
            if let Some(e) = self.buffer.next() {
                return Some(e);
            }
            if !self.fill() {
                return None;
            }
        }
    }
}

/// A current-on and a current-off run sharing all models; only the on-run
/// carries the injected signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign<T> {
    pub on: RunSimulation<T>,
    pub off: RunSimulation<T>,
}

pub fn simulate_campaign<T: Real>(setup: &SimSetup<T>, on_days: T, off_days: T, current_a: T, seed: u64) -> Result<Campaign<T>, SimError> {
    if !(on_days > T::zero() && off_days > T::zero()) {
        return Err(domain("campaign durations must be positive"));
    }
    let day = T::lit(SECONDS_PER_DAY);
    let on = RunMeta::current_on(format!("sim-{seed}-on"), current_a, on_days * day)?;
    let off = RunMeta::current_off(format!("sim-{seed}-off"), off_days * day)?;
    Ok(Campaign {
        on: simulate_run(setup, &on, derive_seed(seed, 0))?,
        off: simulate_run(setup, &off, derive_seed(seed, 1))?,
    })
}
