//! Monte Carlo estimate of the detection efficiency factor: probability that a
//! Cu Kα photon born uniformly inside the strip escapes the copper, reaches an
//! SDD, and is absorbed in its silicon.
//!
//! Transport is straight-line at a single energy with exponential attenuation;
//! there is no scattering.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GeometryConfig, PhysicsConstants, StripGeometry, Vec3};
use crate::rng::substream;
use crate::Real;

pub const MIN_SAMPLES: u64 = 10_000;
const BATCH: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EfficiencyError {
    #[error("domain error: need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(u64),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission<T> {
    pub position: Vec3<T>,
    pub direction: Vec3<T>,
}

/// Uniform point in the strip volume with an isotropic direction.
pub fn sample_emission<T: Real, R: Rng + ?Sized>(geometry: &GeometryConfig<T>, rng: &mut R) -> Emission<T> {
    let s = &geometry.strip;
    let lo = s.lower_corner();
    let u = |rng: &mut R| T::lit(rng.random::<f64>());
    let position = Vec3::new(
        lo.x + s.length_cm * u(rng),
        lo.y + s.width_cm * u(rng),
        lo.z + s.thickness_cm * u(rng),
    );
    Emission {
        position,
        direction: isotropic(rng),
    }
}

pub fn isotropic<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Vec3<T> {
    let cos_theta = T::lit(2.0 * rng.random::<f64>() - 1.0);
    let phi = T::lit(std::f64::consts::TAU * rng.random::<f64>());
    let sin_theta = (T::one() - cos_theta * cos_theta).max(T::zero()).sqrt();
    Vec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
}

/// Path length inside the strip along the ray and the point where it leaves.
pub fn exit_ray<T: Real>(point: Vec3<T>, direction: Vec3<T>, strip: &StripGeometry<T>) -> (T, Vec3<T>) {
    let lo = strip.lower_corner();
    let hi = strip.upper_corner();
    let axis = |p: T, d: T, lo: T, hi: T| {
        if d > T::zero() {
            ((hi - p) / d).max(T::zero())
        } else if d < T::zero() {
            ((lo - p) / d).max(T::zero())
        } else {
            T::infinity()
        }
    };
    let distance = axis(point.x, direction.x, lo.x, hi.x)
        .min(axis(point.y, direction.y, lo.y, hi.y))
        .min(axis(point.z, direction.z, lo.z, hi.z));
    (distance, point + direction * distance)
}

/// `exp(-path / λ_Cu)` along the straight ray to the strip surface.
pub fn transmission_probability<T: Real>(point: Vec3<T>, direction: Vec3<T>, geometry: &GeometryConfig<T>, consts: &PhysicsConstants<T>) -> T {
    let (distance, _) = exit_ray(point, direction, &geometry.strip);
    (-distance / consts.cu_attenuation_length_cm).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorHit<T> {
    pub detector: usize,
    pub distance: T,
    pub cos_incidence: T,
}

/// Nearest SDD struck by the ray leaving the strip surface, if any.
pub fn accepts<T: Real>(exit_point: Vec3<T>, direction: Vec3<T>, geometry: &GeometryConfig<T>) -> Option<DetectorHit<T>> {
    geometry
        .detectors
        .iter()
        .enumerate()
        .filter_map(|(detector, plane)| {
            plane.intersect(exit_point, direction).map(|(distance, cos_incidence)| DetectorHit {
                detector,
                distance,
                cos_incidence,
            })
        })
        .min_by(|a, b| a.distance.partial_cmp(&b.distance).expect("finite distances"))
}

/// Probability of photoabsorption in the SDD for a given incidence cosine.
pub fn absorption_probability<T: Real>(cos_incidence: T, consts: &PhysicsConstants<T>) -> T {
    let path = consts.sdd_thickness_cm / cos_incidence.abs();
    T::one() - (-path / consts.si_attenuation_length_cm).exp()
}

/// Mean factors of the three stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown<T> {
    /// Mean escape probability over all emissions.
    pub transmission: T,
    /// Fraction of emissions whose exit ray strikes a detector.
    pub acceptance: T,
    /// Mean absorption probability over accepted rays.
    pub absorption: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult<T> {
    pub efficiency: T,
    /// One-sigma statistical uncertainty of `efficiency`.
    pub mc_uncertainty: T,
    pub samples: u64,
    pub breakdown: Breakdown<T>,
    /// Contribution of each detector to `efficiency`.
    pub per_detector: Vec<T>,
}

impl<T: Real> EfficiencyResult<T> {
    pub fn relative_uncertainty(&self) -> T {
        self.mc_uncertainty / self.efficiency
    }

    /// `(product of stage means, comonotone upper bound)`. The joint estimate
    /// lies between them when escape and acceptance are positively correlated.
    pub fn correlation_bounds(&self) -> (T, T) {
        let b = self.breakdown;
        (
            b.transmission * b.acceptance * b.absorption,
            b.transmission.min(b.acceptance) * b.absorption,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("efficiency = {:e}\n", self.efficiency.as_f64()));
        out.push_str(&format!("mc_uncertainty = {:e}\n", self.mc_uncertainty.as_f64()));
        out.push_str(&format!("samples = {}\n", self.samples));
        out.push_str(&format!("transmission = {:e}\n", self.breakdown.transmission.as_f64()));
        out.push_str(&format!("acceptance = {:e}\n", self.breakdown.acceptance.as_f64()));
        out.push_str(&format!("absorption = {:e}\n", self.breakdown.absorption.as_f64()));
        for (i, e) in self.per_detector.iter().enumerate() {
            out.push_str(&format!("detector_{i} = {:e}\n", e.as_f64()));
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    n: u64,
    weight: f64,
    weight_sq: f64,
    transmission: f64,
    hits: u64,
    absorption: f64,
    per_detector: Vec<f64>,
}

impl Tally {
    fn combine(mut self, other: Tally) -> Tally {
        self.n += other.n;
        self.weight += other.weight;
        self.weight_sq += other.weight_sq;
        self.transmission += other.transmission;
        self.hits += other.hits;
        self.absorption += other.absorption;
        if self.per_detector.len() < other.per_detector.len() {
            self.per_detector.resize(other.per_detector.len(), 0.0);
        }
        for (a, b) in self.per_detector.iter_mut().zip(other.per_detector) {
            *a += b;
        }
        self
    }
}

fn run_batch<T: Real>(geometry: &GeometryConfig<T>, consts: &PhysicsConstants<T>, n: u64, seed: u64, batch: u64) -> Tally {
    let mut rng = substream(seed, batch);
    let mut tally = Tally {
        per_detector: vec![0.0; geometry.detector_count()],
        ..Tally::default()
    };
    for _ in 0..n {
        let e = sample_emission(geometry, &mut rng);
        let (distance, exit) = exit_ray(e.position, e.direction, &geometry.strip);
        let t = (-distance / consts.cu_attenuation_length_cm).exp().as_f64();
        tally.n += 1;
        tally.transmission += t;
        if let Some(hit) = accepts(exit, e.direction, geometry) {
            let a = absorption_probability(hit.cos_incidence, consts).as_f64();
            let w = t * a;
            tally.hits += 1;
            tally.absorption += a;
            tally.weight += w;
            tally.weight_sq += w * w;
            tally.per_detector[hit.detector] += w;
        }
    }
    tally
}

/// Efficiency as the sample mean of `transmission × hit × absorption`.
/// Batches run in parallel on independent substreams and are reduced in
/// batch order, so the result depends only on `seed` and `samples`.
pub fn run_efficiency<T: Real>(geometry: &GeometryConfig<T>, consts: &PhysicsConstants<T>, samples: u64, seed: u64) -> Result<EfficiencyResult<T>, EfficiencyError> {
    if samples < MIN_SAMPLES {
        return Err(EfficiencyError::TooFewSamples(samples));
    }
    consts.validate()?;
    let batches = samples.div_ceil(BATCH);
    let tallies: Vec<Tally> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let n = BATCH.min(samples - b * BATCH);
            run_batch(geometry, consts, n, seed, b)
        })
        .collect();
    let total = tallies.into_iter().fold(
        Tally {
            per_detector: vec![0.0; geometry.detector_count()],
            ..Tally::default()
        },
        Tally::combine,
    );
    let n = total.n as f64;
    let mean = total.weight / n;
    let variance = (total.weight_sq / n - mean * mean).max(0.0);
    let absorption = if total.hits > 0 { total.absorption / total.hits as f64 } else { 0.0 };
    Ok(EfficiencyResult {
        efficiency: T::lit(mean),
        mc_uncertainty: T::lit((variance / n).sqrt()),
        samples: total.n,
        breakdown: Breakdown {
            transmission: T::lit(total.transmission / n),
            acceptance: T::lit(total.hits as f64 / n),
            absorption: T::lit(absorption),
        },
        per_detector: total.per_detector.into_iter().map(|w| T::lit(w / n)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DetectorPlane;

    fn geometry() -> GeometryConfig<f64> {
        GeometryConfig::default_layout()
    }

    #[test]
    fn emission_depth_uniform() {
        let g = geometry();
        let mut rng = substream(1, 0);
        let n = 1_000_000;
        let t = g.strip.thickness_cm;
        let mean: f64 = (0..n).map(|_| sample_emission(&g, &mut rng).position.z).sum::<f64>() / n as f64;
        let sigma = t / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - t / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn isotropic_directions() {
        let g = geometry();
        let mut rng = substream(2, 0);
        let n = 1_000_000;
        let mut sum_z = 0.0;
        for _ in 0..n {
            let d = sample_emission(&g, &mut rng).direction;
            assert!((d.norm() - 1.0).abs() < 1e-12);
            sum_z += d.z;
        }
        // var(cos θ) = 1/3
        assert!((sum_z / n as f64).abs() < 4.0 * (1.0 / 3.0f64 / n as f64).sqrt());
    }

    #[test]
    fn zero_thickness_strip() {
        let mut g = geometry();
        g.strip.thickness_cm = 0.0;
        let mut rng = substream(3, 0);
        assert!((0..1000).all(|_| sample_emission(&g, &mut rng).position.z == 0.0));
    }

    #[test]
    fn transmission_examples() {
        let g = geometry();
        let c = PhysicsConstants::default();
        let up = Vec3::new(0.0, 0.0, 1.0);
        let surface = Vec3::new(5.0, 0.0, g.strip.thickness_cm);
        assert_eq!(transmission_probability(surface, up, &g, &c), 1.0);
        let lambda = c.cu_attenuation_length_cm;
        let deep = Vec3::new(5.0, 0.0, g.strip.thickness_cm - lambda);
        assert!((transmission_probability(deep, up, &g, &c) - (-1.0f64).exp()).abs() < 1e-12);
        let d = 0.3 * lambda;
        let p = Vec3::new(5.0, 0.0, d);
        assert!((transmission_probability(p, -up, &g, &c) - (-0.3f64).exp()).abs() < 1e-12);
    }

    fn single(plane: DetectorPlane<f64>) -> GeometryConfig<f64> {
        GeometryConfig {
            strip: geometry().strip,
            detectors: vec![plane],
        }
    }

    #[test]
    fn half_space_detector_accepts_half() {
        let g = single(DetectorPlane {
            center_cm: Vec3::new(0.0, 0.0, 1.0),
            normal: Vec3::new(0.0, 0.0, -1.0),
            width_axis: Vec3::new(1.0, 0.0, 0.0),
            width_cm: 1e7,
            height_cm: 1e7,
        });
        let mut rng = substream(4, 0);
        let n = 200_000;
        let origin = Vec3::new(0.0, 0.0, 0.0);
        let hits = (0..n).filter(|_| accepts(origin, isotropic(&mut rng), &g).is_some()).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn zero_area_never_accepts() {
        let g = single(DetectorPlane {
            center_cm: Vec3::new(0.0, 0.0, 1.0),
            normal: Vec3::new(0.0, 0.0, -1.0),
            width_axis: Vec3::new(1.0, 0.0, 0.0),
            width_cm: 0.0,
            height_cm: 5.0,
        });
        let mut rng = substream(5, 0);
        let origin = Vec3::new(0.0, 0.0, 0.0);
        assert!((0..10_000).all(|_| accepts(origin, isotropic(&mut rng), &g).is_none()));
        assert!(accepts(origin, Vec3::new(0.0, 0.0, 1.0), &g).is_none());
    }

    #[test]
    fn small_detector_solid_angle() {
        let (r, side) = (5.0, 0.5);
        let g = single(DetectorPlane {
            center_cm: Vec3::new(0.0, 0.0, r),
            normal: Vec3::new(0.0, 0.0, -1.0),
            width_axis: Vec3::new(1.0, 0.0, 0.0),
            width_cm: side,
            height_cm: side,
        });
        let oracle = side * side / (4.0 * std::f64::consts::PI * r * r);
        let mut rng = substream(6, 0);
        let n = 4_000_000;
        let origin = Vec3::new(0.0, 0.0, 0.0);
        let hits = (0..n).filter(|_| accepts(origin, isotropic(&mut rng), &g).is_some()).count();
        let p = hits as f64 / n as f64;
        let sigma = (oracle / n as f64).sqrt();
        // small-area approximation is good to ~0.5 % here
        assert!((p - oracle).abs() < 4.0 * sigma + 0.005 * oracle, "{p} vs {oracle}");
    }

    #[test]
    fn nearest_detector_wins() {
        let near = DetectorPlane {
            center_cm: Vec3::new(0.0, 0.0, 1.0),
            normal: Vec3::new(0.0, 0.0, -1.0),
            width_axis: Vec3::new(1.0, 0.0, 0.0),
            width_cm: 1.0,
            height_cm: 1.0,
        };
        let far = DetectorPlane { center_cm: Vec3::new(0.0, 0.0, 2.0), ..near.clone() };
        let g = GeometryConfig { strip: geometry().strip, detectors: vec![far, near] };
        let hit = accepts(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), &g).unwrap();
        assert_eq!(hit.detector, 1);
    }

    #[test]
    fn normal_incidence_absorption() {
        let c = PhysicsConstants::default();
        let a = absorption_probability(1.0, &c);
        let oracle = 1.0 - (-0.045f64 / 0.007).exp();
        assert!((a - oracle).abs() < 1e-12);
        assert!((a - 0.998).abs() < 0.001);
    }

    #[test]
    fn no_detectors_no_efficiency() {
        let mut g = geometry();
        g.detectors.clear();
        let r = run_efficiency(&g, &PhysicsConstants::default(), 20_000, 1).unwrap();
        assert_eq!(r.efficiency, 0.0);
        assert_eq!(r.breakdown.acceptance, 0.0);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            run_efficiency(&geometry(), &PhysicsConstants::default(), 100, 1),
            Err(EfficiencyError::TooFewSamples(100))
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let c = PhysicsConstants::default();
        let a = run_efficiency(&geometry(), &c, 100_000, 9).unwrap();
        let b = run_efficiency(&geometry(), &c, 100_000, 9).unwrap();
        let other = run_efficiency(&geometry(), &c, 100_000, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.efficiency, other.efficiency);
        let sum: f64 = a.per_detector.iter().sum();
        assert!((sum - a.efficiency).abs() < 1e-12);
    }
}
