use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::event_io::Spectrum;
use crate::Real;

pub const MAX_ITERATIONS: usize = 200;
const MIN_BINS: usize = 7;
const MIN_COUNTS: u64 = 100;
/// Reweighting passes after the initial Neyman-weighted fit.
const REWEIGHT_PASSES: usize = 2;
const VARIANCE_FLOOR: f64 = 0.1;

/// Half-open range of bin indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub first: usize,
    pub end: usize,
}

impl FitWindow {
    pub fn new(first: usize, end: usize) -> Self {
        Self { first, end }
    }

    /// `centre ± half_width` in bins, clipped to `bins`.
    pub fn around(centre: f64, half_width: f64, bins: usize) -> Self {
        let first = (centre - half_width).ceil().max(0.0) as usize;
        let end = ((centre + half_width).floor() + 1.0).clamp(0.0, bins as f64) as usize;
        Self { first: first.min(end), end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.first)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gaussian-plus-constant fit result; positions and widths are in the units
/// of the spectrum axis, heights in counts per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit<T> {
    pub centroid: T,
    pub centroid_error: T,
    pub sigma: T,
    pub sigma_error: T,
    pub amplitude: T,
    pub background: T,
    /// Axis positions of the first and last bin in the window.
    pub fit_window: (T, T),
    pub window: FitWindow,
    /// Pearson chi-square per degree of freedom.
    pub goodness: T,
    pub iterations: usize,
}

impl<T: Real> PeakFit<T> {
    /// Net peak area in counts.
    pub fn area(&self, bin_width: T) -> T {
        self.amplitude * self.sigma * (T::TAU()).sqrt() / bin_width
    }
}

#[derive(Debug, Clone, Copy)]
struct Params {
    amplitude: f64,
    centroid: f64,
    sigma: f64,
    background: f64,
}

impl Params {
    fn from(v: [f64; 4]) -> Self {
        Self {
            amplitude: v[0],
            centroid: v[1],
            sigma: v[2],
            background: v[3],
        }
    }

    fn vec(&self) -> [f64; 4] {
        [self.amplitude, self.centroid, self.sigma, self.background]
    }

    fn model(&self, x: f64) -> f64 {
        let u = (x - self.centroid) / self.sigma;
        self.amplitude * (-0.5 * u * u).exp() + self.background
    }

    fn gradient(&self, x: f64) -> [f64; 4] {
        let d = x - self.centroid;
        let s2 = self.sigma * self.sigma;
        let g = (-0.5 * d * d / s2).exp();
        [g, self.amplitude * g * d / s2, self.amplitude * g * d * d / (s2 * self.sigma), 1.0]
    }
}

/// Least-squares Gaussian plus constant over `window`, solved with
/// Levenberg–Marquardt. A first pass uses Neyman weights `1/max(y, 1)`;
/// later passes reweight with the fitted model to remove the low-count bias.
pub fn fit_gaussian<T: Real>(raw: &Spectrum<T>, window: FitWindow) -> Result<PeakFit<T>, CalibrationError> {
    fit_gaussian_with_neighbours(raw, window, &[])
}

/// As [`fit_gaussian`], with the tails of already fitted neighbouring peaks
/// held fixed in the model.
pub fn fit_gaussian_with_neighbours<T: Real>(raw: &Spectrum<T>, window: FitWindow, neighbours: &[PeakFit<T>]) -> Result<PeakFit<T>, CalibrationError> {
    let end = window.end.min(raw.counts.len());
    let first = window.first.min(end);
    let bins = end - first;
    if bins < MIN_BINS {
        return Err(CalibrationError::WindowTooSmall { first, end, bins });
    }
    let counts: u64 = raw.counts[first..end].iter().sum();
    if counts < MIN_COUNTS {
        return Err(CalibrationError::TooFewCounts { first, end, counts });
    }
    let x: Vec<f64> = (first..end).map(|i| raw.axis.bin_center(i).as_f64()).collect();
    let y: Vec<f64> = raw.counts[first..end].iter().map(|&c| c as f64).collect();
    let bin_width = raw.axis.bin_width().as_f64();
    let fixed: Vec<Params> = neighbours
        .iter()
        .map(|n| Params {
            amplitude: n.amplitude.as_f64(),
            centroid: n.centroid.as_f64(),
            sigma: n.sigma.as_f64(),
            background: 0.0,
        })
        .collect();
    let extra: Vec<f64> = x.iter().map(|&xi| fixed.iter().map(|f| f.model(xi)).sum()).collect();
    let data = Data { x: &x, y: &y, extra: &extra };

    let net: Vec<f64> = y.iter().zip(&extra).map(|(v, e)| v - e).collect();
    let mut p = initial_guess(&x, &net, bin_width);
    let mut weights: Vec<f64> = y.iter().map(|&v| 1.0 / v.max(1.0)).collect();
    let mut iterations = 0;
    for pass in 0..=REWEIGHT_PASSES {
        let (fitted, used) = levenberg_marquardt(&data, &weights, p)?;
        p = fitted;
        iterations += used;
        if pass < REWEIGHT_PASSES {
            weights = data.model_weights(&p);
        }
    }
    weights = data.model_weights(&p);
    let chi2 = data.chi_square(&weights, &p);
    let covariance = invert(normal_matrix(&x, &weights, &p))
        .ok_or_else(|| CalibrationError::InvalidFit("singular curvature matrix at the minimum".into()))?;

    let (lo, hi) = (x[0], x[bins - 1]);
    if !(p.sigma > 0.0) {
        return Err(CalibrationError::InvalidFit(format!("negative or zero sigma {}", p.sigma)));
    }
    if !(p.amplitude > 0.0) {
        return Err(CalibrationError::InvalidFit(format!("non-positive amplitude {}", p.amplitude)));
    }
    if !(p.centroid >= lo && p.centroid <= hi) {
        return Err(CalibrationError::InvalidFit(format!("centroid {} outside window [{lo}, {hi}]", p.centroid)));
    }
    Ok(PeakFit {
        centroid: T::lit(p.centroid),
        centroid_error: T::lit(covariance[1][1].max(0.0).sqrt()),
        sigma: T::lit(p.sigma),
        sigma_error: T::lit(covariance[2][2].max(0.0).sqrt()),
        amplitude: T::lit(p.amplitude),
        background: T::lit(p.background),
        fit_window: (T::lit(lo), T::lit(hi)),
        window: FitWindow { first, end },
        goodness: T::lit(chi2 / (bins - 4).max(1) as f64),
        iterations,
    })
}

fn initial_guess(x: &[f64], y: &[f64], bin_width: f64) -> Params {
    let n = y.len();
    let edge = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let background = edge(&y[..2]).min(edge(&y[n - 2..])).max(0.0);
    let net: Vec<f64> = y.iter().map(|&v| (v - background).max(0.0)).collect();
    let total: f64 = net.iter().sum();
    let peak = net.iter().cloned().fold(0.0, f64::max);
    let (centroid, sigma) = if total > 0.0 {
        let mean = x.iter().zip(&net).map(|(xi, w)| xi * w).sum::<f64>() / total;
        let var = x.iter().zip(&net).map(|(xi, w)| (xi - mean).powi(2) * w).sum::<f64>() / total;
        (mean, var.sqrt())
    } else {
        (0.5 * (x[0] + x[n - 1]), 0.25 * (x[n - 1] - x[0]))
    };
    Params {
        amplitude: peak.max(1.0),
        centroid,
        sigma: sigma.max(bin_width),
        background,
    }
}

struct Data<'a> {
    x: &'a [f64],
    y: &'a [f64],
    /// Fixed contribution of neighbouring peaks.
    extra: &'a [f64],
}

impl Data<'_> {
    fn model(&self, i: usize, p: &Params) -> f64 {
        p.model(self.x[i]) + self.extra[i]
    }

    fn chi_square(&self, w: &[f64], p: &Params) -> f64 {
        (0..self.x.len()).map(|i| w[i] * (self.y[i] - self.model(i, p)).powi(2)).sum()
    }

    fn model_weights(&self, p: &Params) -> Vec<f64> {
        (0..self.x.len()).map(|i| 1.0 / self.model(i, p).max(VARIANCE_FLOOR)).collect()
    }
}

fn normal_matrix(x: &[f64], w: &[f64], p: &Params) -> [[f64; 4]; 4] {
    let mut h = [[0.0; 4]; 4];
    for (&xi, &wi) in x.iter().zip(w) {
        let g = p.gradient(xi);
        for r in 0..4 {
            for c in 0..4 {
                h[r][c] += wi * g[r] * g[c];
            }
        }
    }
    h
}

fn levenberg_marquardt(data: &Data<'_>, w: &[f64], start: Params) -> Result<(Params, usize), CalibrationError> {
    let mut p = start;
    let mut chi2 = data.chi_square(w, &p);
    let mut lambda = 1e-3;
    for iteration in 1..=MAX_ITERATIONS {
        let h = normal_matrix(data.x, w, &p);
        let mut grad = [0.0; 4];
        for i in 0..data.x.len() {
            let g = p.gradient(data.x[i]);
            let r = data.y[i] - data.model(i, &p);
            for k in 0..4 {
                grad[k] += w[i] * r * g[k];
            }
        }
        let mut damped = h;
        for k in 0..4 {
            damped[k][k] += lambda * h[k][k].max(1e-12);
        }
        let step = solve(damped, grad);
        let accepted = step.and_then(|step| {
            let mut v = p.vec();
            for k in 0..4 {
                v[k] += step[k];
            }
            let trial = Params::from(v);
            (trial.sigma > 0.0).then_some((trial, step))
        });
        match accepted {
            Some((trial, step)) if data.chi_square(w, &trial) <= chi2 => {
                let new_chi2 = data.chi_square(w, &trial);
                let small_step = step
                    .iter()
                    .zip(trial.vec())
                    .all(|(s, v)| s.abs() <= 1e-9 * (v.abs() + 1e-6));
                let small_change = chi2 - new_chi2 <= 1e-10 * chi2.max(1e-300);
                p = trial;
                chi2 = new_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                if small_step || small_change {
                    return Ok((p, iteration));
                }
            }
            _ => {
                lambda *= 10.0;
                if lambda > 1e12 {
                    return Ok((p, iteration));
                }
            }
        }
    }
    Err(CalibrationError::NonConvergence {
        iterations: MAX_ITERATIONS,
        chi2,
        amplitude: p.amplitude,
        centroid: p.centroid,
        sigma: p.sigma,
        background: p.background,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * out[k]).sum();
        out[row] = (b[row] - s) / a[row][row];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn invert(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for c in 0..4 {
        let mut e = [0.0; 4];
        e[c] = 1.0;
        let col = solve(a, e)?;
        for r in 0..4 {
            inv[r][c] = col[r];
        }
    }
    Some(inv)
}
