use serde::{Deserialize, Serialize};

use super::fit::{fit_gaussian_with_neighbours, FitWindow, PeakFit};
use super::peaks::find_peaks;
use super::CalibrationError;
use crate::event_io::Spectrum;
use crate::model::{sigma_to_fwhm, EnergyScale, LineTable, ResponseModel};
use crate::Real;

/// A fitted peak paired with the line it is attributed to.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMatch<T> {
    pub label: String,
    pub energy_ev: T,
    pub fit: PeakFit<T>,
    /// Anchors enter the affine fit; other lines only get residuals.
    pub anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual<T> {
    pub label: String,
    pub energy_ev: T,
    pub centroid_channel: T,
    pub predicted_ev: T,
    /// `predicted - known`.
    pub residual_ev: T,
    pub anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult<T> {
    pub gain_ev_per_channel: T,
    pub gain_error: T,
    pub offset_ev: T,
    pub offset_error: T,
    /// Constant-FWHM resolution from the anchor peak widths, quoted at 8 keV.
    pub resolution_fwhm_at_8kev_ev: T,
    pub resolution_fwhm_error: T,
    pub max_abs_residual_ev: T,
    pub residual_threshold_ev: T,
    pub within_threshold: bool,
    pub residuals: Vec<Residual<T>>,
}

impl<T: Real> CalibrationResult<T> {
    pub fn scale(&self) -> EnergyScale<T> {
        EnergyScale {
            gain_ev_per_channel: self.gain_ev_per_channel,
            offset_ev: self.offset_ev,
        }
    }

    pub fn to_text(&self) -> String {
        let f = |v: T| v.as_f64();
        let mut out = String::new();
        out.push_str(&format!("gain          = {:.6} +/- {:.6} eV/channel\n", f(self.gain_ev_per_channel), f(self.gain_error)));
        out.push_str(&format!("offset        = {:.3} +/- {:.3} eV\n", f(self.offset_ev), f(self.offset_error)));
        out.push_str(&format!(
            "FWHM @ 8 keV  = {:.2} +/- {:.2} eV\n",
            f(self.resolution_fwhm_at_8kev_ev),
            f(self.resolution_fwhm_error)
        ));
        out.push_str(&format!("{:<10} {:>10} {:>12} {:>12} {:>10}  role\n", "line", "known_eV", "channel", "fitted_eV", "resid_eV"));
        for r in &self.residuals {
            out.push_str(&format!(
                "{:<10} {:>10.1} {:>12.3} {:>12.2} {:>10.2}  {}\n",
                r.label,
                f(r.energy_ev),
                f(r.centroid_channel),
                f(r.predicted_ev),
                f(r.residual_ev),
                if r.anchor { "anchor" } else { "cross-check" }
            ));
        }
        out.push_str(&format!(
            "max |residual| = {:.2} eV (threshold {:.1} eV): {}\n",
            f(self.max_abs_residual_ev),
            f(self.residual_threshold_ev),
            if self.within_threshold { "OK" } else { "EXCEEDED" }
        ));
        out
    }
}

/// Weighted least-squares affine fit `E = gain · channel + offset` over the
/// anchor lines, with residuals for every supplied line.
pub fn fit_calibration<T: Real>(matches: &[LineMatch<T>], residual_threshold_ev: T) -> Result<CalibrationResult<T>, CalibrationError> {
    let anchors: Vec<&LineMatch<T>> = matches.iter().filter(|m| m.anchor).collect();
    let mut energies: Vec<f64> = anchors.iter().map(|m| m.energy_ev.as_f64()).collect();
    energies.sort_by(f64::total_cmp);
    energies.dedup();
    if energies.len() < 2 {
        return Err(CalibrationError::Degenerate(format!(
            "need at least 2 distinct anchor lines, got {}",
            energies.len()
        )));
    }
    for (i, a) in anchors.iter().enumerate() {
        for b in &anchors[i + 1..] {
            if a.fit.centroid == b.fit.centroid {
                return Err(CalibrationError::Degenerate(format!(
                    "`{}` and `{}` share channel {}",
                    a.label, b.label, a.fit.centroid
                )));
            }
        }
    }

    let weight = |m: &LineMatch<T>| 1.0 / m.fit.centroid_error.as_f64().powi(2).max(1e-12);
    let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for m in &anchors {
        let (w, c, e) = (weight(m), m.fit.centroid.as_f64(), m.energy_ev.as_f64());
        s += w;
        sx += w * c;
        sxx += w * c * c;
        sy += w * e;
        sxy += w * c * e;
    }
    let det = s * sxx - sx * sx;
    if !(det > 1e-12 * s * sxx) {
        return Err(CalibrationError::Degenerate("anchor channels are not distinct".into()));
    }
    let gain = (s * sxy - sx * sy) / det;
    let offset = (sxx * sy - sx * sxy) / det;
    if !(gain > 0.0) {
        return Err(CalibrationError::Degenerate(format!("non-positive gain {gain}")));
    }
    // Energy-space weights are channel weights divided by gain².
    let gain_error = (s / det).sqrt() * gain;
    let offset_error = (sxx / det).sqrt() * gain;

    let residuals: Vec<Residual<T>> = matches
        .iter()
        .map(|m| {
            let predicted = gain * m.fit.centroid.as_f64() + offset;
            Residual {
                label: m.label.clone(),
                energy_ev: m.energy_ev,
                centroid_channel: m.fit.centroid,
                predicted_ev: T::lit(predicted),
                residual_ev: T::lit(predicted - m.energy_ev.as_f64()),
                anchor: m.anchor,
            }
        })
        .collect();
    let max_abs = residuals.iter().map(|r| r.residual_ev.as_f64().abs()).fold(0.0, f64::max);

    let (mut ws, mut wsum) = (0.0, 0.0);
    for m in &anchors {
        let w = 1.0 / m.fit.sigma_error.as_f64().powi(2).max(1e-12);
        ws += w * m.fit.sigma.as_f64();
        wsum += w;
    }
    let sigma_ev = gain * ws / wsum;
    let sigma_ev_error = gain / wsum.sqrt();
    let fwhm = sigma_to_fwhm(sigma_ev).map_err(CalibrationError::Model)?;

    Ok(CalibrationResult {
        gain_ev_per_channel: T::lit(gain),
        gain_error: T::lit(gain_error),
        offset_ev: T::lit(offset),
        offset_error: T::lit(offset_error),
        resolution_fwhm_at_8kev_ev: T::lit(fwhm),
        resolution_fwhm_error: T::lit(fwhm / sigma_ev * sigma_ev_error),
        max_abs_residual_ev: T::lit(max_abs),
        residual_threshold_ev,
        within_threshold: max_abs <= residual_threshold_ev.as_f64(),
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CalibrationOptions<T> {
    pub anchors: Vec<String>,
    pub cross_checks: Vec<String>,
    /// Expected peak σ in channels; sets the smoothing width of the search.
    pub expected_sigma_channels: T,
    pub min_prominence: T,
    pub residual_threshold_ev: T,
    /// Fit half-width in units of the peak σ ...
    pub window_sigmas: T,
    /// ... capped at this fraction of the distance to the nearest other line.
    pub neighbour_fraction: T,
}

impl<T: Real> Default for CalibrationOptions<T> {
    fn default() -> Self {
        Self::for_response(&ResponseModel::default())
    }
}

impl<T: Real> CalibrationOptions<T> {
    pub fn for_response(response: &ResponseModel<T>) -> Self {
        Self {
            anchors: vec!["ti_ka".into(), "mn_ka".into()],
            cross_checks: vec!["ti_kb".into(), "mn_kb".into()],
            expected_sigma_channels: response.sigma_channels(),
            min_prominence: T::lit(10.0),
            residual_threshold_ev: T::lit(5.0),
            window_sigmas: T::lit(2.5),
            neighbour_fraction: T::lit(0.4),
        }
    }
}

const RECENTRE_PASSES: usize = 3;

/// Full pipeline on a raw-channel spectrum: locate the anchor peaks, derive a
/// preliminary scale, fit every line in a window sized by its neighbours, and
/// fit the affine calibration.
pub fn calibrate_spectrum<T: Real>(raw: &Spectrum<T>, table: &LineTable<T>, options: &CalibrationOptions<T>) -> Result<CalibrationResult<T>, CalibrationError> {
    if options.anchors.len() < 2 {
        return Err(CalibrationError::Domain("at least two anchor lines are required".into()));
    }
    let lines: Vec<(String, f64, bool)> = options
        .anchors
        .iter()
        .map(|l| (l, true))
        .chain(options.cross_checks.iter().map(|l| (l, false)))
        .map(|(label, anchor)| Ok((label.clone(), table.lookup(label)?.energy_ev.as_f64(), anchor)))
        .collect::<Result<_, CalibrationError>>()?;

    let expected_sigma = options.expected_sigma_channels.as_f64().max(1.0);
    let width = expected_sigma.round().max(1.0) as usize;
    let mut candidates = find_peaks(raw, options.min_prominence, options.anchors.len(), width)?;
    candidates.truncate(options.anchors.len());
    candidates.sort_by_key(|c| c.bin);
    let mut anchor_lines: Vec<&(String, f64, bool)> = lines.iter().filter(|l| l.2).collect();
    anchor_lines.sort_by(|a, b| a.1.total_cmp(&b.1));

    let origin = raw.axis.bin_center(0).as_f64();
    let bin_width = raw.axis.bin_width().as_f64();
    let to_bin = |position: f64| (position - origin) / bin_width;

    // preliminary scale from the two outermost candidates
    let (first, last) = (candidates[0].position.as_f64(), candidates[candidates.len() - 1].position.as_f64());
    let (e_first, e_last) = (anchor_lines[0].1, anchor_lines[anchor_lines.len() - 1].1);
    if first == last {
        return Err(CalibrationError::Degenerate("anchor candidates coincide".into()));
    }
    let gain0 = (e_last - e_first) / (last - first);
    let mut scale = (gain0, e_first - gain0 * first);
    let mut sigma_channels = expected_sigma;

    let fit_line = |energy: f64, start: f64, scale: (f64, f64), sigma: f64, neighbours: &[PeakFit<T>]| -> Result<PeakFit<T>, CalibrationError> {
        let gap = lines
            .iter()
            .map(|l| (l.1 - energy).abs())
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
            / scale.0;
        let half = (options.window_sigmas.as_f64() * sigma).min(options.neighbour_fraction.as_f64() * gap);
        let mut centre = start;
        let window = |c: f64| FitWindow::around(to_bin(c), half / bin_width, raw.counts.len());
        let mut fit = fit_gaussian_with_neighbours(raw, window(centre), neighbours)?;
        for _ in 0..RECENTRE_PASSES {
            let c = fit.centroid.as_f64();
            if (c - centre).abs() <= 0.5 * bin_width {
                break;
            }
            centre = c;
            fit = fit_gaussian_with_neighbours(raw, window(centre), neighbours)?;
        }
        Ok(fit)
    };

    // anchors first, seeded by the peak search
    let mut anchor_fits = Vec::new();
    for (line, cand) in anchor_lines.iter().zip(&candidates) {
        anchor_fits.push(fit_line(line.1, cand.position.as_f64(), scale, sigma_channels, &[])?);
    }
    let prelim: Vec<LineMatch<T>> = anchor_lines
        .iter()
        .zip(&anchor_fits)
        .map(|(l, f)| LineMatch {
            label: l.0.clone(),
            energy_ev: T::lit(l.1),
            fit: f.clone(),
            anchor: true,
        })
        .collect();
    let prelim = fit_calibration(&prelim, options.residual_threshold_ev)?;
    scale = (prelim.gain_ev_per_channel.as_f64(), prelim.offset_ev.as_f64());
    sigma_channels = anchor_fits.iter().map(|f| f.sigma.as_f64()).sum::<f64>() / anchor_fits.len() as f64;

    let mut matches = Vec::new();
    for (label, energy, anchor) in &lines {
        let predicted = (energy - scale.1) / scale.0;
        matches.push(LineMatch {
            label: label.clone(),
            energy_ev: T::lit(*energy),
            fit: fit_line(*energy, predicted, scale, sigma_channels, &[])?,
            anchor: *anchor,
        });
    }
    // refit with the tails of the other lines held fixed
    let first_pass: Vec<PeakFit<T>> = matches.iter().map(|m| m.fit.clone()).collect();
    for (i, m) in matches.iter_mut().enumerate() {
        let others: Vec<PeakFit<T>> = first_pass
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, f)| f.clone())
            .collect();
        m.fit = fit_line(m.energy_ev.as_f64(), m.fit.centroid.as_f64(), scale, sigma_channels, &others)?;
    }
    fit_calibration(&matches, options.residual_threshold_ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::FitWindow;

    fn synthetic(label: &str, energy: f64, channel: f64, anchor: bool) -> LineMatch<f64> {
        LineMatch {
            label: label.into(),
            energy_ev: energy,
            fit: PeakFit {
                centroid: channel,
                centroid_error: 0.3,
                sigma: 85.0,
                sigma_error: 0.2,
                amplitude: 100.0,
                background: 0.0,
                fit_window: (channel - 10.0, channel + 10.0),
                window: FitWindow::new(0, 1),
                goodness: 1.0,
                iterations: 1,
            },
            anchor,
        }
    }

    #[test]
    fn exact_inputs_zero_residuals() {
        let (g, o) = (2.5, -300.0);
        let ch = |e: f64| (e - o) / g;
        let matches = vec![
            synthetic("ti_ka", 4511.0, ch(4511.0), true),
            synthetic("mn_ka", 5899.0, ch(5899.0), true),
            synthetic("mn_kb", 6490.0, ch(6490.0), false),
        ];
        let r = fit_calibration(&matches, 5.0).unwrap();
        assert!((r.gain_ev_per_channel - g).abs() < 1e-9);
        assert!((r.offset_ev - o).abs() < 1e-6);
        assert!(r.max_abs_residual_ev < 1e-6);
        assert!(r.within_threshold);
        assert!((r.resolution_fwhm_at_8kev_ev - 2.5 * 85.0 * 2.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-9);
        assert_eq!(r.scale().energy_of(ch(5899.0)), r.gain_ev_per_channel * ch(5899.0) + r.offset_ev);
    }

    #[test]
    fn error_propagation_two_points() {
        let matches = vec![synthetic("a", 1000.0, 1000.0, true), synthetic("b", 2000.0, 2000.0, true)];
        let r = fit_calibration(&matches, 5.0).unwrap();
        // oracle: two points, equal errors s in channels → σ_g = g·s·√2/Δc
        let s = 0.3;
        assert!((r.gain_error - s * 2f64.sqrt() / 1000.0).abs() < 1e-12);
        let oracle_offset = s * (1000f64.powi(2) + 2000f64.powi(2)).sqrt() / 1000.0;
        assert!((r.offset_error - oracle_offset).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let same = vec![synthetic("a", 1000.0, 500.0, true), synthetic("b", 2000.0, 500.0, true)];
        assert!(matches!(fit_calibration(&same, 5.0), Err(CalibrationError::Degenerate(_))));
        let one = vec![synthetic("a", 1000.0, 500.0, true), synthetic("b", 2000.0, 900.0, false)];
        assert!(matches!(fit_calibration(&one, 5.0), Err(CalibrationError::Degenerate(_))));
        let inverted = vec![synthetic("a", 1000.0, 900.0, true), synthetic("b", 2000.0, 500.0, true)];
        assert!(fit_calibration(&inverted, 5.0).is_err());
    }

    #[test]
    fn threshold_flag() {
        let matches = vec![
            synthetic("a", 1000.0, 1000.0, true),
            synthetic("b", 2000.0, 2000.0, true),
            synthetic("c", 3000.0, 3010.0, false),
        ];
        let r = fit_calibration(&matches, 5.0).unwrap();
        assert!((r.max_abs_residual_ev - 10.0).abs() < 1e-9);
        assert!(!r.within_threshold);
    }
}
