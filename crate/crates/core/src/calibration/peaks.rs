use super::CalibrationError;
use crate::event_io::Spectrum;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakCandidate<T> {
    pub bin: usize,
    /// Bin centre on the spectrum axis.
    pub position: T,
    /// Smoothed height at the maximum.
    pub height: T,
    pub prominence: T,
}

/// Local maxima of the moving-average-smoothed spectrum with prominence at
/// least `min_prominence`, ranked by prominence (ties to the lower bin).
/// Flat tops resolve to the middle bin of the plateau.
pub fn find_peaks<T: Real>(raw: &Spectrum<T>, min_prominence: T, expected_count: usize, smoothing_width: usize) -> Result<Vec<PeakCandidate<T>>, CalibrationError> {
    if raw.entries() == 0 || raw.in_range() == 0 {
        return Err(CalibrationError::EmptySpectrum);
    }
    let smooth = moving_average(&raw.counts, smoothing_width.max(1));
    let n = smooth.len();
    let min_prominence = min_prominence.as_f64();
    let mut found = Vec::new();
    let mut i = 1;
    while i < n {
        if smooth[i] > smooth[i - 1] {
            let mut j = i;
            while j + 1 < n && smooth[j + 1] == smooth[i] {
                j += 1;
            }
            if j + 1 < n && smooth[j + 1] < smooth[i] {
                let peak = i + (j - i) / 2;
                let prominence = prominence(&smooth, i, j);
                if prominence >= min_prominence && prominence > 0.0 {
                    found.push(PeakCandidate {
                        bin: peak,
                        position: raw.axis.bin_center(peak),
                        height: T::lit(smooth[peak]),
                        prominence: T::lit(prominence),
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    found.sort_by(|a, b| {
        b.prominence
            .partial_cmp(&a.prominence)
            .expect("finite prominence")
            .then(a.bin.cmp(&b.bin))
    });
    if found.len() < expected_count {
        return Err(CalibrationError::TooFewPeaks {
            expected: expected_count,
            found: found.iter().map(|c| c.position.as_f64()).collect(),
        });
    }
    Ok(found)
}

/// Centred moving average; near the edges the window is truncated.
fn moving_average(counts: &[u64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut prefix = Vec::with_capacity(counts.len() + 1);
    prefix.push(0u64);
    for &c in counts {
        prefix.push(prefix.last().expect("non-empty") + c);
    }
    (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(counts.len());
            (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Height above the higher of the two lowest points separating the plateau
/// `[first, last]` from higher ground (or the spectrum edge).
fn prominence(y: &[f64], first: usize, last: usize) -> f64 {
    let h = y[first];
    let mut left_min = h;
    // ties stop the leftward walk so equal twin maxima are not both fully prominent
    for k in (0..first).rev() {
        if y[k] >= h {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = h;
    for &v in &y[last + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}
