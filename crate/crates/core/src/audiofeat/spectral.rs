//! Per-frame spectral descriptors: centroid, rolloff, bandwidth, flatness,
//! chroma, tonnetz and octave-band spectral contrast.

use super::LOG_FLOOR;

/// Convention for frames with no energy: centroid, rolloff and bandwidth are
/// 0 and flatness is 1 (a flat, empty spectrum).
pub fn centroid(magnitudes: &[f64], bin_freqs: &[f64]) -> f64 {
    let total: f64 = magnitudes.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    magnitudes
        .iter()
        .zip(bin_freqs)
        .map(|(&s, &f)| s * f)
        .sum::<f64>()
        / total
}

/// Frequency below which `fraction` of the cumulative magnitude lies.
pub fn rolloff(magnitudes: &[f64], bin_freqs: &[f64], fraction: f64) -> f64 {
    let total: f64 = magnitudes.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let threshold = fraction * total;
    let mut acc = 0.0;
    for (&s, &f) in magnitudes.iter().zip(bin_freqs) {
        acc += s;
        if acc >= threshold {
            return f;
        }
    }
    *bin_freqs.last().unwrap_or(&0.0)
}

pub fn bandwidth(magnitudes: &[f64], bin_freqs: &[f64], centroid: f64) -> f64 {
    let total: f64 = magnitudes.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    (magnitudes
        .iter()
        .zip(bin_freqs)
        .map(|(&s, &f)| s * (f - centroid).powi(2))
        .sum::<f64>()
        / total)
        .sqrt()
}

/// Geometric over arithmetic mean of the floored magnitude spectrum; always
/// in `[0, 1]` and exactly 1 for an all-zero frame.
pub fn flatness(magnitudes: &[f64]) -> f64 {
    let total: f64 = magnitudes.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    let n = magnitudes.len() as f64;
    let log_mean = magnitudes.iter().map(|&s| (s + LOG_FLOOR).ln()).sum::<f64>() / n;
    let mean = total / n + LOG_FLOOR;
    (log_mean.exp() / mean).min(1.0)
}

/// Fold bin energies (squared magnitudes) into 12 pitch classes by nearest
/// semitone relative to A440, then L1-normalize. Class 0 is C. A frame with
/// no energy stays all-zero.
pub fn chroma(magnitudes: &[f64], bin_freqs: &[f64]) -> [f64; 12] {
    let mut classes = [0.0; 12];
    for (&s, &f) in magnitudes.iter().zip(bin_freqs) {
        if f <= 0.0 {
            continue;
        }
        let midi = 69.0 + 12.0 * (f / 440.0).log2();
        let class = (midi.round() as i64).rem_euclid(12) as usize;
        classes[class] += s * s;
    }
    let total: f64 = classes.iter().sum();
    if total > 0.0 {
        for c in &mut classes {
            *c /= total;
        }
    }
    classes
}

/// Tonal centroid projection of a normalized chroma vector onto the circle
/// of fifths and the minor- and major-third circles.
pub fn tonnetz(chroma: &[f64; 12]) -> [f64; 6] {
    use std::f64::consts::PI;
    let mut out = [0.0; 6];
    for (p, &c) in chroma.iter().enumerate() {
        let p = p as f64;
        let fifths = p * 7.0 * PI / 6.0;
        let minor_third = p * 3.0 * PI / 2.0;
        let major_third = p * 2.0 * PI / 3.0;
        out[0] += c * fifths.sin();
        out[1] += c * fifths.cos();
        out[2] += c * minor_third.sin();
        out[3] += c * minor_third.cos();
        out[4] += c * 0.5 * major_third.sin();
        out[5] += c * 0.5 * major_third.cos();
    }
    out
}

/// Band edges for spectral contrast: the sub-200 Hz band plus six octave
/// bands starting at 200 Hz; the top band is capped at Nyquist.
pub fn contrast_band_edges(nyquist: f64) -> [(f64, f64); 7] {
    [
        (0.0, 200.0),
        (200.0, 400.0),
        (400.0, 800.0),
        (800.0, 1600.0),
        (1600.0, 3200.0),
        (3200.0, 6400.0),
        (6400.0, nyquist),
    ]
}

/// Per-band contrast: mean of the top 2% magnitudes in dB minus the mean of
/// the bottom 2%, with at least one bin on each side.
pub fn contrast(magnitudes: &[f64], bin_freqs: &[f64]) -> [f64; 7] {
    let nyquist = *bin_freqs.last().unwrap_or(&0.0);
    let mut out = [0.0; 7];
    for (b, &(lo, hi)) in contrast_band_edges(nyquist).iter().enumerate() {
        let mut band: Vec<f64> = magnitudes
            .iter()
            .zip(bin_freqs)
            .filter(|&(_, &f)| f >= lo && (f < hi || (b == 6 && f <= hi)))
            .map(|(&s, _)| 20.0 * (s + LOG_FLOOR).log10())
            .collect();
        if band.is_empty() {
            continue;
        }
        band.sort_by(|a, b| a.total_cmp(b));
        let take = ((0.02 * band.len() as f64).ceil() as usize).max(1);
        let bottom: f64 = band[..take].iter().sum::<f64>() / take as f64;
        let top: f64 = band[band.len() - take..].iter().sum::<f64>() / take as f64;
        out[b] = top - bottom;
    }
    out
}
