//! Per-frame pitch tracking and harmonics-to-noise ratio from normalized
//! autocorrelation.

use super::stft::autocorrelation;

/// Voicing decision threshold on the normalized autocorrelation peak.
pub const VOICING_THRESHOLD: f64 = 0.3;
const PITCH_MIN_HZ: f64 = 50.0;
const PITCH_MAX_HZ: f64 = 2000.0;
const HNR_MIN_DB: f64 = -10.0;
const HNR_MAX_DB: f64 = 40.0;

/// Pitch estimate for one voiced frame.
#[derive(Debug, Clone, Copy)]
pub struct VoicedFrame {
    pub pitch_hz: f64,
    pub hnr_db: f64,
}

/// Estimate pitch for one time-domain frame. The normalized autocorrelation
/// `r[lag] = sum x[i] x[i+lag] / sqrt(sum_head x^2 * sum_tail x^2)` is
/// searched over lags for 50–2000 Hz; the frame is voiced iff the peak
/// reaches the voicing threshold. The peak lag is refined by parabolic
/// interpolation and HNR is `10 log10(r / (1 - r))` clamped to [-10, 40] dB.
pub fn analyze_frame(frame: &[f64], sample_rate: u32) -> Option<VoicedFrame> {
    let sr = f64::from(sample_rate);
    let n = frame.len();
    let lag_min = (sr / PITCH_MAX_HZ).ceil() as usize;
    let lag_max = ((sr / PITCH_MIN_HZ).floor() as usize).min(n - 1);
    if lag_min >= lag_max {
        return None;
    }

    let raw = autocorrelation(frame, lag_max + 1);

    // Prefix sums of energy for the normalization terms.
    let mut prefix = vec![0.0; n + 1];
    for (i, &x) in frame.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x * x;
    }
    let normalized = |lag: usize| -> f64 {
        let head = prefix[n - lag];
        let tail = prefix[n] - prefix[lag];
        let denom = (head * tail).sqrt();
        if denom > 0.0 {
            raw[lag] / denom
        } else {
            0.0
        }
    };

    let r: Vec<f64> = (0..=lag_max).map(normalized).collect();
    let (mut best_lag, mut best_r) = (lag_min, r[lag_min]);
    for lag in lag_min..=lag_max {
        if r[lag] > best_r {
            best_r = r[lag];
            best_lag = lag;
        }
    }
    if best_r < VOICING_THRESHOLD {
        return None;
    }
    // A periodic signal peaks at every multiple of its period; take the
    // earliest local maximum comparable to the global one so the fundamental
    // wins over its subharmonics.
    for lag in lag_min.max(1)..lag_max {
        if r[lag] >= 0.9 * best_r && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] {
            best_lag = lag;
            best_r = r[lag];
            break;
        }
    }

    // Parabolic refinement of the peak lag.
    let mut refined = best_lag as f64;
    if best_lag > lag_min && best_lag < lag_max {
        let left = r[best_lag - 1];
        let right = r[best_lag + 1];
        let denom = left - 2.0 * best_r + right;
        if denom.abs() > 1e-12 {
            let delta = 0.5 * (left - right) / denom;
            if delta.abs() <= 1.0 {
                refined += delta;
            }
        }
    }

    let r = best_r.min(1.0 - 1e-12);
    let hnr_db = if r <= 0.0 {
        HNR_MIN_DB
    } else {
        (10.0 * (r / (1.0 - r)).log10()).clamp(HNR_MIN_DB, HNR_MAX_DB)
    };
    Some(VoicedFrame { pitch_hz: sr / refined, hnr_db })
}
