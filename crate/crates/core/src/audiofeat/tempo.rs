//! Tempo estimation from the onset envelope.

use ndarray::Array1;

const BPM_MIN: f64 = 30.0;
const BPM_MAX: f64 = 300.0;

/// Autocorrelate the onset envelope and convert the dominant lag in the
/// 30–300 BPM window to beats per minute. The true beat period rarely falls
/// on an integer lag, so peaks are scored over a three-lag window and the
/// winning lag is refined by parabolic interpolation; a lag whose half is
/// almost as strong is replaced by that half, since the double period of a
/// regular pulse collects nearly as many aligned pairs as the period itself.
/// A flat envelope (no onsets at all) has no tempo and returns 0.
pub fn tempo(onset_env: &Array1<f64>, frame_rate: f64) -> f64 {
    let env = onset_env.as_slice().expect("contiguous envelope");
    let n = env.len();
    let lag_min = ((60.0 * frame_rate / BPM_MAX).ceil() as usize).max(1);
    let lag_max = ((60.0 * frame_rate / BPM_MIN).floor() as usize).min(n.saturating_sub(2));
    if lag_min >= lag_max {
        return 0.0;
    }

    let r: Vec<f64> = (0..=lag_max + 1)
        .map(|lag| (0..n - lag).map(|t| env[t] * env[t + lag]).sum())
        .collect();
    let score = |lag: usize| r[lag - 1] + r[lag] + r[lag + 1];

    let mut best_lag = lag_min;
    let mut best = f64::NEG_INFINITY;
    for lag in lag_min..=lag_max {
        let s = score(lag);
        if s > best {
            best = s;
            best_lag = lag;
        }
    }
    if best <= 0.0 {
        return 0.0;
    }

    loop {
        let halves = [best_lag / 2, best_lag.div_ceil(2)];
        let candidate = halves
            .into_iter()
            .filter(|&lag| lag >= lag_min && lag < best_lag)
            .max_by(|&a, &b| score(a).total_cmp(&score(b)));
        match candidate {
            Some(lag) if score(lag) >= 0.8 * best => {
                best_lag = lag;
                best = score(lag);
            }
            _ => break,
        }
    }

    let mut refined = best_lag as f64;
    if best_lag > lag_min && best_lag < lag_max {
        let (left, right) = (score(best_lag - 1), score(best_lag + 1));
        let denom = left - 2.0 * best + right;
        if denom.abs() > 1e-12 {
            let delta = 0.5 * (left - right) / denom;
            if delta.abs() <= 1.0 {
                refined += delta;
            }
        }
    }
    60.0 * frame_rate / refined
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_envelope_has_no_tempo() {
        assert_eq!(tempo(&Array1::zeros(400), 43.06640625), 0.0);
    }

    #[test]
    fn impulse_train_recovers_bpm() {
        // Onsets every 21.533 frames = 120 BPM at the 22050/512 frame rate.
        let frame_rate = 22050.0 / 512.0;
        let period = frame_rate / 2.0;
        let mut env = Array1::zeros(431);
        let mut t = 0.0;
        while (t as usize) < env.len() {
            env[t as usize] = 1.0;
            t += period;
        }
        let bpm = tempo(&env, frame_rate);
        assert!((bpm - 120.0).abs() < 3.0, "bpm {bpm}");
    }
}
