//! Mel filterbank, MFCCs via an orthonormal DCT-II, and the onset envelope
//! derived from the log mel spectrogram.

use ndarray::{Array1, Array2};

use super::stft::SpectralFrameSeries;
use super::{LOG_FLOOR, N_MELS, N_MFCC};

/// Hz to mel, linear below 1 kHz and logarithmic above.
fn hz_to_mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if hz >= min_log_hz {
        min_log_mel + (hz / min_log_hz).ln() / logstep
    } else {
        hz / f_sp
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if mel >= min_log_mel {
        min_log_hz * (logstep * (mel - min_log_mel)).exp()
    } else {
        f_sp * mel
    }
}

/// Triangular mel filterbank (n_mels, n_bins) over `bin_freqs`, spanning
/// 0 Hz to Nyquist, with each triangle area-normalized by 2 / bandwidth.
pub fn mel_filterbank(n_mels: usize, bin_freqs: &[f64]) -> Array2<f64> {
    let nyquist = *bin_freqs.last().expect("at least one bin");
    let mel_max = hz_to_mel(nyquist);
    let points: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut bank = Array2::zeros((n_mels, bin_freqs.len()));
    for m in 0..n_mels {
        let (lower, center, upper) = (points[m], points[m + 1], points[m + 2]);
        let norm = 2.0 / (upper - lower);
        for (k, &f) in bin_freqs.iter().enumerate() {
            let rising = (f - lower) / (center - lower);
            let falling = (upper - f) / (upper - center);
            let weight = rising.min(falling).max(0.0);
            bank[[m, k]] = weight * norm;
        }
    }
    bank
}

/// Orthonormal DCT-II matrix: row `k` is
/// `a_k * cos(pi * k * (2m + 1) / (2n))` with `a_0 = sqrt(1/n)`,
/// `a_k = sqrt(2/n)` otherwise, so `D * D^T = I`.
pub fn dct_ii_matrix(n: usize) -> Array2<f64> {
    let mut d = Array2::zeros((n, n));
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for m in 0..n {
            d[[k, m]] = scale
                * (std::f64::consts::PI * k as f64 * (2 * m + 1) as f64 / (2 * n) as f64).cos();
        }
    }
    d
}

/// Natural-log mel power spectrogram (frame, mel band) with a floor applied
/// before the log.
pub fn log_mel_spectrogram(series: &SpectralFrameSeries) -> Array2<f64> {
    let bank = mel_filterbank(N_MELS, &series.bin_freqs);
    let power = series.frames.mapv(|m| m * m);
    let mel = power.dot(&bank.t());
    mel.mapv(|e| (e + LOG_FLOOR).ln())
}

/// MFCCs per frame: the first `N_MFCC` orthonormal DCT-II coefficients of the
/// log mel spectrum. Coefficient numbering starts at the 0th DCT term, so
/// "mfcc1" is the overall log-energy component.
pub fn mfcc(log_mel: &Array2<f64>) -> Array2<f64> {
    let dct = dct_ii_matrix(N_MELS);
    let reduced = dct.slice(ndarray::s![..N_MFCC, ..]);
    log_mel.dot(&reduced.t())
}

/// Onset strength envelope: half-wave-rectified first difference of the log
/// mel spectrogram, averaged across bands. The first frame has no
/// predecessor and scores 0.
pub fn onset_envelope(log_mel: &Array2<f64>) -> Array1<f64> {
    let n_frames = log_mel.nrows();
    let mut env = Array1::zeros(n_frames);
    for t in 1..n_frames {
        let mut acc = 0.0;
        for m in 0..log_mel.ncols() {
            acc += (log_mel[[t, m]] - log_mel[[t - 1, m]]).max(0.0);
        }
        env[t] = acc / log_mel.ncols() as f64;
    }
    env
}
