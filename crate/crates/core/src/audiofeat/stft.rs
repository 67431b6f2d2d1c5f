//! Short-time analysis grid and magnitude spectrogram.
//!
//! All features share one framing: frame 2048, hop 512, Hann window,
//! reflect-centered so frame `t` is centered on sample `t * hop` and the
//! frame count is `ceil(len / hop)`. Clips shorter than one frame are
//! zero-padded to frame length first.

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioClip, FRAME_LEN, HOP_LEN};

/// Magnitude spectrogram rows plus the frequency axis.
#[derive(Debug, Clone)]
pub struct SpectralFrameSeries {
    /// (frame, bin) magnitudes; 1025 bins for a 2048-point frame.
    pub frames: Array2<f64>,
    /// Frames per second.
    pub frame_rate: f64,
    /// Center frequency of each bin, strictly increasing up to Nyquist.
    pub bin_freqs: Vec<f64>,
}

impl SpectralFrameSeries {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }
}

/// Time-domain view of the shared analysis grid.
pub(crate) struct FrameGrid {
    padded: Vec<f64>,
    pub n_frames: usize,
}

impl FrameGrid {
    pub fn new(samples: &[f64]) -> Self {
        let mut signal: Vec<f64> = samples.to_vec();
        if signal.len() < FRAME_LEN {
            signal.resize(FRAME_LEN, 0.0);
        }
        let n_frames = signal.len().div_ceil(HOP_LEN);
        let pad = FRAME_LEN / 2;
        let len = signal.len();
        let mut padded = Vec::with_capacity(len + 2 * pad);
        // Reflect without repeating the edge sample; len >= FRAME_LEN > pad.
        for i in (1..=pad).rev() {
            padded.push(signal[i]);
        }
        padded.extend_from_slice(&signal);
        for i in 0..pad {
            padded.push(signal[len - 2 - i]);
        }
        Self { padded, n_frames }
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let start = t * HOP_LEN;
        &self.padded[start..start + FRAME_LEN]
    }
}

/// Periodic Hann window of length `n`.
pub(crate) fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude STFT over the shared grid.
pub fn stft(clip: &AudioClip) -> SpectralFrameSeries {
    stft_from_grid(&FrameGrid::new(&clip.samples), clip.sample_rate)
}

pub(crate) fn stft_from_grid(grid: &FrameGrid, sample_rate: u32) -> SpectralFrameSeries {
    let window = hann_window(FRAME_LEN);
    let n_bins = FRAME_LEN / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(FRAME_LEN);
    let mut frames = Array2::zeros((grid.n_frames, n_bins));
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LEN];
    for t in 0..grid.n_frames {
        for (slot, (&x, &w)) in buf.iter_mut().zip(grid.frame(t).iter().zip(&window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            frames[[t, k]] = buf[k].norm();
        }
    }

    let sr = f64::from(sample_rate);
    SpectralFrameSeries {
        frames,
        frame_rate: sr / HOP_LEN as f64,
        bin_freqs: (0..n_bins).map(|k| k as f64 * sr / FRAME_LEN as f64).collect(),
    }
}

/// Autocorrelation `r[lag] = sum_i x[i] * x[i + lag]` for `lag <= max_lag`,
/// computed through the frequency domain.
pub(crate) fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let fft_len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);

    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for (slot, &v) in buf.iter_mut().zip(x) {
        *slot = Complex::new(v, 0.0);
    }
    forward.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|lag| buf[lag].re / fft_len as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audiofeat::SAMPLE_RATE;

    fn clip_of(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn frame_count_is_ceil_len_over_hop() {
        let clip = clip_of(vec![0.1; 66150]);
        assert_eq!(stft(&clip).n_frames(), 130);
        let clip = clip_of(vec![0.1; 4096]);
        assert_eq!(stft(&clip).n_frames(), 8);
        // Shorter than one frame: zero-padded to frame length.
        let clip = clip_of(vec![0.1; 100]);
        assert_eq!(stft(&clip).n_frames(), 4);
    }

    #[test]
    fn dc_energy_lands_in_bin_zero() {
        let clip = clip_of(vec![1.0; 8192]);
        let series = stft(&clip);
        for t in 0..series.n_frames() {
            let row = series.frames.row(t);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, 0);
        }
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let sr = SAMPLE_RATE as f64;
        let samples: Vec<f64> = (0..22050)
            .map(|n| (2.0 * std::f64::consts::PI * 440.0 * n as f64 / sr).sin())
            .collect();
        let series = stft(&clip_of(samples));
        let expected = (440.0 * FRAME_LEN as f64 / sr).round() as usize;
        assert_eq!(expected, 41);
        // Interior frames; the reflected edges add a crease to the waveform.
        for t in 2..series.n_frames() - 2 {
            let row = series.frames.row(t);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, expected, "frame {t}");
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..3000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let series = stft(&clip_of(samples.clone()));

        // Independent path: replicate framing and window, then direct DFT.
        let mut signal = samples;
        let pad = FRAME_LEN / 2;
        let mut padded = Vec::new();
        for i in (1..=pad).rev() {
            padded.push(signal[i]);
        }
        padded.extend_from_slice(&signal);
        let len = signal.len();
        for i in 0..pad {
            padded.push(signal[len - 2 - i]);
        }
        signal = padded;
        let window = hann_window(FRAME_LEN);

        let scale: f64 = series.frames.iter().fold(0.0, |m, &v| m.max(v));
        for t in [0usize, 2, 5] {
            let frame: Vec<f64> = signal[t * HOP_LEN..t * HOP_LEN + FRAME_LEN]
                .iter()
                .zip(&window)
                .map(|(&x, &w)| x * w)
                .collect();
            for k in (0..series.n_bins()).step_by(97) {
                let mut re = 0.0;
                let mut im = 0.0;
                for (n, &x) in frame.iter().enumerate() {
                    let phase = -2.0 * std::f64::consts::PI * (k * n) as f64 / FRAME_LEN as f64;
                    re += x * phase.cos();
                    im += x * phase.sin();
                }
                let direct = (re * re + im * im).sqrt();
                let got = series.frames[[t, k]];
                assert!(
                    (got - direct).abs() <= 1e-6 * scale,
                    "frame {t} bin {k}: {got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = autocorrelation(&x, 40);
        for lag in 0..=40 {
            let direct: f64 = (0..x.len() - lag).map(|i| x[i] * x[i + lag]).sum();
            assert!((r[lag] - direct).abs() < 1e-8, "lag {lag}");
        }
    }
}
