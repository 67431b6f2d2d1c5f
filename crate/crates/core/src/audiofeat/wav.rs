//! WAV decoding: PCM 16-bit or 32-bit float, any channel count, resampled to
//! the analysis rate by windowed-sinc interpolation.

use std::path::Path;

use crate::error::{Error, Result};

use super::{AudioClip, SAMPLE_RATE};

/// Taps per side of the sinc kernel, in output-rate units.
const SINC_HALF_WIDTH: usize = 32;

/// Decode a RIFF/WAVE file to a mono clip at the analysis sample rate.
/// Channels are averaged; samples are clamped to `[-1, 1]` after resampling.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path.as_ref())
        .map_err(|e| Error::UnsupportedEncoding(e.to_string()))?;
    let spec = reader.spec();

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Audio(e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Audio(e.to_string()))?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "expected 16-bit PCM or 32-bit float, got {bits}-bit {format:?}"
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(Error::Audio("zero-length audio data".into()));
    }

    let channels = spec.channels.max(1) as usize;
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();

    let mut samples = resample(&mono, spec.sample_rate, SAMPLE_RATE);
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    AudioClip::new(samples, SAMPLE_RATE)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Windowed-sinc resampler. The kernel is a Hann-windowed sinc at the lower
/// of the two Nyquist frequencies; edges replicate and each output sample is
/// normalized by its kernel weight sum so DC passes at unit gain.
pub fn resample(input: &[f64], src_rate: u32, dst_rate: u32) -> Vec<f64> {
    if src_rate == dst_rate || input.is_empty() {
        return input.to_vec();
    }
    let ratio = f64::from(dst_rate) / f64::from(src_rate);
    let out_len = ((input.len() as f64) * ratio).round().max(1.0) as usize;
    let cutoff = ratio.min(1.0);
    let support = SINC_HALF_WIDTH as f64 / cutoff;
    let last = input.len() as isize - 1;

    (0..out_len)
        .map(|n| {
            let center = n as f64 / ratio;
            let lo = (center - support).ceil() as isize;
            let hi = (center + support).floor() as isize;
            let mut acc = 0.0;
            let mut weight_sum = 0.0;
            for j in lo..=hi {
                let t = j as f64 - center;
                let window = 0.5 * (1.0 + (std::f64::consts::PI * t / support).cos());
                let weight = cutoff * sinc(cutoff * t) * window;
                let sample = input[j.clamp(0, last) as usize];
                acc += weight * sample;
                weight_sum += weight;
            }
            if weight_sum.abs() > 1e-12 {
                acc / weight_sum
            } else {
                0.0
            }
        })
        .collect()
}
