//! Audio feature suite: framewise descriptors of a mono clip summarized to
//! per-clip mean and standard deviation, plus batch extraction over a corpus.

mod mel;
mod pitch;
mod spectral;
mod stft;
mod tempo;
mod wav;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use mel::{dct_ii_matrix, log_mel_spectrogram, mel_filterbank, mfcc, onset_envelope};
pub use pitch::{analyze_frame, VoicedFrame, VOICING_THRESHOLD};
pub use spectral::{bandwidth, centroid, chroma, contrast, flatness, rolloff, tonnetz};
pub use stft::{stft, SpectralFrameSeries};
pub use tempo::tempo;
pub use wav::{load_wav, resample};

/// Analysis sample rate; decoded audio is resampled here.
pub const SAMPLE_RATE: u32 = 22050;
/// Analysis frame length in samples.
pub const FRAME_LEN: usize = 2048;
/// Hop between frame centers in samples.
pub const HOP_LEN: usize = 512;
/// Mel bands for the MFCC/onset pipeline.
pub const N_MELS: usize = 128;
/// Retained cepstral coefficients; "mfcc1" is the 0th DCT term.
pub const N_MFCC: usize = 13;
/// Floor added before logarithms of spectral energy.
pub const LOG_FLOOR: f64 = 1e-10;

/// Minimum clip length accepted by `extract_features`, in seconds.
pub const MIN_CLIP_SECONDS: f64 = 0.5;

/// A mono audio signal. Samples are nominally in `[-1, 1]` when decoded
/// from a file; synthetic clips only need to be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Audio("clip has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Audio("clip contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Canonical feature column order: every family as `_mean` and `_std`
/// except `tempo`, which is a single scalar per clip.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    fn push_pair(names: &mut Vec<String>, base: &str) {
        names.push(format!("{base}_mean"));
        names.push(format!("{base}_std"));
    }
    NAMES.get_or_init(|| {
        let mut names = Vec::new();
        for base in [
            "zcr",
            "rms",
            "spectral_centroid",
            "spectral_rolloff",
            "spectral_bandwidth",
            "spectral_flatness",
        ] {
            push_pair(&mut names, base);
        }
        for i in 1..=12 {
            push_pair(&mut names, &format!("chroma{i}"));
        }
        for i in 1..=N_MFCC {
            push_pair(&mut names, &format!("mfcc{i}"));
        }
        push_pair(&mut names, "hnr");
        names.push("tempo".to_string());
        push_pair(&mut names, "onset_strength");
        push_pair(&mut names, "pitch");
        for i in 1..=7 {
            push_pair(&mut names, &format!("contrast{i}"));
        }
        for i in 1..=6 {
            push_pair(&mut names, &format!("tonnetz{i}"));
        }
        names
    })
}

/// Summarized per-clip features keyed by canonical column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatureVector {
    values: BTreeMap<String, f64>,
}

impl AudioFeatureVector {
    fn new(values: BTreeMap<String, f64>) -> Result<Self> {
        for name in feature_names() {
            match values.get(name) {
                Some(v) if v.is_finite() => {}
                Some(v) => return Err(Error::Audio(format!("feature {name} is not finite: {v}"))),
                None => return Err(Error::Audio(format!("feature {name} missing"))),
            }
        }
        Ok(Self { values })
    }

    /// Build from an externally produced column map (for example a CSV row).
    pub fn from_map(values: BTreeMap<String, f64>) -> Result<Self> {
        Self::new(values)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// Values in canonical column order.
    pub fn ordered_values(&self) -> Vec<f64> {
        feature_names().iter().map(|n| self.values[n]).collect()
    }
}

/// Mean and population standard deviation; empty input summarizes to (0, 0).
fn summarize(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn zcr(frame: &[f64]) -> f64 {
    let changes = frame
        .windows(2)
        .filter(|w| (w[0] < 0.0) != (w[1] < 0.0))
        .count();
    changes as f64 / frame.len() as f64
}

fn rms(frame: &[f64]) -> f64 {
    (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}

/// Extract the full feature vector of one clip. Clips shorter than half a
/// second are rejected; pitch and HNR summarize voiced frames only and are
/// zero when nothing is voiced.
pub fn extract_features(clip: &AudioClip) -> Result<AudioFeatureVector> {
    let min_len = (MIN_CLIP_SECONDS * f64::from(clip.sample_rate)).round() as usize;
    if clip.samples.len() < min_len {
        return Err(Error::Audio(format!(
            "clip too short: {} samples, need at least {min_len}",
            clip.samples.len()
        )));
    }

    let grid = stft::FrameGrid::new(&clip.samples);
    let series = stft::stft_from_grid(&grid, clip.sample_rate);
    let n_frames = series.n_frames();

    let mut zcrs = Vec::with_capacity(n_frames);
    let mut rmss = Vec::with_capacity(n_frames);
    let mut centroids = Vec::with_capacity(n_frames);
    let mut rolloffs = Vec::with_capacity(n_frames);
    let mut bandwidths = Vec::with_capacity(n_frames);
    let mut flatnesses = Vec::with_capacity(n_frames);
    let mut chroma_frames = Vec::with_capacity(n_frames);
    let mut tonnetz_frames = Vec::with_capacity(n_frames);
    let mut contrast_frames = Vec::with_capacity(n_frames);
    let mut pitches = Vec::new();
    let mut hnrs = Vec::new();

    for t in 0..n_frames {
        let frame = grid.frame(t);
        zcrs.push(zcr(frame));
        rmss.push(rms(frame));

        let row = series.frames.row(t);
        let magnitudes = row.as_slice().expect("contiguous row");
        let c = spectral::centroid(magnitudes, &series.bin_freqs);
        centroids.push(c);
        rolloffs.push(spectral::rolloff(magnitudes, &series.bin_freqs, 0.85));
        bandwidths.push(spectral::bandwidth(magnitudes, &series.bin_freqs, c));
        flatnesses.push(spectral::flatness(magnitudes));

        let chroma = spectral::chroma(magnitudes, &series.bin_freqs);
        tonnetz_frames.push(spectral::tonnetz(&chroma));
        chroma_frames.push(chroma);
        contrast_frames.push(spectral::contrast(magnitudes, &series.bin_freqs));

        if let Some(voiced) = pitch::analyze_frame(frame, clip.sample_rate) {
            pitches.push(voiced.pitch_hz);
            hnrs.push(voiced.hnr_db);
        }
    }

    let log_mel = mel::log_mel_spectrogram(&series);
    let mfccs = mel::mfcc(&log_mel);
    let onset = mel::onset_envelope(&log_mel);
    let bpm = tempo::tempo(&onset, series.frame_rate);

    let mut values = BTreeMap::new();
    let mut put_summary = |base: &str, data: &[f64]| {
        let (mean, std) = summarize(data);
        values.insert(format!("{base}_mean"), mean);
        values.insert(format!("{base}_std"), std);
    };

    put_summary("zcr", &zcrs);
    put_summary("rms", &rmss);
    put_summary("spectral_centroid", &centroids);
    put_summary("spectral_rolloff", &rolloffs);
    put_summary("spectral_bandwidth", &bandwidths);
    put_summary("spectral_flatness", &flatnesses);
    for class in 0..12 {
        let data: Vec<f64> = chroma_frames.iter().map(|c| c[class]).collect();
        put_summary(&format!("chroma{}", class + 1), &data);
    }
    for coeff in 0..N_MFCC {
        let data: Vec<f64> = (0..n_frames).map(|t| mfccs[[t, coeff]]).collect();
        put_summary(&format!("mfcc{}", coeff + 1), &data);
    }
    put_summary("hnr", &hnrs);
    put_summary("pitch", &pitches);
    put_summary("onset_strength", onset.as_slice().expect("contiguous envelope"));
    for i in 0..7 {
        let data: Vec<f64> = contrast_frames.iter().map(|c| c[i]).collect();
        put_summary(&format!("contrast{}", i + 1), &data);
    }
    for i in 0..6 {
        let data: Vec<f64> = tonnetz_frames.iter().map(|c| c[i]).collect();
        put_summary(&format!("tonnetz{}", i + 1), &data);
    }
    values.insert("tempo".to_string(), bpm);

    AudioFeatureVector::new(values)
}

/// Feature table for every post that carries audio, plus per-post failures.
/// A failed file never aborts the batch.
#[derive(Debug, Clone, Default)]
pub struct AudioSummary {
    pub rows: BTreeMap<String, AudioFeatureVector>,
    pub failures: Vec<(String, String)>,
}

/// Extract features for every post with an `audio_path`, in parallel over a
/// bounded worker pool. Results are keyed by post id, so assembly order does
/// not matter.
pub fn summarize_corpus_audio(corpus: &Corpus, workers: usize) -> Result<AudioSummary> {
    use rayon::prelude::*;

    let jobs: Vec<(String, String)> = corpus
        .posts()
        .iter()
        .filter_map(|p| p.audio_path.as_ref().map(|path| (p.id.clone(), path.clone())))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Audio(format!("worker pool: {e}")))?;

    let results: Vec<(String, std::result::Result<AudioFeatureVector, String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(id, path)| {
                let outcome = load_wav(path)
                    .and_then(|clip| extract_features(&clip))
                    .map_err(|e| e.to_string());
                (id.clone(), outcome)
            })
            .collect()
    });

    let mut summary = AudioSummary::default();
    for (id, outcome) in results {
        match outcome {
            Ok(vector) => {
                summary.rows.insert(id, vector);
            }
            Err(message) => summary.failures.push((id, message)),
        }
    }
    summary.failures.sort();
    Ok(summary)
}

/// Write a feature table as CSV: `id` column then the canonical feature
/// columns.
pub fn write_feature_csv(
    rows: &BTreeMap<String, AudioFeatureVector>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["id".to_string()];
    header.extend(feature_names().iter().cloned());
    writer.write_record(&header)?;
    for (id, vector) in rows {
        let mut record = vec![id.clone()];
        record.extend(vector.ordered_values().iter().map(|v| format!("{v:.12e}")));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a feature table written by [`write_feature_csv`].
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, AudioFeatureVector>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::InvalidInput("feature CSV must start with an id column".into()));
    }
    let mut rows = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record
            .get(0)
            .ok_or_else(|| Error::InvalidInput("empty feature CSV record".into()))?
            .to_string();
        let mut values = BTreeMap::new();
        for (name, field) in header[1..].iter().zip(record.iter().skip(1)) {
            let value: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad value {field:?} for {name}")))?;
            values.insert(name.clone(), value);
        }
        rows.insert(id, AudioFeatureVector::from_map(values)?);
    }
    Ok(rows)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sine_clip(freq: f64, seconds: f64, amplitude: f64) -> AudioClip {
        let sr = f64::from(SAMPLE_RATE);
        let samples = (0..(seconds * sr) as usize)
            .map(|n| amplitude * (2.0 * std::f64::consts::PI * freq * n as f64 / sr).sin())
            .collect();
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    pub(crate) fn noise_clip(seconds: f64, amplitude: f64, seed: u64) -> AudioClip {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = (seconds * f64::from(SAMPLE_RATE)) as usize;
        let samples = (0..n).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn sine_features_match_analytic_values() {
        let clip = sine_clip(440.0, 3.0, 1.0);
        let features = extract_features(&clip).unwrap();
        let expected_zcr = 2.0 * 440.0 / f64::from(SAMPLE_RATE);
        assert!((features.get("zcr_mean").unwrap() - expected_zcr).abs() < 0.002);
        assert!((features.get("rms_mean").unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
        assert!((features.get("spectral_centroid_mean").unwrap() - 440.0).abs() < 15.0);
        assert!((features.get("pitch_mean").unwrap() - 440.0).abs() < 2.0);
        assert!(features.get("spectral_flatness_mean").unwrap() <= 0.01);
    }

    #[test]
    fn silence_features_are_zero() {
        let clip = AudioClip::new(vec![0.0; SAMPLE_RATE as usize], SAMPLE_RATE).unwrap();
        let features = extract_features(&clip).unwrap();
        assert_eq!(features.get("zcr_mean").unwrap(), 0.0);
        assert_eq!(features.get("rms_mean").unwrap(), 0.0);
        assert_eq!(features.get("onset_strength_mean").unwrap(), 0.0);
        assert_eq!(features.get("spectral_centroid_mean").unwrap(), 0.0);
        // No voiced frames.
        assert_eq!(features.get("pitch_mean").unwrap(), 0.0);
        assert_eq!(features.get("hnr_mean").unwrap(), 0.0);
        assert_eq!(features.get("tempo").unwrap(), 0.0);
    }

    #[test]
    fn white_noise_is_flat_and_inharmonic() {
        for seed in 0..10 {
            let clip = noise_clip(1.0, 0.8, seed);
            let features = extract_features(&clip).unwrap();
            let flatness = features.get("spectral_flatness_mean").unwrap();
            assert!(flatness >= 0.5, "seed {seed}: flatness {flatness}");
            let hnr = features.get("hnr_mean").unwrap();
            assert!(hnr <= 5.0, "seed {seed}: hnr {hnr}");
        }
    }

    #[test]
    fn click_train_tempo_and_onsets() {
        let sr = SAMPLE_RATE as usize;
        let mut samples = vec![0.0; 10 * sr];
        let mut pos = 0;
        while pos < samples.len() {
            for i in 0..32.min(samples.len() - pos) {
                samples[pos + i] = 1.0;
            }
            pos += sr / 2; // 2 clicks per second = 120 BPM
        }
        let clip = AudioClip::new(samples, SAMPLE_RATE).unwrap();
        let features = extract_features(&clip).unwrap();
        let bpm = features.get("tempo").unwrap();
        assert!((bpm - 120.0).abs() <= 3.0, "tempo {bpm}");
        assert!(features.get("onset_strength_mean").unwrap() > 0.0);
    }

    #[test]
    fn too_short_clip_is_rejected() {
        let clip = AudioClip::new(vec![0.1; 1000], SAMPLE_RATE).unwrap();
        assert!(matches!(extract_features(&clip), Err(Error::Audio(_))));
    }

    #[test]
    fn amplitude_scaling_invariants() {
        let base = noise_clip(1.0, 0.3, 42);
        let scaled =
            AudioClip::new(base.samples.iter().map(|s| s * 2.0).collect(), SAMPLE_RATE).unwrap();
        let f1 = extract_features(&base).unwrap();
        let f2 = extract_features(&scaled).unwrap();

        let close = |name: &str| {
            let (a, b) = (f1.get(name).unwrap(), f2.get(name).unwrap());
            assert!(
                (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0),
                "{name}: {a} vs {b}"
            );
        };
        for name in [
            "zcr_mean",
            "spectral_centroid_mean",
            "spectral_rolloff_mean",
            "spectral_bandwidth_mean",
            "spectral_flatness_mean",
            "pitch_mean",
            "tempo",
            "chroma1_mean",
            "chroma7_mean",
            "tonnetz4_mean",
        ] {
            close(name);
        }
        let (r1, r2) = (f1.get("rms_mean").unwrap(), f2.get("rms_mean").unwrap());
        assert!((r2 - 2.0 * r1).abs() <= 1e-9 * r2.abs().max(1.0), "rms {r1} vs {r2}");
    }

    #[test]
    fn mfcc_shift_under_amplitude_scaling() {
        let base = noise_clip(1.0, 0.3, 7);
        let scaled =
            AudioClip::new(base.samples.iter().map(|s| s * 3.0).collect(), SAMPLE_RATE).unwrap();
        let f1 = extract_features(&base).unwrap();
        let f2 = extract_features(&scaled).unwrap();
        // Scaling shifts every log mel band by the same constant, which moves
        // only the 0th cepstral coefficient.
        assert!(f2.get("mfcc1_mean").unwrap() > f1.get("mfcc1_mean").unwrap());
        for i in 2..=N_MFCC {
            let name = format!("mfcc{i}_mean");
            let (a, b) = (f1.get(&name).unwrap(), f2.get(&name).unwrap());
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{name}: {a} vs {b}");
        }
    }

    #[test]
    fn corpus_summary_collects_failures_without_aborting() {
        use crate::corpus::{Platform, Post};
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.wav");
        {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: 22050,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            };
            let mut writer = hound::WavWriter::create(&good, spec).unwrap();
            for n in 0..22050 {
                let v = (0.4 * (2.0 * std::f64::consts::PI * 330.0 * n as f64 / 22050.0).sin()
                    * 32767.0) as i16;
                writer.write_sample(v).unwrap();
            }
            writer.finalize().unwrap();
        }
        let post = |id: &str, path: Option<String>| Post {
            id: id.into(),
            platform: Platform::Tiktok,
            text: String::new(),
            label: Some(0),
            emotions: None,
            lexicon_scores: None,
            audio_path: path,
            embedding: None,
        };
        let corpus = Corpus::new(vec![
            post("ok", Some(good.to_string_lossy().into_owned())),
            post("missing", Some(dir.path().join("nope.wav").to_string_lossy().into_owned())),
            post("noaudio", None),
        ])
        .unwrap();
        let summary = summarize_corpus_audio(&corpus, 2).unwrap();
        assert_eq!(summary.rows.len(), 1);
        assert!(summary.rows.contains_key("ok"));
        assert_eq!(summary.failures.len(), 1);
        assert_eq!(summary.failures[0].0, "missing");
    }

    #[test]
    fn feature_csv_round_trip() {
        let clip = sine_clip(220.0, 0.6, 0.5);
        let features = extract_features(&clip).unwrap();
        let mut rows = BTreeMap::new();
        rows.insert("post1".to_string(), features);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        write_feature_csv(&rows, &path).unwrap();
        let back = read_feature_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        for name in feature_names() {
            let a = rows["post1"].get(name).unwrap();
            let b = back["post1"].get(name).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{name}");
        }
    }
}
