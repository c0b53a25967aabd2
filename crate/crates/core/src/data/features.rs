//! Frame-level acoustic features: log-mel spectrogram, pitch and energy.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex32;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::audio::{Waveform, SAMPLE_RATE};
use crate::dsp::{mel_filterbank, Stft};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f32,
    pub fmax: f32,
    pub pitch_min: f32,
    pub pitch_max: f32,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f32,
    /// Frames whose RMS falls below this are unvoiced regardless of periodicity.
    pub silence_rms: f32,
    /// Floor applied before taking the natural log of mel magnitudes.
    pub log_floor: f32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            n_fft: 1024,
            hop: 256,
            n_mels: 80,
            fmin: 0.0,
            fmax: 8000.0,
            pitch_min: 50.0,
            pitch_max: 600.0,
            voicing_threshold: 0.5,
            silence_rms: 1e-3,
            log_floor: 1e-5,
        }
    }
}

impl FeatureConfig {
    /// Stable hash of every field; part of cache keys and checkpoints.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        1 + n_samples / self.hop
    }

    pub fn log_floor_value(&self) -> f32 {
        self.log_floor.ln()
    }
}

/// Hop-aligned per-frame features of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    /// T × n_mels natural-log mel magnitudes.
    pub mel: Array2<f32>,
    /// Hz, 0 for unvoiced frames.
    pub pitch: Vec<f32>,
    /// L2 norm of the linear magnitude spectrum of each frame.
    pub energy: Vec<f32>,
}

impl FrameFeatures {
    pub fn frames(&self) -> usize {
        self.mel.nrows()
    }
}

/// Reusable extractor; holds the FFT plans and filterbank for a config.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    stft: Stft,
    filterbank: Array2<f32>,
    pitch: PitchTracker,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Self {
        let stft = Stft::new(config.n_fft, config.hop);
        let filterbank = mel_filterbank(
            config.sample_rate,
            config.n_fft,
            config.n_mels,
            config.fmin,
            config.fmax,
        );
        let pitch = PitchTracker::new(&config);
        Self {
            config,
            stft,
            filterbank,
            pitch,
        }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn filterbank(&self) -> &Array2<f32> {
        &self.filterbank
    }

    /// Linear magnitudes to log-mel, T × bins → T × n_mels.
    pub fn linear_to_log_mel(&self, linear: &Array2<f32>) -> Array2<f32> {
        let floor = self.config.log_floor;
        linear
            .dot(&self.filterbank.t())
            .mapv(|v| v.max(floor).ln())
    }

    pub fn extract(&self, audio: &Waveform) -> Result<FrameFeatures> {
        if audio.sample_rate != self.config.sample_rate {
            return Err(Error::shape(format!(
                "expected {} Hz audio, got {} Hz",
                self.config.sample_rate, audio.sample_rate
            )));
        }
        if audio.samples.is_empty() {
            return Err(Error::contract("empty waveform"));
        }
        if audio.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::contract("waveform contains non-finite samples"));
        }
        let linear = self.stft.magnitude(&audio.samples);
        let mel = self.linear_to_log_mel(&linear);
        let energy = linear
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f32>().sqrt())
            .collect();
        let padded = self.stft.pad(&audio.samples);
        let pitch = (0..mel.nrows())
            .map(|t| {
                let start = t * self.config.hop;
                self.pitch.estimate(&padded[start..start + self.config.n_fft])
            })
            .collect();
        Ok(FrameFeatures { mel, pitch, energy })
    }
}

/// One-shot helper around [`FeatureExtractor`].
pub fn extract_features(audio: &Waveform, config: &FeatureConfig) -> Result<FrameFeatures> {
    FeatureExtractor::new(config.clone()).extract(audio)
}

/// Normalized-autocorrelation pitch tracker.
///
/// For lag τ the score is `Σ x[n]x[n+τ] / sqrt(Σ x[n]² · Σ x[n+τ]²)` over the
/// overlapping part of the frame. The chosen period is the smallest local
/// maximum scoring within 90 % of the best lag (suppresses sub-octave errors),
/// refined by parabolic interpolation.
#[derive(Clone)]
pub struct PitchTracker {
    sample_rate: f32,
    min_lag: usize,
    max_lag: usize,
    threshold: f32,
    silence_rms: f32,
    fft_len: usize,
    forward: Arc<dyn Fft<f32>>,
    inverse: Arc<dyn Fft<f32>>,
}

impl std::fmt::Debug for PitchTracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PitchTracker")
            .field("min_lag", &self.min_lag)
            .field("max_lag", &self.max_lag)
            .finish()
    }
}

impl PitchTracker {
    pub fn new(config: &FeatureConfig) -> Self {
        let sr = config.sample_rate as f32;
        let fft_len = (2 * config.n_fft).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            sample_rate: sr,
            min_lag: (sr / config.pitch_max).floor().max(2.0) as usize,
            max_lag: ((sr / config.pitch_min).ceil() as usize).min(config.n_fft / 2),
            threshold: config.voicing_threshold,
            silence_rms: config.silence_rms,
            fft_len,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        }
    }

    pub fn estimate(&self, frame: &[f32]) -> f32 {
        let n = frame.len();
        let rms = (frame.iter().map(|v| v * v).sum::<f32>() / n as f32).sqrt();
        if rms < self.silence_rms || self.max_lag + 2 >= n {
            return 0.0;
        }
        let mut buf: Vec<Complex32> = frame
            .iter()
            .map(|&v| Complex32::new(v, 0.0))
            .chain(std::iter::repeat(Complex32::new(0.0, 0.0)))
            .take(self.fft_len)
            .collect();
        self.forward.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex32::new(c.norm_sqr(), 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f32;

        // prefix sums of squares for the two overlapping windows
        let mut prefix = vec![0.0f64; n + 1];
        for (i, &v) in frame.iter().enumerate() {
            prefix[i + 1] = prefix[i] + f64::from(v) * f64::from(v);
        }
        let score = |lag: usize| -> f32 {
            let head = prefix[n - lag];
            let tail = prefix[n] - prefix[lag];
            let denom = (head * tail).sqrt();
            if denom <= 1e-12 {
                0.0
            } else {
                (f64::from(buf[lag].re * scale) / denom) as f32
            }
        };
        let lo = self.min_lag.saturating_sub(1).max(1);
        let hi = self.max_lag + 1;
        let scores: Vec<f32> = (lo..=hi).map(score).collect();
        let at = |lag: usize| scores[lag - lo];

        let best = (self.min_lag..=self.max_lag)
            .map(at)
            .fold(f32::NEG_INFINITY, f32::max);
        if best < self.threshold {
            return 0.0;
        }
        let lag = (self.min_lag..=self.max_lag)
            .find(|&l| {
                let v = at(l);
                v >= 0.9 * best && v >= at(l - 1) && v >= at(l + 1)
            })
            .unwrap_or(self.min_lag);
        let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
        let denom = a - 2.0 * b + c;
        let offset = if denom.abs() > 1e-9 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        self.sample_rate / (lag as f32 + offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f32, secs: f32) -> Waveform {
        let n = (secs * 16000.0) as usize;
        Waveform::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * std::f32::consts::PI * freq * i as f32 / 16000.0).sin())
                .collect(),
            16000,
        )
    }

    #[test]
    fn silence_is_unvoiced_and_energyless() {
        let f = extract_features(&Waveform::new(vec![0.0; 16000], 16000), &FeatureConfig::default())
            .unwrap();
        assert_eq!(f.frames(), 63);
        assert!(f.pitch.iter().all(|&p| p == 0.0));
        assert!(f.energy.iter().all(|&e| e.abs() < 1e-6));
        let floor = FeatureConfig::default().log_floor_value();
        assert!(f.mel.iter().all(|&m| (m - floor).abs() < 1e-4));
    }

    #[test]
    fn pure_tone_pitch() {
        for freq in [110.0, 220.0, 440.0] {
            let f = extract_features(&tone(freq, 1.0), &FeatureConfig::default()).unwrap();
            let voiced: Vec<f32> = f.pitch.iter().copied().filter(|&p| p > 0.0).collect();
            assert!(voiced.len() > 55, "{freq}: only {} voiced frames", voiced.len());
            for p in voiced {
                assert!((p - freq).abs() <= 5.0, "{freq}: estimated {p}");
            }
        }
    }

    #[test]
    fn frame_counts_are_hop_aligned() {
        let f = extract_features(&tone(220.0, 1.0), &FeatureConfig::default()).unwrap();
        assert_eq!(f.frames(), 63);
        assert_eq!(f.pitch.len(), 63);
        assert_eq!(f.energy.len(), 63);
        assert_eq!(f.mel.ncols(), 80);
    }

    #[test]
    fn rejects_wrong_rate_and_empty_audio() {
        let cfg = FeatureConfig::default();
        assert!(extract_features(&Waveform::new(vec![0.0; 100], 8000), &cfg).is_err());
        assert!(extract_features(&Waveform::new(vec![], 16000), &cfg).is_err());
    }

    #[test]
    fn config_hash_tracks_fields() {
        let a = FeatureConfig::default();
        let b = FeatureConfig {
            hop: 200,
            ..a.clone()
        };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), FeatureConfig::default().hash());
    }
}
