use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureConfig, FeatureExtractor, Waveform};
use crate::error::{Error, Result};
use crate::vocoder::Vocoder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GriffinLimConfig {
    pub iterations: usize,
    /// Fast Griffin-Lim momentum; 0 gives the classic algorithm.
    pub momentum: f32,
    /// Multiplicative-update iterations for the mel → linear NNLS solve.
    pub nnls_iterations: usize,
    pub seed: u64,
}

impl Default for GriffinLimConfig {
    fn default() -> Self {
        Self {
            iterations: 64,
            momentum: 0.99,
            nnls_iterations: 200,
            seed: 0,
        }
    }
}

/// Mel spectrogram inversion by phase reconstruction.
#[derive(Debug, Clone)]
pub struct GriffinLim {
    config: GriffinLimConfig,
    extractor: FeatureExtractor,
}

impl GriffinLim {
    pub fn new(features: FeatureConfig, config: GriffinLimConfig) -> Self {
        Self {
            config,
            extractor: FeatureExtractor::new(features),
        }
    }

    /// Non-negative least squares estimate of the linear magnitude spectrogram.
    fn mel_to_linear(&self, mel: &Array2<f32>) -> Array2<f32> {
        let fb = self.extractor.filterbank();
        let target = mel.mapv(f32::exp);
        let numer = target.dot(fb);
        let mut s = numer.mapv(|v| v.max(1e-10));
        for _ in 0..self.config.nnls_iterations {
            let denom = s.dot(&fb.t()).dot(fb);
            ndarray::Zip::from(&mut s)
                .and(&numer)
                .and(&denom)
                .for_each(|s, &n, &d| *s *= n / (d + 1e-12));
        }
        s
    }

    pub fn invert(&self, mel: &Array2<f32>) -> Result<Waveform> {
        let cfg = self.extractor.config();
        if mel.ncols() != cfg.n_mels {
            return Err(Error::shape(format!(
                "mel has {} bins, vocoder expects {}",
                mel.ncols(),
                cfg.n_mels
            )));
        }
        if mel.nrows() == 0 {
            return Ok(Waveform::new(Vec::new(), cfg.sample_rate));
        }
        let magnitude = self.mel_to_linear(mel);
        let stft = self.extractor.stft();
        // (T - 1) * hop samples re-analyse to exactly T frames
        let length = (mel.nrows() - 1) * cfg.hop;
        if length == 0 {
            return Ok(Waveform::new(Vec::new(), cfg.sample_rate));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut phase: Vec<Vec<Complex32>> = (0..mel.nrows())
            .map(|_| {
                (0..stft.bins())
                    .map(|_| Complex32::from_polar(1.0, rng.random_range(0.0..std::f32::consts::TAU)))
                    .collect()
            })
            .collect();
        let apply = |phase: &[Vec<Complex32>]| -> Vec<Vec<Complex32>> {
            phase
                .iter()
                .zip(magnitude.rows())
                .map(|(p, m)| p.iter().zip(m.iter()).map(|(c, &a)| c * a).collect())
                .collect()
        };
        let mut previous: Option<Vec<Vec<Complex32>>> = None;
        for _ in 0..self.config.iterations {
            let signal = stft.synthesize(&apply(&phase), length);
            let rebuilt = stft.analyze(&signal);
            let accelerated: Vec<Vec<Complex32>> = match &previous {
                Some(prev) => rebuilt
                    .iter()
                    .zip(prev)
                    .map(|(r, p)| {
                        r.iter()
                            .zip(p)
                            .map(|(&c, &q)| c + (c - q) * self.config.momentum)
                            .collect()
                    })
                    .collect(),
                None => rebuilt.clone(),
            };
            for (row, acc) in phase.iter_mut().zip(&accelerated) {
                for (p, c) in row.iter_mut().zip(acc) {
                    let n = c.norm();
                    *p = if n > 1e-12 { c / n } else { Complex32::new(1.0, 0.0) };
                }
            }
            previous = Some(rebuilt);
        }
        let samples = stft.synthesize(&apply(&phase), length);
        Ok(Waveform::new(samples, cfg.sample_rate))
    }
}

impl Vocoder for GriffinLim {
    fn invert(&self, mel: &Array2<f32>) -> Result<Waveform> {
        GriffinLim::invert(self, mel)
    }

    fn name(&self) -> &str {
        "griffin-lim"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_length_from_frame_count() {
        let gl = GriffinLim::new(FeatureConfig::default(), GriffinLimConfig { iterations: 2, ..Default::default() });
        let mel = Array2::from_elem((63, 80), -3.0f32);
        let wav = gl.invert(&mel).unwrap();
        let n = wav.samples.len() as i64;
        assert!((n - 16128).abs() <= 256, "{n}");
    }

    #[test]
    fn floor_mel_is_near_silent() {
        let gl = GriffinLim::new(FeatureConfig::default(), GriffinLimConfig { iterations: 8, ..Default::default() });
        let mel = Array2::from_elem((30, 80), 1e-5f32.ln());
        let wav = gl.invert(&mel).unwrap();
        let peak = wav.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        assert!(peak < 1e-3, "peak {peak}");
    }

    #[test]
    fn bin_mismatch_is_a_shape_error() {
        let gl = GriffinLim::new(FeatureConfig::default(), GriffinLimConfig::default());
        assert!(matches!(gl.invert(&Array2::zeros((5, 40))), Err(Error::Shape(_))));
    }
}
