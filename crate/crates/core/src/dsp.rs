//! Short-time Fourier analysis, mel filterbanks and helpers shared by the
//! feature extractor and the Griffin-Lim inverter.

use std::f32::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

pub fn hann(n: usize) -> Vec<f32> {
    // periodic Hann, matching the usual STFT convention
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f32 / n as f32).cos())
        .collect()
}

/// Centered STFT with zero padding of `n_fft / 2` on both sides.
///
/// A signal of `n` samples yields `1 + n / hop` frames.
#[derive(Clone)]
pub struct Stft {
    n_fft: usize,
    hop: usize,
    window: Vec<f32>,
    forward: Arc<dyn Fft<f32>>,
    inverse: Arc<dyn Fft<f32>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("n_fft", &self.n_fft)
            .field("hop", &self.hop)
            .finish()
    }
}

impl Stft {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            hop,
            window: hann(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        1 + n_samples / self.hop
    }

    /// Zero-padded signal such that frame `t` starts at `t * hop`.
    pub fn pad(&self, signal: &[f32]) -> Vec<f32> {
        let half = self.n_fft / 2;
        let frames = self.frame_count(signal.len());
        let len = (frames - 1) * self.hop + self.n_fft;
        let mut padded = vec![0.0; len.max(signal.len() + 2 * half)];
        padded[half..half + signal.len()].copy_from_slice(signal);
        padded
    }

    /// Complex spectrum, one row of `bins()` values per frame.
    pub fn analyze(&self, signal: &[f32]) -> Vec<Vec<Complex32>> {
        let padded = self.pad(signal);
        let frames = self.frame_count(signal.len());
        let mut buf = vec![Complex32::new(0.0, 0.0); self.n_fft];
        (0..frames)
            .map(|t| {
                let start = t * self.hop;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = Complex32::new(padded[start + i] * self.window[i], 0.0);
                }
                self.forward.process(&mut buf);
                buf[..self.bins()].to_vec()
            })
            .collect()
    }

    pub fn magnitude(&self, signal: &[f32]) -> Array2<f32> {
        let spec = self.analyze(signal);
        let mut out = Array2::zeros((spec.len(), self.bins()));
        for (t, row) in spec.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                out[[t, k]] = c.norm();
            }
        }
        out
    }

    /// Weighted overlap-add inverse of [`Stft::analyze`], trimmed to `length` samples.
    pub fn synthesize(&self, spec: &[Vec<Complex32>], length: usize) -> Vec<f32> {
        let half = self.n_fft / 2;
        let total = (spec.len().saturating_sub(1)) * self.hop + self.n_fft;
        let mut out = vec![0.0f32; total.max(length + half)];
        let mut norm = vec![0.0f32; out.len()];
        let mut buf = vec![Complex32::new(0.0, 0.0); self.n_fft];
        let scale = 1.0 / self.n_fft as f32;
        for (t, row) in spec.iter().enumerate() {
            buf[..self.bins()].copy_from_slice(row);
            for k in 1..self.n_fft - self.bins() + 1 {
                buf[self.n_fft - k] = row[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for i in 0..self.n_fft {
                let w = self.window[i];
                out[start + i] += buf[i].re * scale * w;
                norm[start + i] += w * w;
            }
        }
        out.iter()
            .zip(&norm)
            .skip(half)
            .take(length)
            .map(|(&x, &n)| if n > 1e-8 { x / n } else { 0.0 })
            .chain(std::iter::repeat(0.0))
            .take(length)
            .collect()
    }
}

fn hz_to_mel(f: f32) -> f32 {
    const F_SP: f32 = 200.0 / 3.0;
    const MIN_LOG_HZ: f32 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f32.ln() / 27.0;
    if f >= MIN_LOG_HZ {
        min_log_mel + (f / MIN_LOG_HZ).ln() / logstep
    } else {
        f / F_SP
    }
}

fn mel_to_hz(m: f32) -> f32 {
    const F_SP: f32 = 200.0 / 3.0;
    const MIN_LOG_HZ: f32 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f32.ln() / 27.0;
    if m >= min_log_mel {
        MIN_LOG_HZ * (logstep * (m - min_log_mel)).exp()
    } else {
        F_SP * m
    }
}

/// Slaney-style mel filterbank with area normalization, shape `n_mels × bins`.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize, fmin: f32, fmax: f32) -> Array2<f32> {
    let bins = n_fft / 2 + 1;
    let lo = hz_to_mel(fmin);
    let hi = hz_to_mel(fmax);
    let edges: Vec<f32> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f32 / (n_mels + 1) as f32))
        .collect();
    let freqs: Vec<f32> = (0..bins)
        .map(|k| k as f32 * sample_rate as f32 / n_fft as f32)
        .collect();
    let mut fb = Array2::zeros((n_mels, bins));
    for m in 0..n_mels {
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        let enorm = 2.0 / (r - l);
        for (k, &f) in freqs.iter().enumerate() {
            let up = (f - l) / (c - l);
            let down = (r - f) / (r - c);
            fb[[m, k]] = up.min(down).max(0.0) * enorm;
        }
    }
    fb
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_for_one_second() {
        let stft = Stft::new(1024, 256);
        assert_eq!(stft.frame_count(16000), 63);
        assert_eq!(stft.analyze(&vec![0.0; 16000]).len(), 63);
    }

    #[test]
    fn analysis_synthesis_is_identity() {
        let stft = Stft::new(512, 128);
        let x: Vec<f32> = (0..4000).map(|i| ((i as f32) * 0.05).sin() * 0.3).collect();
        let y = stft.synthesize(&stft.analyze(&x), x.len());
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(err < 1e-4, "max reconstruction error {err}");
    }

    #[test]
    fn filterbank_rows_are_nonnegative_and_nonempty() {
        let fb = mel_filterbank(16000, 1024, 80, 0.0, 8000.0);
        assert_eq!(fb.dim(), (80, 513));
        for row in fb.rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.sum() > 0.0);
        }
    }
}
