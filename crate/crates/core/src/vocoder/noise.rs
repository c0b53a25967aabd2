//! Spectrogram noise injection for vocoder robustness training.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePolicy {
    /// Target signal-to-noise ratio in dB; `f64::INFINITY` disables injection.
    pub target_snr_db: f64,
    /// Samples whose index is a multiple of `period` are injected. Indexes
    /// count from 1, so N samples carry exactly floor(N / period) injections.
    pub period: u64,
    pub seed: u64,
    /// Magnitude floor of the log-mel representation; values at the floor
    /// count as zero magnitude.
    pub log_floor: f32,
}

impl Default for NoisePolicy {
    fn default() -> Self {
        Self {
            target_snr_db: 5.0,
            period: 10,
            seed: 0,
            log_floor: 1e-5,
        }
    }
}

impl NoisePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::config("noise period must be at least 1"));
        }
        if self.target_snr_db.is_nan() || self.target_snr_db == f64::NEG_INFINITY {
            return Err(Error::config("noise SNR must be finite or +inf"));
        }
        Ok(())
    }

    pub fn applies_to(&self, sample_index: u64) -> bool {
        self.target_snr_db.is_finite() && sample_index % self.period == 0
    }
}

/// Adds Gaussian noise in the linear-magnitude domain of a log-mel matrix.
///
/// Off-cycle indices return the input unchanged. On-cycle, the noise is scaled
/// so that the noise actually realized in the output (after clipping at zero
/// magnitude) has power `signal_power / 10^(snr/10)`, with both powers taken
/// over the whole matrix.
pub fn noise_inject(mel: &Array2<f32>, policy: &NoisePolicy, sample_index: u64) -> Result<Array2<f32>> {
    policy.validate()?;
    if mel.is_empty() {
        return Err(Error::shape("empty spectrogram"));
    }
    if !policy.applies_to(sample_index) {
        return Ok(mel.clone());
    }
    let floor = f64::from(policy.log_floor);
    let linear: Vec<f64> = mel.iter().map(|&m| to_linear(m, floor)).collect();
    let signal_power = linear.iter().map(|v| v * v).sum::<f64>() / linear.len() as f64;
    if signal_power <= 0.0 {
        return Err(Error::contract("cannot inject noise at a fixed SNR into a silent spectrogram"));
    }
    let target = signal_power / 10f64.powf(policy.target_snr_db / 10.0);

    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ sample_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let z: Vec<f64> = (0..linear.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let realized = |scale: f64| -> f64 {
        linear
            .iter()
            .zip(&z)
            .map(|(&s, &n)| {
                let d = (s + scale * n).max(0.0) - s;
                d * d
            })
            .sum::<f64>()
            / linear.len() as f64
    };

    // realized power is non-decreasing in the scale; bracket then bisect
    let mut hi = target.sqrt().max(1e-12);
    while realized(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if realized(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = 0.5 * (lo + hi);

    let values: Vec<f32> = linear
        .iter()
        .zip(&z)
        .map(|(&s, &n)| (((s + scale * n).max(0.0)) + floor).ln() as f32)
        .collect();
    Ok(Array2::from_shape_vec(mel.raw_dim(), values).expect("shape preserved"))
}

/// Linear magnitude of a log-mel value; values within f32 rounding of the
/// floor map to exactly zero.
fn to_linear(m: f32, floor: f64) -> f64 {
    let v = f64::from(m).exp() - floor;
    if v <= floor * 1e-5 {
        0.0
    } else {
        v
    }
}

/// Realized SNR in dB between a clean and a noisy log-mel matrix.
pub fn measured_snr_db(clean: &Array2<f32>, noisy: &Array2<f32>, log_floor: f32) -> f64 {
    let floor = f64::from(log_floor);
    let lin = |m: f32| to_linear(m, floor);
    let (mut ps, mut pn) = (0.0, 0.0);
    for (&c, &n) in clean.iter().zip(noisy.iter()) {
        let s = lin(c);
        ps += s * s;
        pn += (lin(n) - s).powi(2);
    }
    10.0 * (ps / pn).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mel() -> Array2<f32> {
        Array2::from_shape_fn((40, 20), |(t, m)| ((t as f32 * 0.3).sin() + (m as f32 * 0.2).cos()) - 1.5)
    }

    #[test]
    fn off_cycle_is_identity() {
        let m = mel();
        let out = noise_inject(&m, &NoisePolicy::default(), 3).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn disabled_policy_is_identity() {
        let policy = NoisePolicy {
            target_snr_db: f64::INFINITY,
            ..NoisePolicy::default()
        };
        assert_eq!(noise_inject(&mel(), &policy, 10).unwrap(), mel());
    }

    #[test]
    fn on_cycle_hits_target_snr() {
        let m = mel();
        let out = noise_inject(&m, &NoisePolicy::default(), 10).unwrap();
        assert_eq!(out.dim(), m.dim());
        let snr = measured_snr_db(&m, &out, 1e-5);
        assert!((snr - 5.0).abs() < 0.5, "snr {snr}");
    }

    #[test]
    fn silent_spectrogram_is_rejected() {
        let silent = Array2::from_elem((10, 8), 1e-5f32.ln());
        assert!(noise_inject(&silent, &NoisePolicy::default(), 10).is_err());
    }

    #[test]
    fn zero_period_is_rejected() {
        let policy = NoisePolicy {
            period: 0,
            ..NoisePolicy::default()
        };
        assert!(noise_inject(&mel(), &policy, 0).is_err());
    }
}
