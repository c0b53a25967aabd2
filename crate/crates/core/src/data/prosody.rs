//! Phoneme-level prosody targets and the [`AcousticFeatures`] record.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::features::FrameFeatures;
use crate::error::{Error, Result};

/// Mean of `frame_values` over each unit's span of frames.
///
/// With `exclude_zeros` (pitch mode) zero frames are treated as unvoiced and
/// left out of the mean; a unit with no voiced frames gets 0. Zero-duration
/// units get 0.
pub fn phoneme_average(frame_values: &[f32], durations: &[u32], exclude_zeros: bool) -> Result<Vec<f32>> {
    let total: u64 = durations.iter().map(|&d| u64::from(d)).sum();
    if total != frame_values.len() as u64 {
        return Err(Error::shape(format!(
            "durations sum to {total} but there are {} frames",
            frame_values.len()
        )));
    }
    let mut out = Vec::with_capacity(durations.len());
    let mut start = 0usize;
    for &d in durations {
        let span = &frame_values[start..start + d as usize];
        start += d as usize;
        let (sum, n) = span
            .iter()
            .filter(|&&v| !exclude_zeros || v != 0.0)
            .fold((0.0f64, 0usize), |(s, n), &v| (s + f64::from(v), n + 1));
        out.push(if n == 0 { 0.0 } else { (sum / n as f64) as f32 });
    }
    Ok(out)
}

/// Per-utterance normalization statistics. Pitch statistics are taken over
/// voiced frames only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyStats {
    pub pitch_mean: f32,
    pub pitch_std: f32,
    pub energy_mean: f32,
    pub energy_std: f32,
}

impl ProsodyStats {
    pub fn from_frames(pitch: &[f32], energy: &[f32]) -> Self {
        fn moments<'a>(values: impl Iterator<Item = &'a f32>) -> (f32, f32) {
            let v: Vec<f64> = values.map(|&x| f64::from(x)).collect();
            if v.is_empty() {
                return (0.0, 1.0);
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            let std = var.sqrt();
            (mean as f32, if std > 1e-6 { std as f32 } else { 1.0 })
        }
        let (pitch_mean, pitch_std) = moments(pitch.iter().filter(|&&p| p > 0.0));
        let (energy_mean, energy_std) = moments(energy.iter());
        Self {
            pitch_mean,
            pitch_std,
            energy_mean,
            energy_std,
        }
    }

    /// Normalized unit pitch; unvoiced units (0 Hz) map to 0.
    pub fn normalize_pitch(&self, unit_pitch: &[f32]) -> Vec<f32> {
        unit_pitch
            .iter()
            .map(|&p| {
                if p > 0.0 {
                    (p - self.pitch_mean) / self.pitch_std
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn normalize_energy(&self, unit_energy: &[f32]) -> Vec<f32> {
        unit_energy
            .iter()
            .map(|&e| (e - self.energy_mean) / self.energy_std)
            .collect()
    }

    pub fn denormalize_pitch(&self, normalized: &[f32]) -> Vec<f32> {
        normalized
            .iter()
            .map(|&p| p * self.pitch_std + self.pitch_mean)
            .collect()
    }

    pub fn denormalize_energy(&self, normalized: &[f32]) -> Vec<f32> {
        normalized
            .iter()
            .map(|&e| (e * self.energy_std + self.energy_mean).max(0.0))
            .collect()
    }
}

/// Speech-side training target for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatures {
    pub mel: Array2<f32>,
    pub frame_pitch: Vec<f32>,
    pub frame_energy: Vec<f32>,
    /// Frames per text unit; word boundaries carry 0.
    pub durations: Vec<u32>,
    /// Averaged pitch in Hz over voiced frames of each unit.
    pub unit_pitch: Vec<f32>,
    pub unit_energy: Vec<f32>,
    pub stats: ProsodyStats,
}

impl AcousticFeatures {
    pub fn from_alignment(frames: FrameFeatures, durations: Vec<u32>) -> Result<Self> {
        let unit_pitch = phoneme_average(&frames.pitch, &durations, true)?;
        let unit_energy = phoneme_average(&frames.energy, &durations, false)?;
        let stats = ProsodyStats::from_frames(&frames.pitch, &frames.energy);
        let feats = Self {
            mel: frames.mel,
            frame_pitch: frames.pitch,
            frame_energy: frames.energy,
            durations,
            unit_pitch,
            unit_energy,
            stats,
        };
        feats.validate()?;
        Ok(feats)
    }

    pub fn frames(&self) -> usize {
        self.mel.nrows()
    }

    pub fn units(&self) -> usize {
        self.durations.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.frames();
        if self.frame_pitch.len() != t || self.frame_energy.len() != t {
            return Err(Error::shape("frame-level vectors disagree with mel length"));
        }
        let total: u64 = self.durations.iter().map(|&d| u64::from(d)).sum();
        if total != t as u64 {
            return Err(Error::shape(format!(
                "durations sum to {total}, mel has {t} frames"
            )));
        }
        if self.unit_pitch.len() != self.units() || self.unit_energy.len() != self.units() {
            return Err(Error::shape("unit-level vectors disagree with durations"));
        }
        if self.unit_energy.iter().any(|&e| e < 0.0 || !e.is_finite()) {
            return Err(Error::contract("unit energy must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn normalized_pitch(&self) -> Vec<f32> {
        self.stats.normalize_pitch(&self.unit_pitch)
    }

    pub fn normalized_energy(&self) -> Vec<f32> {
        self.stats.normalize_energy(&self.unit_energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference for the unvoiced rule: expand each unit's frames explicitly.
    fn brute_force(frames: &[f32], durations: &[u32], exclude_zeros: bool) -> Vec<f32> {
        let mut owner = Vec::new();
        for (u, &d) in durations.iter().enumerate() {
            owner.extend(std::iter::repeat_n(u, d as usize));
        }
        (0..durations.len())
            .map(|u| {
                let picked: Vec<f64> = frames
                    .iter()
                    .zip(&owner)
                    .filter(|(v, &o)| o == u && !(exclude_zeros && **v == 0.0))
                    .map(|(v, _)| f64::from(*v))
                    .collect();
                if picked.is_empty() {
                    0.0
                } else {
                    (picked.iter().sum::<f64>() / picked.len() as f64) as f32
                }
            })
            .collect()
    }

    #[test]
    fn piecewise_constant() {
        assert_eq!(phoneme_average(&[2., 2., 4., 4.], &[2, 2], false).unwrap(), vec![2., 4.]);
    }

    #[test]
    fn unvoiced_frames_are_excluded() {
        let frames = [0., 100., 0., 0.];
        let got = phoneme_average(&frames, &[2, 2], true).unwrap();
        assert_eq!(got, vec![100., 0.]);
        assert_eq!(got, brute_force(&frames, &[2, 2], true));
    }

    #[test]
    fn zero_duration_unit_gets_zero() {
        assert_eq!(phoneme_average(&[1., 1., 1., 1.], &[0, 4], false).unwrap(), vec![0., 1.]);
    }

    #[test]
    fn mismatch_is_a_shape_error() {
        assert!(matches!(phoneme_average(&[1., 2.], &[1, 2], false), Err(Error::Shape(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn matches_brute_force(
            durations in prop::collection::vec(0u32..6, 1..12),
            seed in any::<u64>(),
        ) {
            let t: usize = durations.iter().sum::<u32>() as usize;
            let mut state = seed;
            let frames: Vec<f32> = (0..t).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if state >> 62 == 0 { 0.0 } else { ((state >> 40) % 500) as f32 }
            }).collect();
            for exclude in [false, true] {
                prop_assert_eq!(
                    phoneme_average(&frames, &durations, exclude).unwrap(),
                    brute_force(&frames, &durations, exclude)
                );
            }
        }
    }

    #[test]
    fn normalization_round_trips_voiced_units() {
        let stats = ProsodyStats::from_frames(&[0., 100., 200., 0.], &[1., 2., 3., 4.]);
        assert_eq!(stats.pitch_mean, 150.0);
        let n = stats.normalize_pitch(&[100., 0., 200.]);
        assert_eq!(n, vec![-1.0, 0.0, 1.0]);
        assert_eq!(stats.denormalize_pitch(&[-1.0, 1.0]), vec![100.0, 200.0]);
    }
}
