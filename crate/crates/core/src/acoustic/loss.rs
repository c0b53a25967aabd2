use std::collections::BTreeSet;

use candle_core::{DType, Device, Tensor};
use ndarray::Array2;

use crate::acoustic::model::{Variances, VarianceTargets};
use crate::data::AcousticFeatures;
use crate::error::{Error, Result};
use crate::nn::{host, scalar};

/// Gold spectrogram and per-unit targets for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTarget {
    pub mel: Array2<f32>,
    pub variances: VarianceTargets,
    pub boundary_indexes: BTreeSet<usize>,
}

impl TrainingTarget {
    pub fn from_features(features: &AcousticFeatures, boundary_indexes: &BTreeSet<usize>) -> Result<Self> {
        if let Some(&b) = boundary_indexes.iter().find(|&&b| b >= features.units()) {
            return Err(Error::shape(format!("boundary {b} outside {} units", features.units())));
        }
        Ok(Self {
            mel: features.mel.clone(),
            variances: VarianceTargets {
                durations: features.durations.clone(),
                pitch: features.normalized_pitch(),
                energy: features.normalized_energy(),
            },
            boundary_indexes: boundary_indexes.clone(),
        })
    }

    /// Frames the decoder receives under teacher forcing.
    pub fn regulated_frames(&self) -> u64 {
        self.variances
            .durations
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.boundary_indexes.contains(i))
            .map(|(_, &d)| u64::from(d))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub mel: f64,
    pub duration: f64,
    pub pitch: f64,
    pub energy: f64,
}

impl LossComponents {
    pub fn total(&self) -> f64 {
        self.mel + self.duration + self.pitch + self.energy
    }

    pub fn named(&self) -> Vec<(String, f64)> {
        vec![
            ("mel_l1".into(), self.mel),
            ("duration_mse".into(), self.duration),
            ("pitch_mse".into(), self.pitch),
            ("energy_mse".into(), self.energy),
        ]
    }
}

fn masked_mse(pred: &Tensor, target: &[f32], keep: &[f32], count: f64, dtype: DType) -> Result<Tensor> {
    let n = target.len();
    let t = host(target, &[n], dtype, &Device::Cpu)?;
    let m = host(keep, &[n], dtype, &Device::Cpu)?;
    Ok((pred.sub(&t)?.sqr()?.mul(&m)?.sum_all()? / count)?)
}

/// L1 over the spectrogram plus MSE on log durations, pitch and energy.
/// Word-boundary units occupy no frames and are left out of the per-unit
/// terms.
pub fn tts_loss(pred_mel: &Tensor, variances: &Variances, gold: &TrainingTarget) -> Result<(Tensor, LossComponents)> {
    let dtype = pred_mel.dtype();
    let (t, m) = pred_mel.dims2()?;
    if (t, m) != gold.mel.dim() {
        return Err(Error::shape(format!(
            "predicted mel {t}×{m} does not match gold {:?}",
            gold.mel.dim()
        )));
    }
    let l = variances.log_durations.dim(0)?;
    let g = &gold.variances;
    if g.durations.len() != l || g.pitch.len() != l || g.energy.len() != l {
        return Err(Error::shape(format!("gold variances do not cover {l} units")));
    }
    let keep: Vec<f32> = (0..l)
        .map(|i| if gold.boundary_indexes.contains(&i) { 0.0 } else { 1.0 })
        .collect();
    let count = keep.iter().filter(|&&k| k > 0.0).count();
    if count == 0 {
        return Err(Error::shape("no frame-bearing units in the target"));
    }
    let count = count as f64;

    let gold_mel: Vec<f32> = gold.mel.iter().copied().collect();
    let gold_mel = host(&gold_mel, &[t, m], dtype, &Device::Cpu)?;
    let mel = pred_mel.sub(&gold_mel)?.abs()?.mean_all()?;
    let log_d: Vec<f32> = g.durations.iter().map(|&d| (f64::from(d) + 1.0).ln() as f32).collect();
    let duration = masked_mse(&variances.log_durations, &log_d, &keep, count, dtype)?;
    let pitch = masked_mse(&variances.pitch, &g.pitch, &keep, count, dtype)?;
    let energy = masked_mse(&variances.energy, &g.energy, &keep, count, dtype)?;
    let components = LossComponents {
        mel: scalar(&mel)?,
        duration: scalar(&duration)?,
        pitch: scalar(&pitch)?,
        energy: scalar(&energy)?,
    };
    let total = (((mel + duration)? + pitch)? + energy)?;
    Ok((total, components))
}
