//! Spectrogram inversion and spectrogram noise augmentation.

mod griffin_lim;
mod noise;

use ndarray::Array2;

pub use griffin_lim::{GriffinLim, GriffinLimConfig};
pub use noise::{measured_snr_db, noise_inject, NoisePolicy};

use crate::data::Waveform;
use crate::error::Result;

/// Log-mel → 16 kHz waveform. Neural vocoders plug in behind this trait.
pub trait Vocoder: Send + Sync {
    fn invert(&self, mel: &Array2<f32>) -> Result<Waveform>;

    fn name(&self) -> &str;
}
