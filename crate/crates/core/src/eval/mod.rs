//! Evaluation harness: cross-lingual speaker similarity, accent transfer,
//! embedding projections and ASR-based intelligibility.

mod accent;
mod intelligibility;
mod projection;
mod similarity;

pub use accent::{accent_delta, AccentReport};
pub use intelligibility::{
    error_rate, intelligibility, AsrAdapter, CommandAsr, IntelligibilityItem, IntelligibilityOutcome,
    IntelligibilityRow, IntelligibilityTable, RateUnit,
};
pub use projection::{project2d, Projection, ProjectionMethod};
pub use similarity::{similarity_report, CellRecord, Reference, SimilarityReport, SpeakerSummary};

use crate::data::{Waveform, SAMPLE_RATE};
use crate::error::Result;
use crate::pipeline::TtsSystem;
use crate::speaker::{embed, SpeakerEmbedder, MIN_EMBED_SECS};
use crate::LanguageId;

/// Default number of texts per (speaker, language) cell.
pub const DEFAULT_TEXTS_PER_CELL: usize = 2;

/// Anything that turns text into audio for a speaker vector.
pub trait Synthesizer: Sync {
    fn languages(&self) -> Vec<LanguageId>;

    /// Speaks `text` (transcribed in `text_language`) while conditioning on
    /// the embedding of `embedding_language`.
    fn synthesize_as(
        &self,
        text: &str,
        text_language: LanguageId,
        embedding_language: LanguageId,
        speaker: &[f32],
    ) -> Result<Waveform>;

    fn synthesize(&self, text: &str, language: LanguageId, speaker: &[f32]) -> Result<Waveform> {
        self.synthesize_as(text, language, language, speaker)
    }
}

impl Synthesizer for TtsSystem {
    fn languages(&self) -> Vec<LanguageId> {
        self.model.meta.languages.ids().collect()
    }

    fn synthesize_as(
        &self,
        text: &str,
        text_language: LanguageId,
        embedding_language: LanguageId,
        speaker: &[f32],
    ) -> Result<Waveform> {
        self.model.meta.languages.check(embedding_language)?;
        let seq = self.frontend.text_to_units(text, text_language)?.with_language(embedding_language);
        let (mel, _) = self.model.model.synthesize(&seq, speaker)?;
        self.vocoder.invert(&mel)
    }
}

/// Embeds synthesized audio, repeating clips shorter than the embedder's
/// minimum length.
pub(crate) fn embed_output(embedder: &dyn SpeakerEmbedder, audio: &Waveform) -> Result<Vec<f32>> {
    let need = (MIN_EMBED_SECS * f64::from(SAMPLE_RATE)).ceil() as usize;
    if audio.samples.is_empty() || audio.samples.len() >= need || audio.sample_rate != SAMPLE_RATE {
        return Ok(embed(embedder, audio)?.vector);
    }
    let tiled: Vec<f32> = audio.samples.iter().copied().cycle().take(need).collect();
    Ok(embed(embedder, &Waveform::new(tiled, SAMPLE_RATE))?.vector)
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
