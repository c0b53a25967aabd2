//! Acoustic model: articulatory encoder with language conditioning, speaker
//! injection, variance adaptor, word-boundary-aware length regulator and a
//! spectrogram decoder.

mod loss;
mod model;
mod regulator;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use loss::{tts_loss, LossComponents, TrainingTarget};
pub use model::{
    inference_durations, row_moment_errors, AcousticModel, EncoderOutput, ForwardOutput, InjectionTrace, ModelConfig,
    ResolvedVariances, VarianceTargets, Variances, LANGUAGE_TABLE,
};
pub use regulator::{length_regulate, regulate_indexes};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::LanguageRegistry;

pub const CHECKPOINT_KIND: &str = "acoustic";

/// Everything besides parameters that a model checkpoint records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: ModelConfig,
    pub languages: LanguageRegistry,
    pub inventory_hash: String,
    pub feature_hash: String,
}

/// A model with its parameters and metadata.
pub struct LoadedModel {
    pub model: AcousticModel,
    pub params: ParamStore,
    pub meta: ModelMeta,
}

impl LoadedModel {
    pub fn new(meta: ModelMeta) -> Result<Self> {
        if meta.languages.len() != meta.config.language_count {
            return Err(Error::config(format!(
                "{} registered languages but the model has {} language rows",
                meta.languages.len(),
                meta.config.language_count
            )));
        }
        let mut params = ParamStore::new(meta.config.seed, meta.config.precision.dtype());
        let model = AcousticModel::new(&mut params, meta.config.clone())?;
        Ok(Self { model, params, meta })
    }

    /// Container holding the metadata and parameters under `param.`.
    pub fn to_container(&self) -> Result<Container> {
        let mut meta = self.meta.clone();
        meta.config = self.model.config().clone();
        let mut c = Container::new(CHECKPOINT_KIND, serde_json::json!({ "model": meta }));
        self.params.save_into(&mut c, "param.")?;
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != CHECKPOINT_KIND {
            return Err(Error::config(format!("expected an acoustic checkpoint, found {}", c.kind)));
        }
        let meta: ModelMeta = serde_json::from_value(
            c.meta
                .get("model")
                .cloned()
                .ok_or_else(|| Error::config("checkpoint lacks model metadata"))?,
        )?;
        let mut loaded = Self::new(meta)?;
        loaded.params.load_from(c, "param.")?;
        Ok(loaded)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}
