#![allow(dead_code)]

use std::collections::BTreeMap;

use polytts::acoustic::{ModelConfig, ModelMeta};
use polytts::data::FeatureConfig;
use polytts::laml::{TrainConfig, TrainingExample};
use polytts::speaker::ToyEmbedder;
use polytts::toy::{make_toy_corpus, ToyConfig, ToyCorpus};
use polytts::LanguageId;

pub struct ToySetup {
    pub corpus: ToyCorpus,
    pub data: BTreeMap<LanguageId, Vec<TrainingExample>>,
    pub meta: ModelMeta,
}

pub fn toy_setup(languages: usize, utterances: usize, model: ModelConfig) -> ToySetup {
    let corpus = make_toy_corpus(&ToyConfig {
        languages,
        utterances_per_language: utterances,
        ..ToyConfig::default()
    })
    .expect("toy corpus");
    let features = FeatureConfig::default();
    let data = corpus.training_examples(&features, &ToyEmbedder::new()).expect("examples");
    let meta = corpus.model_meta(model, &features);
    ToySetup { corpus, data, meta }
}

pub fn toy_train_config(model: ModelConfig, steps: u64) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: 4,
        checkpoint_every: 0,
        model,
        ..TrainConfig::default()
    }
}
