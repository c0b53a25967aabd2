//! Corpus ingestion, acoustic feature extraction and the feature cache.

mod audio;
mod cache;
mod features;
mod manifest;
mod prosody;

pub use audio::{read_wav, write_wav, Waveform, SAMPLE_RATE};
pub use cache::FeatureCache;
pub use features::{extract_features, FeatureConfig, FeatureExtractor, FrameFeatures, PitchTracker};
pub use manifest::{CorpusManifest, UtteranceRecord, DEFAULT_CORPUS_CAP};
pub use prosody::{phoneme_average, AcousticFeatures, ProsodyStats};
