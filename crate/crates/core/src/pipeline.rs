//! Corpus preparation, forced alignment and end-to-end synthesis.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::acoustic::{LoadedModel, ResolvedVariances, TrainingTarget};
use crate::aligner::AlignerNet;
use crate::data::{read_wav, AcousticFeatures, CorpusManifest, FeatureCache, FeatureExtractor, FrameFeatures, UtteranceRecord, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::frontend::{Frontend, PhoneSequence};
use crate::laml::TrainingExample;
use crate::speaker::{embed, SpeakerEmbedder};
use crate::vocoder::Vocoder;
use crate::LanguageId;

/// Audio pooled per speaker before embedding.
pub const SPEAKER_POOL_SECS: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct PreparedUtterance {
    pub key: String,
    pub record: UtteranceRecord,
    pub sequence: PhoneSequence,
    pub frames: FrameFeatures,
}

#[derive(Debug, Clone, Default)]
pub struct PreparedCorpus {
    pub utterances: Vec<PreparedUtterance>,
    /// One embedding per speaker id, from pooled audio.
    pub speakers: BTreeMap<String, Vec<f32>>,
}

/// Appends `audio` to `pool` until it holds `secs` of audio.
fn pool_audio(pool: &mut Vec<f32>, audio: &[f32], secs: f64) {
    let limit = (secs * f64::from(SAMPLE_RATE)) as usize;
    let room = limit.saturating_sub(pool.len());
    pool.extend_from_slice(&audio[..audio.len().min(room)]);
}

fn load_audio(path: &std::path::Path) -> Result<Waveform> {
    let w = read_wav(path)?;
    Ok(if w.sample_rate == SAMPLE_RATE { w } else { w.resample(SAMPLE_RATE) })
}

/// Caps each language corpus, runs the frontend, extracts (or reuses
/// cached) frame features and embeds every speaker.
pub fn prepare_corpus(
    manifest: &CorpusManifest,
    frontend: &Frontend,
    cache: &FeatureCache,
    embedder: &dyn SpeakerEmbedder,
    cap: usize,
    seed: u64,
) -> Result<PreparedCorpus> {
    let manifest = manifest.capped(cap, seed);
    let extractor = FeatureExtractor::new(cache.config().clone());
    let mut pools: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    let mut utterances = Vec::with_capacity(manifest.records.len());
    for record in &manifest.records {
        let path = manifest.resolve(record);
        let bytes = std::fs::read(&path).map_err(|e| Error::Audio {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        let key = cache.key_for(&bytes, &record.transcript);
        let sequence = frontend.text_to_units(&record.transcript, record.language_id)?;
        let pool = pools.entry(record.speaker_id.clone()).or_default();
        let need_audio = pool.len() < (SPEAKER_POOL_SECS * f64::from(SAMPLE_RATE)) as usize;
        let cached = cache.read_frames(&key)?;
        let audio = if need_audio || cached.is_none() { Some(load_audio(&path)?) } else { None };
        if let Some(a) = &audio {
            pool_audio(pool, &a.samples, SPEAKER_POOL_SECS);
        }
        let frames = match cached {
            Some(f) => f,
            None => {
                let f = extractor.extract(audio.as_ref().expect("audio loaded on a miss"))?;
                cache.write_frames(&key, &f)?;
                f
            }
        };
        utterances.push(PreparedUtterance {
            key,
            record: record.clone(),
            sequence,
            frames,
        });
    }
    let mut speakers = BTreeMap::new();
    for (id, samples) in pools {
        let e = embed(embedder, &Waveform::new(samples, SAMPLE_RATE))?;
        speakers.insert(id, e.vector);
    }
    Ok(PreparedCorpus { utterances, speakers })
}

/// Cache key for aligned features: the frame key plus the aligner identity.
pub fn aligned_key(frame_key: &str, aligner_tag: &str) -> String {
    let mut h = Sha256::new();
    h.update(frame_key.as_bytes());
    h.update(b"/");
    h.update(aligner_tag.as_bytes());
    hex::encode(h.finalize())
}

/// Forced alignment of every prepared utterance. Utterances with fewer
/// frames than frame-bearing units are skipped with a warning.
pub fn align_corpus(
    aligner: &AlignerNet,
    aligner_tag: &str,
    corpus: &PreparedCorpus,
    cache: &FeatureCache,
) -> Result<Vec<Option<AcousticFeatures>>> {
    let mut out = Vec::with_capacity(corpus.utterances.len());
    for u in &corpus.utterances {
        let key = aligned_key(&u.key, aligner_tag);
        if let Some(f) = cache.read(&key)? {
            out.push(Some(f));
            continue;
        }
        match aligner.align(&u.frames.mel, &u.sequence) {
            Ok(durations) => {
                let f = AcousticFeatures::from_alignment(u.frames.clone(), durations)?;
                cache.write(&key, &f)?;
                out.push(Some(f));
            }
            Err(Error::Alignment { frames, units }) => {
                tracing::warn!(
                    path = %u.record.audio_path.display(),
                    frames,
                    units,
                    "utterance too short to align; skipped"
                );
                out.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Groups aligned utterances into per-language training tasks.
pub fn training_examples(
    corpus: &PreparedCorpus,
    features: &[Option<AcousticFeatures>],
) -> Result<BTreeMap<LanguageId, Vec<TrainingExample>>> {
    if features.len() != corpus.utterances.len() {
        return Err(Error::shape("one feature entry per prepared utterance is required"));
    }
    let mut tasks: BTreeMap<LanguageId, Vec<TrainingExample>> = BTreeMap::new();
    for (u, f) in corpus.utterances.iter().zip(features) {
        let Some(f) = f else { continue };
        let speaker = corpus
            .speakers
            .get(&u.record.speaker_id)
            .ok_or_else(|| Error::config(format!("no embedding for speaker {}", u.record.speaker_id)))?;
        tasks.entry(u.sequence.language()).or_default().push(TrainingExample {
            target: TrainingTarget::from_features(f, u.sequence.boundary_indexes())?,
            sequence: u.sequence.clone(),
            speaker: speaker.clone(),
        });
    }
    Ok(tasks)
}

/// Text to waveform: frontend, acoustic model, vocoder.
pub struct TtsSystem {
    pub model: LoadedModel,
    pub frontend: Frontend,
    pub vocoder: Box<dyn Vocoder>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub audio: Waveform,
    pub mel: ndarray::Array2<f32>,
    pub variances: ResolvedVariances,
}

impl TtsSystem {
    /// `language` is a registered name or numeric id.
    pub fn resolve_language(&self, language: &str) -> Result<LanguageId> {
        self.model.meta.languages.resolve(language)
    }

    pub fn synthesize(&self, text: &str, language: LanguageId, speaker: &[f32]) -> Result<Synthesis> {
        self.model.meta.languages.check(language)?;
        let seq = self.frontend.text_to_units(text, language)?;
        let (mel, variances) = self.model.model.synthesize(&seq, speaker)?;
        let audio = self.vocoder.invert(&mel)?;
        Ok(Synthesis { audio, mel, variances })
    }
}
