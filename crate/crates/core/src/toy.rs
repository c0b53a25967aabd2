//! Synthetic multilingual corpus for smoke tests and demos.
//!
//! Each pseudo-language has its own phone subset and lexicon. Utterances are
//! rendered unit by unit with known frame durations: vowels and sonorants as
//! harmonic sources shaped by a formant envelope derived from articulatory
//! features, obstruents as band-limited noise, pauses and sentence marks as
//! near silence. Speakers differ in f0, formant scale and spectral tilt.

use std::collections::BTreeMap;
use std::f32::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustic::{ModelConfig, ModelMeta, TrainingTarget};
use crate::data::{
    write_wav, AcousticFeatures, CorpusManifest, FeatureConfig, FeatureExtractor, UtteranceRecord, Waveform, SAMPLE_RATE,
};
use crate::error::{Error, Result};
use crate::frontend::{FeatureInventory, Frontend, G2p, Lexicon, LexiconG2p, PhoneSequence, UnitKind};
use crate::laml::TrainingExample;
use crate::speaker::{embed, SpeakerEmbedder};
use crate::{LanguageId, LanguageRegistry};

/// Phone subsets of the built-in pseudo-languages; all symbols are ASCII so
/// that spellings can be their own transcriptions.
const PHONE_SETS: [(&str, &[&str], &[&str]); 4] = [
    ("toya", &["p", "t", "k", "m", "n", "s", "l"], &["a", "i", "u"]),
    ("toyb", &["b", "d", "g", "f", "v", "n", "r"], &["e", "o", "a"]),
    ("toyc", &["p", "d", "s", "m", "l", "z"], &["e", "i", "o", "u"]),
    ("toyd", &["t", "g", "f", "n", "r", "h"], &["a", "o", "i"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySpeaker {
    pub f0: f32,
    pub formant_scale: f32,
    /// Harmonic k is attenuated by k^-tilt.
    pub tilt: f32,
}

impl ToySpeaker {
    pub fn preset(index: usize) -> Self {
        const PRESETS: [ToySpeaker; 4] = [
            ToySpeaker { f0: 110.0, formant_scale: 1.0, tilt: 1.0 },
            ToySpeaker { f0: 210.0, formant_scale: 1.15, tilt: 0.6 },
            ToySpeaker { f0: 150.0, formant_scale: 0.92, tilt: 1.4 },
            ToySpeaker { f0: 175.0, formant_scale: 1.08, tilt: 0.9 },
        ];
        PRESETS[index % PRESETS.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub languages: usize,
    pub utterances_per_language: usize,
    pub speakers: usize,
    pub words_per_language: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            languages: 2,
            utterances_per_language: 4,
            speakers: 2,
            words_per_language: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyUtterance {
    pub text: String,
    pub language: LanguageId,
    pub speaker: usize,
    pub sequence: PhoneSequence,
    /// Frames per unit, matching the extracted features of `audio`.
    pub durations: Vec<u32>,
    pub audio: Waveform,
}

pub struct ToyCorpus {
    pub languages: LanguageRegistry,
    pub lexicons: Vec<(LanguageId, Lexicon)>,
    pub speakers: Vec<ToySpeaker>,
    pub frontend: Frontend,
    pub utterances: Vec<ToyUtterance>,
}

impl ToyCorpus {
    pub fn by_language(&self, language: LanguageId) -> Vec<&ToyUtterance> {
        self.utterances.iter().filter(|u| u.language == language).collect()
    }

    /// Model metadata for this corpus; the language count and input width
    /// of `config` are overridden to match.
    pub fn model_meta(&self, config: ModelConfig, features: &FeatureConfig) -> ModelMeta {
        ModelMeta {
            config: ModelConfig {
                language_count: self.languages.len(),
                feature_dim: self.frontend.inventory().dim(),
                ..config
            },
            languages: self.languages.clone(),
            inventory_hash: self.frontend.inventory().hash().to_string(),
            feature_hash: features.hash(),
        }
    }

    pub fn speaker_id(index: usize) -> String {
        format!("spk{index}")
    }

    /// One embedding per speaker from up to ten seconds of pooled audio.
    pub fn speaker_embeddings(&self, embedder: &dyn SpeakerEmbedder) -> Result<Vec<Vec<f32>>> {
        let limit = 10 * SAMPLE_RATE as usize;
        (0..self.speakers.len())
            .map(|s| {
                let mut pool = Vec::new();
                for u in self.utterances.iter().filter(|u| u.speaker == s) {
                    let room = limit.saturating_sub(pool.len());
                    pool.extend_from_slice(&u.audio.samples[..u.audio.samples.len().min(room)]);
                }
                if pool.is_empty() {
                    // Speakers without utterances still need a vector.
                    return Ok(vec![0.0; embedder.dim()]);
                }
                Ok(embed(embedder, &Waveform::new(pool, SAMPLE_RATE))?.vector)
            })
            .collect()
    }

    /// Training tasks with the rendered durations as alignments.
    pub fn training_examples(
        &self,
        features: &FeatureConfig,
        embedder: &dyn SpeakerEmbedder,
    ) -> Result<BTreeMap<LanguageId, Vec<TrainingExample>>> {
        let extractor = FeatureExtractor::new(features.clone());
        let speakers = self.speaker_embeddings(embedder)?;
        let mut tasks: BTreeMap<LanguageId, Vec<TrainingExample>> = BTreeMap::new();
        for u in &self.utterances {
            let frames = extractor.extract(&u.audio)?;
            let feats = AcousticFeatures::from_alignment(frames, u.durations.clone())?;
            tasks.entry(u.language).or_default().push(TrainingExample {
                target: TrainingTarget::from_features(&feats, u.sequence.boundary_indexes())?,
                sequence: u.sequence.clone(),
                speaker: speakers[u.speaker].clone(),
            });
        }
        Ok(tasks)
    }

    /// Writes WAVs, lexicons, `languages.txt` and `manifest.jsonl` for the
    /// selected languages (all when `None`) under `dir`. Records keep their
    /// corpus-wide language ids.
    pub fn write_to(&self, dir: &Path, only: Option<&[LanguageId]>) -> Result<CorpusManifest> {
        let keep = |l: &LanguageId| only.is_none_or(|o| o.contains(l));
        std::fs::create_dir_all(dir.join("wav"))?;
        let mut names = Vec::new();
        for (id, lex) in self.lexicons.iter().filter(|(id, _)| keep(id)) {
            let name = self.languages.name(*id).unwrap_or("unknown");
            std::fs::write(dir.join(format!("{name}.lexicon.tsv")), lex.to_text())?;
            names.push(name.to_string());
        }
        let mut records = Vec::new();
        for (i, u) in self.utterances.iter().enumerate().filter(|(_, u)| keep(&u.language)) {
            let rel = PathBuf::from("wav").join(format!("utt{i:05}.wav"));
            write_wav(dir.join(&rel), &u.audio)?;
            records.push(UtteranceRecord {
                audio_path: rel,
                transcript: u.text.clone(),
                language_id: u.language,
                speaker_id: Self::speaker_id(u.speaker),
            });
        }
        let manifest = CorpusManifest::new(records, dir);
        manifest.save(dir.join("manifest.jsonl"))?;
        std::fs::write(dir.join("languages.txt"), names.join("\n") + "\n")?;
        Ok(manifest)
    }
}

fn make_lexicon(consonants: &[&str], vowels: &[&str], words: usize, rng: &mut ChaCha8Rng) -> Lexicon {
    let mut lex = Lexicon::default();
    while lex.len() < words {
        let syllables = rng.random_range(1..=2);
        let mut phones = Vec::new();
        for _ in 0..syllables {
            phones.push(consonants.choose(rng).expect("non-empty").to_string());
            phones.push(vowels.choose(rng).expect("non-empty").to_string());
        }
        if rng.random_bool(0.3) {
            phones.push(consonants.choose(rng).expect("non-empty").to_string());
        }
        let spelling: String = phones.concat();
        if lex.get(&spelling).is_none() {
            lex.insert(&spelling, phones);
        }
    }
    lex
}

/// Builds a corpus of `languages × utterances_per_language` utterances.
pub fn make_toy_corpus(config: &ToyConfig) -> Result<ToyCorpus> {
    if config.languages == 0 || config.languages > PHONE_SETS.len() {
        return Err(Error::config(format!(
            "toy corpus supports 1..={} languages",
            PHONE_SETS.len()
        )));
    }
    if config.speakers == 0 || config.utterances_per_language == 0 || config.words_per_language < 2 {
        return Err(Error::config("toy corpus needs speakers, utterances and at least two words"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inventory = Arc::new(FeatureInventory::builtin());
    let mut languages = LanguageRegistry::default();
    let mut g2p = LexiconG2p::new();
    let mut lexicons = Vec::new();
    for (name, consonants, vowels) in PHONE_SETS.iter().take(config.languages) {
        let id = languages.register(*name)?;
        let lex = make_lexicon(consonants, vowels, config.words_per_language, &mut rng);
        g2p.insert(id, lex.clone());
        lexicons.push((id, lex));
    }
    let speakers: Vec<ToySpeaker> = (0..config.speakers).map(ToySpeaker::preset).collect();
    let frontend = Frontend::new(inventory.clone(), languages.clone(), Arc::new(g2p) as Arc<dyn G2p>);
    let renderer = Renderer::new(&inventory);

    let mut utterances = Vec::new();
    for (language, lex) in &lexicons {
        let words: Vec<String> = lex.to_text().lines().filter_map(|l| l.split('\t').next()).map(str::to_string).collect();
        for i in 0..config.utterances_per_language {
            let n_words = rng.random_range(2..=3);
            let mut text = String::new();
            for w in 0..n_words {
                if w > 0 {
                    text.push_str(if rng.random_bool(0.25) { ", " } else { " " });
                }
                text.push_str(words.choose(&mut rng).expect("non-empty"));
            }
            text.push(if rng.random_bool(0.2) { '?' } else { '.' });
            let sequence = frontend.text_to_units(&text, *language)?;
            let speaker = (i + language.index()) % speakers.len();
            let (audio, durations) = renderer.render(&sequence, &speakers[speaker], &mut rng)?;
            utterances.push(ToyUtterance {
                text,
                language: *language,
                speaker,
                sequence,
                durations,
                audio,
            });
        }
    }
    Ok(ToyCorpus {
        languages,
        lexicons,
        speakers,
        frontend,
        utterances,
    })
}

#[derive(Debug, Clone, Copy)]
enum Source {
    /// Harmonics with two formants, plus an optional noise share.
    Voiced { f1: f32, f2: f32, gain: f32, noise: f32 },
    /// Band-limited noise; stops are silent for their first half.
    Noise { lo: f32, hi: f32, gain: f32, stop: bool },
    Silence,
}

struct Renderer {
    names: Vec<String>,
    inventory: Arc<FeatureInventory>,
    features: FeatureConfig,
}

impl Renderer {
    fn new(inventory: &Arc<FeatureInventory>) -> Self {
        Self {
            names: inventory.feature_names().map(str::to_string).collect(),
            inventory: inventory.clone(),
            features: FeatureConfig::default(),
        }
    }

    fn source(&self, symbol: &str, kind: UnitKind) -> Result<Source> {
        if kind != UnitKind::Phoneme {
            return Ok(Source::Silence);
        }
        let fv = self.inventory.featurize(symbol)?;
        let get = |name: &str| -> i8 {
            self.names
                .iter()
                .position(|n| n == name)
                .map_or(0, |i| fv.values()[i])
        };
        let plus = |name: &str| get(name) > 0;
        let src = if plus("syl") {
            let f1 = 320.0 + if plus("lo") { 380.0 } else { 0.0 } - if plus("hi") { 60.0 } else { 0.0 };
            let f2 = if plus("back") { 950.0 } else { 2000.0 } - if plus("round") { 200.0 } else { 0.0 };
            Source::Voiced { f1, f2, gain: 0.3, noise: 0.0 }
        } else if plus("son") {
            let (f1, f2) = if plus("nas") { (260.0, 1100.0) } else { (360.0, 1400.0) };
            Source::Voiced { f1, f2, gain: 0.15, noise: 0.0 }
        } else if plus("voi") {
            Source::Voiced { f1: 200.0, f2: 700.0, gain: 0.08, noise: if plus("cont") { 0.04 } else { 0.0 } }
        } else {
            let (lo, hi) = if plus("strid") { (3500.0, 7000.0) } else { (1500.0, 5000.0) };
            Source::Noise { lo, hi, gain: 0.08, stop: !plus("cont") }
        };
        Ok(src)
    }

    /// Waveform and per-unit frame counts whose sum equals the extracted
    /// frame count (1 + samples / hop).
    fn render(&self, seq: &PhoneSequence, speaker: &ToySpeaker, rng: &mut ChaCha8Rng) -> Result<(Waveform, Vec<u32>)> {
        let hop = self.features.hop;
        let mut durations: Vec<u32> = seq
            .units()
            .iter()
            .map(|u| match u.kind {
                UnitKind::WordBoundary => 0,
                UnitKind::Phoneme => rng.random_range(3..=7),
                UnitKind::Pause => rng.random_range(4..=7),
                UnitKind::SentenceMark => rng.random_range(3..=5),
            })
            .collect();
        // at least one second of audio for speaker embedding
        let min_frames = (SAMPLE_RATE as usize).div_ceil(hop) as u32;
        let last = (0..durations.len()).rev().find(|&i| durations[i] > 0).expect("frame-bearing unit");
        let total: u32 = durations.iter().sum();
        if total < min_frames {
            durations[last] += min_frames - total;
        }

        let sr = SAMPLE_RATE as f32;
        let mut samples = Vec::new();
        let mut phase = 0.0f32;
        let mut noise_state = [0.0f32; 2];
        let utter_frames: u32 = durations.iter().sum();
        let mut frame_pos = 0u32;
        for (unit, &d) in seq.units().iter().zip(&durations) {
            if d == 0 {
                continue;
            }
            let src = self.source(&unit.symbol, unit.kind)?;
            let n = d as usize * hop;
            for j in 0..n {
                // gentle declination over the utterance
                let progress = (frame_pos as f32 + j as f32 / hop as f32) / utter_frames as f32;
                let f0 = speaker.f0 * (1.08 - 0.16 * progress);
                let white: f32 = rng.random_range(-1.0..1.0);
                let s = match src {
                    Source::Voiced { f1, f2, gain, noise } => {
                        phase = (phase + TAU * f0 / sr) % TAU;
                        let mut acc = 0.0;
                        let mut k = 1;
                        while (k as f32) * f0 < 7000.0 {
                            let f = k as f32 * f0;
                            let env = formant(f, f1 * speaker.formant_scale, 90.0) + 0.6 * formant(f, f2 * speaker.formant_scale, 140.0);
                            acc += env * (k as f32).powf(-speaker.tilt) * (k as f32 * phase).sin();
                            k += 1;
                        }
                        gain * acc + noise * white
                    }
                    Source::Noise { lo, hi, gain, stop } => {
                        if stop && j < n / 2 {
                            0.0
                        } else {
                            gain * band_noise(white, lo, hi, sr, &mut noise_state)
                        }
                    }
                    Source::Silence => 1e-4 * white,
                };
                samples.push(s);
            }
            frame_pos += d;
        }
        // centered framing yields one frame more than hops
        durations[last] += 1;
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        if peak > 0.95 {
            samples.iter_mut().for_each(|s| *s *= 0.95 / peak);
        }
        Ok((Waveform::new(samples, SAMPLE_RATE), durations))
    }
}

fn formant(f: f32, center: f32, bandwidth: f32) -> f32 {
    let x = (f - center) / bandwidth;
    1.0 / (1.0 + x * x)
}

/// Crude band-pass: one-pole high-pass followed by one-pole low-pass.
fn band_noise(white: f32, lo: f32, hi: f32, sr: f32, state: &mut [f32; 2]) -> f32 {
    let a_hp = (-TAU * lo / sr).exp();
    let a_lp = (-TAU * hi / sr).exp();
    let hp = white - state[0];
    state[0] = a_hp * state[0] + (1.0 - a_hp) * white;
    state[1] = a_lp * state[1] + (1.0 - a_lp) * hp;
    state[1] * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::extract_features;

    #[test]
    fn durations_match_extracted_frames() {
        let corpus = make_toy_corpus(&ToyConfig::default()).unwrap();
        assert_eq!(corpus.utterances.len(), 8);
        for u in &corpus.utterances {
            let f = extract_features(&u.audio, &FeatureConfig::default()).unwrap();
            assert_eq!(f.frames() as u32, u.durations.iter().sum::<u32>());
            assert!(u.audio.duration_secs() >= 1.0);
            for &b in u.sequence.boundary_indexes() {
                assert_eq!(u.durations[b], 0);
            }
            assert!(u.sequence.frame_unit_indexes().iter().all(|&i| u.durations[i] > 0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_toy_corpus(&ToyConfig::default()).unwrap();
        let b = make_toy_corpus(&ToyConfig::default()).unwrap();
        for (x, y) in a.utterances.iter().zip(&b.utterances) {
            assert_eq!(x.text, y.text);
            assert_eq!(x.audio, y.audio);
        }
    }

    #[test]
    fn too_many_languages_is_rejected() {
        let cfg = ToyConfig {
            languages: 9,
            ..ToyConfig::default()
        };
        assert!(make_toy_corpus(&cfg).is_err());
    }
}
