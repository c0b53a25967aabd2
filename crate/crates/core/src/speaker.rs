//! Speaker embeddings: a pluggable embedder contract, an ensemble that
//! concatenates member embeddings, a deterministic spectral-statistics
//! embedder for hermetic runs, and cosine similarity.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{write_wav, FeatureConfig, FeatureExtractor, Waveform, SAMPLE_RATE};
use crate::dsp::{mel_filterbank, Stft};
use crate::error::{Error, Result};

pub const MIN_EMBED_SECS: f64 = 1.0;
pub const TOY_DIM: usize = 32;
const TOY_BANDS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerEmbedding {
    pub vector: Vec<f32>,
    pub source: String,
}

impl SpeakerEmbedding {
    pub fn new(vector: Vec<f32>, source: impl Into<String>) -> Result<Self> {
        if vector.is_empty() || vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("speaker embedding must be non-empty and finite"));
        }
        Ok(Self {
            vector,
            source: source.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub trait SpeakerEmbedder: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Raw vector for 16 kHz audio; length checks happen in [`embed`].
    fn embed_raw(&self, audio: &Waveform) -> Result<Vec<f32>>;
}

/// Embeds a waveform after checking rate, length and output dimension.
pub fn embed(embedder: &dyn SpeakerEmbedder, audio: &Waveform) -> Result<SpeakerEmbedding> {
    if audio.sample_rate != SAMPLE_RATE {
        return Err(Error::shape(format!(
            "speaker embedder expects {SAMPLE_RATE} Hz audio, got {}",
            audio.sample_rate
        )));
    }
    if audio.duration_secs() < MIN_EMBED_SECS {
        return Err(Error::contract(format!(
            "need at least {MIN_EMBED_SECS} s of audio for a speaker embedding, got {:.3} s",
            audio.duration_secs()
        )));
    }
    let vector = embedder.embed_raw(audio)?;
    if vector.len() != embedder.dim() {
        return Err(Error::shape(format!(
            "embedder `{}` returned {} values, declared {}",
            embedder.name(),
            vector.len(),
            embedder.dim()
        )));
    }
    SpeakerEmbedding::new(vector, embedder.name())
}

/// Cosine similarity in [-1, 1].
pub fn cosine_similarity(a: &SpeakerEmbedding, b: &SpeakerEmbedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.source != b.source {
        return Err(Error::contract(format!(
            "embeddings come from different embedders: `{}` vs `{}`",
            a.source, b.source
        )));
    }
    cosine(&a.vector, &b.vector)
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Deterministic spectral statistics: 24 band-energy shares plus pitch,
/// spectral-shape and level statistics.
#[derive(Debug, Clone)]
pub struct ToyEmbedder {
    stft: Stft,
    bands: ndarray::Array2<f32>,
    pitch: FeatureExtractor,
}

impl Default for ToyEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

impl ToyEmbedder {
    pub fn new() -> Self {
        let cfg = FeatureConfig::default();
        Self {
            stft: Stft::new(cfg.n_fft, cfg.hop),
            bands: mel_filterbank(cfg.sample_rate, cfg.n_fft, TOY_BANDS, 0.0, 8000.0),
            pitch: FeatureExtractor::new(cfg),
        }
    }
}

impl SpeakerEmbedder for ToyEmbedder {
    fn name(&self) -> &str {
        "toy-spectral"
    }

    fn dim(&self) -> usize {
        TOY_DIM
    }

    fn embed_raw(&self, audio: &Waveform) -> Result<Vec<f32>> {
        let mag = self.stft.magnitude(&audio.samples);
        let power = mag.mapv(|v| v * v);
        let mean_power = power.mean_axis(ndarray::Axis(0)).expect("non-empty");
        let band_power = self.bands.dot(&mean_power);
        let total: f32 = band_power.sum().max(1e-12);
        let mut out: Vec<f32> = band_power.iter().map(|p| (p / total).sqrt()).collect();

        let feats = self.pitch.extract(audio)?;
        let voiced: Vec<f32> = feats.pitch.iter().copied().filter(|&p| p > 0.0).collect();
        let (f0_mean, f0_std) = if voiced.is_empty() {
            (0.0, 0.0)
        } else {
            let m = voiced.iter().sum::<f32>() / voiced.len() as f32;
            let v = voiced.iter().map(|p| (p - m).powi(2)).sum::<f32>() / voiced.len() as f32;
            (m, v.sqrt())
        };
        let voiced_ratio = voiced.len() as f32 / feats.pitch.len() as f32;

        let bin_hz = SAMPLE_RATE as f32 / self.stft.n_fft() as f32;
        let spec_total: f32 = mean_power.sum().max(1e-12);
        let centroid = mean_power
            .iter()
            .enumerate()
            .map(|(k, p)| k as f32 * bin_hz * p)
            .sum::<f32>()
            / spec_total;
        let mut acc = 0.0;
        let rolloff_bin = mean_power
            .iter()
            .position(|p| {
                acc += p;
                acc >= 0.85 * spec_total
            })
            .unwrap_or(0);
        let log_mean = mean_power.iter().map(|p| (p + 1e-12).ln()).sum::<f32>() / mean_power.len() as f32;
        let flatness = log_mean.exp() / (spec_total / mean_power.len() as f32);
        let zcr = audio
            .samples
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count() as f32
            / audio.samples.len() as f32;
        let rms = (audio.samples.iter().map(|s| s * s).sum::<f32>() / audio.samples.len() as f32).sqrt();

        out.extend([
            f0_mean / 500.0,
            f0_std / 100.0,
            voiced_ratio,
            centroid / 8000.0,
            rolloff_bin as f32 * bin_hz / 8000.0,
            flatness,
            zcr * 10.0,
            (rms + 1e-6).log10() / 6.0 + 1.0,
        ]);
        debug_assert_eq!(out.len(), TOY_DIM);
        Ok(out)
    }
}

/// Concatenates member embeddings in declaration order.
#[derive(Clone)]
pub struct EnsembleEmbedder {
    members: Vec<Arc<dyn SpeakerEmbedder>>,
    name: String,
}

impl EnsembleEmbedder {
    pub fn new(members: Vec<Arc<dyn SpeakerEmbedder>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("ensemble needs at least one embedder"));
        }
        let name = format!(
            "ensemble({})",
            members.iter().map(|m| m.name()).collect::<Vec<_>>().join("+")
        );
        Ok(Self { members, name })
    }
}

impl SpeakerEmbedder for EnsembleEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.members.iter().map(|m| m.dim()).sum()
    }

    fn embed_raw(&self, audio: &Waveform) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.dim());
        for m in &self.members {
            let v = m.embed_raw(audio)?;
            if v.len() != m.dim() {
                return Err(Error::shape(format!(
                    "member `{}` returned {} values, declared {}",
                    m.name(),
                    v.len(),
                    m.dim()
                )));
            }
            out.extend(v);
        }
        Ok(out)
    }
}

/// External embedder process: writes the audio to a temporary WAV, runs
/// `program args...` with `{wav}` substituted, and parses whitespace- or
/// comma-separated floats from standard output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEmbedder {
    pub name: String,
    pub dim: usize,
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl SpeakerEmbedder for CommandEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, audio: &Waveform) -> Result<Vec<f32>> {
        let tmp = tempfile::Builder::new().suffix(".wav").tempfile()?;
        write_wav(tmp.path(), audio)?;
        let wav = tmp.path().to_string_lossy().into_owned();
        let args: Vec<String> = self.args.iter().map(|a| a.replace("{wav}", &wav)).collect();
        let out = Command::new(&self.program)
            .args(&args)
            .output()
            .map_err(|e| Error::config(format!("cannot run embedder `{}`: {e}", self.name)))?;
        if !out.status.success() {
            return Err(Error::config(format!(
                "embedder `{}` failed: {}",
                self.name,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        String::from_utf8_lossy(&out.stdout)
            .split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f32>()
                    .map_err(|e| Error::config(format!("embedder `{}` printed `{s}`: {e}", self.name)))
            })
            .collect()
    }
}

/// Declarative embedder selection, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Toy,
    Command(CommandEmbedder),
    Ensemble { members: Vec<EmbedderConfig> },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Toy
    }
}

impl EmbedderConfig {
    /// ECAPA-TDNN (192) + x-vector (512) behind external adapter scripts.
    pub fn production(ecapa: impl Into<PathBuf>, xvector: impl Into<PathBuf>) -> Self {
        EmbedderConfig::Ensemble {
            members: vec![
                EmbedderConfig::Command(CommandEmbedder {
                    name: "ecapa-tdnn".into(),
                    dim: 192,
                    program: ecapa.into(),
                    args: vec!["{wav}".into()],
                }),
                EmbedderConfig::Command(CommandEmbedder {
                    name: "x-vector".into(),
                    dim: 512,
                    program: xvector.into(),
                    args: vec!["{wav}".into()],
                }),
            ],
        }
    }

    pub fn build(&self) -> Result<Arc<dyn SpeakerEmbedder>> {
        Ok(match self {
            EmbedderConfig::Toy => Arc::new(ToyEmbedder::new()),
            EmbedderConfig::Command(c) => Arc::new(c.clone()),
            EmbedderConfig::Ensemble { members } => Arc::new(EnsembleEmbedder::new(
                members.iter().map(EmbedderConfig::build).collect::<Result<_>>()?,
            )?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbedderConfig::Toy => TOY_DIM,
            EmbedderConfig::Command(c) => c.dim,
            EmbedderConfig::Ensemble { members } => members.iter().map(EmbedderConfig::dim).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f32, secs: f32) -> Waveform {
        let n = (secs * 16000.0) as usize;
        Waveform::new(
            (0..n)
                .map(|i| 0.4 * (std::f32::consts::TAU * freq * i as f32 / 16000.0).sin())
                .collect(),
            16000,
        )
    }

    fn emb(v: Vec<f32>) -> SpeakerEmbedding {
        SpeakerEmbedding::new(v, "t").unwrap()
    }

    #[test]
    fn cosine_basics() {
        let v = emb(vec![1.0, 2.0, -3.0]);
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let neg = emb(vec![-1.0, -2.0, 3.0]);
        assert!((cosine_similarity(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
        let a = emb(vec![1.0, 0.0]);
        let b = emb(vec![0.0, 5.0]);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_errors() {
        let z = SpeakerEmbedding {
            vector: vec![0.0, 0.0],
            source: "t".into(),
        };
        assert!(matches!(cosine_similarity(&z, &emb(vec![1.0, 0.0])), Err(Error::ZeroNorm)));
        assert!(cosine_similarity(&emb(vec![1.0]), &emb(vec![1.0, 2.0])).is_err());
        let other = SpeakerEmbedding::new(vec![1.0, 2.0], "other").unwrap();
        assert!(cosine_similarity(&emb(vec![1.0, 2.0]), &other).is_err());
    }

    #[test]
    fn toy_embedder_is_deterministic_and_separates_tones() {
        let e = ToyEmbedder::new();
        let a1 = embed(&e, &tone(220.0, 1.2)).unwrap();
        let a2 = embed(&e, &tone(220.0, 1.2)).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(a1.dim(), TOY_DIM);
        let b = embed(&e, &tone(440.0, 1.2)).unwrap();
        assert!(cosine_similarity(&a1, &b).unwrap() < 0.99);
    }

    #[test]
    fn toy_embedder_is_stable_under_one_sample_shift() {
        let e = ToyEmbedder::new();
        let w = tone(180.0, 1.5);
        let base = embed(&e, &w).unwrap();
        for shift in [1usize, w.samples.len() - 1] {
            let mut s = w.samples.clone();
            s.rotate_right(shift);
            let shifted = embed(&e, &Waveform::new(s, 16000)).unwrap();
            assert!(cosine_similarity(&base, &shifted).unwrap() > 0.999);
        }
    }

    #[test]
    fn too_short_audio_is_rejected() {
        assert!(embed(&ToyEmbedder::new(), &tone(220.0, 0.5)).is_err());
    }

    struct Fixed(usize, f32);
    impl SpeakerEmbedder for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn dim(&self) -> usize {
            self.0
        }
        fn embed_raw(&self, _: &Waveform) -> Result<Vec<f32>> {
            Ok(vec![self.1; self.0])
        }
    }

    #[test]
    fn ensemble_concatenates_in_order() {
        let ens = EnsembleEmbedder::new(vec![Arc::new(Fixed(3, 1.0)), Arc::new(Fixed(5, 2.0))]).unwrap();
        let v = embed(&ens, &tone(200.0, 1.0)).unwrap();
        assert_eq!(v.dim(), 8);
        assert_eq!(v.vector, vec![1., 1., 1., 2., 2., 2., 2., 2.]);
        assert_eq!(EmbedderConfig::production("a", "b").dim(), 704);
    }

    #[test]
    fn command_embedder_parses_stdout() {
        let e = CommandEmbedder {
            name: "echo".into(),
            dim: 3,
            program: "sh".into(),
            args: vec!["-c".into(), "test -s \"$0\" && echo '[0.5, -1, 2e-1]'".into(), "{wav}".into()],
        };
        let v = embed(&e, &tone(200.0, 1.0)).unwrap();
        assert_eq!(v.vector, vec![0.5, -1.0, 0.2]);
    }
}
