use std::collections::BTreeSet;

use candle_core::{DType, Device, Tensor, Var, D};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::acoustic::regulator::length_regulate;
use crate::error::{Error, Result};
use crate::frontend::PhoneSequence;
use crate::nn::{
    host, softsign, Adam, BlockConfig, ConformerLiteBlock, Conv1d, LayerNorm, Linear, ParamStore, Precision,
};
use crate::LanguageId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Width of the articulatory input vectors.
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub conv_kernel: usize,
    pub max_relative: usize,
    pub macaron: bool,
    pub bottleneck_dim: usize,
    pub speaker_dim: usize,
    pub language_count: usize,
    pub mel_bins: usize,
    pub variance_kernel: usize,
    pub postnet: bool,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 29,
            hidden_dim: 384,
            encoder_layers: 6,
            decoder_layers: 6,
            heads: 4,
            ff_dim: 1536,
            conv_kernel: 31,
            max_relative: 64,
            macaron: false,
            bottleneck_dim: 64,
            speaker_dim: 704,
            language_count: 1,
            mel_bins: 80,
            variance_kernel: 3,
            postnet: false,
            precision: Precision::F32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small configuration for synthetic corpora and tests.
    pub fn toy() -> Self {
        Self {
            hidden_dim: 32,
            encoder_layers: 1,
            decoder_layers: 1,
            heads: 2,
            ff_dim: 64,
            conv_kernel: 7,
            max_relative: 16,
            bottleneck_dim: 8,
            speaker_dim: crate::speaker::TOY_DIM,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.bottleneck_dim == 0 || self.bottleneck_dim >= self.hidden_dim {
            return Err(Error::config(format!(
                "need 0 < bottleneck ({}) < hidden ({})",
                self.bottleneck_dim, self.hidden_dim
            )));
        }
        if self.language_count == 0 || self.feature_dim == 0 || self.mel_bins == 0 || self.speaker_dim == 0 {
            return Err(Error::config("language count, feature, mel and speaker widths must be positive"));
        }
        if self.variance_kernel % 2 == 0 {
            return Err(Error::config("variance predictor kernel must be odd"));
        }
        self.block().validate()
    }

    fn block(&self) -> BlockConfig {
        BlockConfig {
            dim: self.hidden_dim,
            heads: self.heads,
            ff_dim: self.ff_dim,
            conv_kernel: self.conv_kernel,
            max_relative: self.max_relative,
            macaron: self.macaron,
        }
    }
}

/// Encoder states with the word-boundary positions carried alongside.
#[derive(Clone)]
pub struct EncoderOutput {
    pub hidden: Tensor,
    pub boundary_indexes: BTreeSet<usize>,
}

/// Intermediate values of the speaker injection, for inspection.
pub struct InjectionTrace {
    /// SoftSign of the bottlenecked speaker vector, `[1, bottleneck]`.
    pub speaker_code: Tensor,
    /// Standardized projection before the norm's gain and shift, `[L, H]`.
    pub normalized: Tensor,
    pub output: EncoderOutput,
}

/// Per-unit predictions of the variance adaptor, each of length L.
#[derive(Clone)]
pub struct Variances {
    pub log_durations: Tensor,
    pub pitch: Tensor,
    pub energy: Tensor,
}

/// Gold per-unit values used for teacher forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTargets {
    pub durations: Vec<u32>,
    /// Utterance-normalized pitch.
    pub pitch: Vec<f32>,
    /// Utterance-normalized energy.
    pub energy: Vec<f32>,
}

/// The values the regulator and embeddings actually consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedVariances {
    pub durations: Vec<i64>,
    pub pitch: Vec<f32>,
    pub energy: Vec<f32>,
}

pub struct ForwardOutput {
    pub mel: Tensor,
    pub variances: Variances,
    pub resolved: ResolvedVariances,
}

#[derive(Clone)]
struct VariancePredictor {
    conv1: Conv1d,
    norm1: LayerNorm,
    conv2: Conv1d,
    norm2: LayerNorm,
    out: Linear,
}

impl VariancePredictor {
    fn new(store: &mut ParamStore, name: &str, dim: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            conv1: Conv1d::new(store, &format!("{name}.conv1"), dim, dim, kernel)?,
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), dim)?,
            conv2: Conv1d::new(store, &format!("{name}.conv2"), dim, dim, kernel)?,
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), dim)?,
            out: Linear::new(store, &format!("{name}.out"), dim, 1)?,
        })
    }

    fn forward(&self, h: &Tensor) -> Result<Tensor> {
        let x = self.norm1.forward(&self.conv1.forward(h)?.relu()?)?;
        let x = self.norm2.forward(&self.conv2.forward(&x)?.relu()?)?;
        Ok(self.out.forward(&x)?.squeeze(1)?)
    }
}

#[derive(Clone)]
struct Postnet {
    conv1: Conv1d,
    conv2: Conv1d,
}

/// Articulatory encoder, speaker injection, variance adaptor, word-boundary
/// aware length regulator and decoder.
pub struct AcousticModel {
    config: ModelConfig,
    input: Linear,
    language_table: Var,
    encoder: Vec<ConformerLiteBlock>,
    speaker_bottleneck: Linear,
    speaker_project: Linear,
    speaker_norm: LayerNorm,
    duration: VariancePredictor,
    pitch: VariancePredictor,
    energy: VariancePredictor,
    pitch_embed: Linear,
    energy_embed: Linear,
    decoder: Vec<ConformerLiteBlock>,
    mel_out: Linear,
    postnet: Option<Postnet>,
    dtype: DType,
}

pub const LANGUAGE_TABLE: &str = "language_table";

impl AcousticModel {
    pub fn new(store: &mut ParamStore, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (h, b) = (config.hidden_dim, config.bottleneck_dim);
        let block = config.block();
        let input = Linear::new(store, "encoder.input", config.feature_dim, h)?;
        let language_table = store.normal(LANGUAGE_TABLE, &[config.language_count, h], 0.5)?;
        let encoder = (0..config.encoder_layers)
            .map(|i| ConformerLiteBlock::new(store, &format!("encoder.block{i}"), &block))
            .collect::<Result<Vec<_>>>()?;
        let speaker_bottleneck = Linear::new(store, "speaker.bottleneck", config.speaker_dim, b)?;
        let speaker_project = Linear::new(store, "speaker.project", h + b, h)?;
        let speaker_norm = LayerNorm::new(store, "speaker.norm", h)?;
        let k = config.variance_kernel;
        let duration = VariancePredictor::new(store, "variance.duration", h, k)?;
        let pitch = VariancePredictor::new(store, "variance.pitch", h, k)?;
        let energy = VariancePredictor::new(store, "variance.energy", h, k)?;
        let pitch_embed = Linear::new(store, "variance.pitch_embed", 1, h)?;
        let energy_embed = Linear::new(store, "variance.energy_embed", 1, h)?;
        let decoder = (0..config.decoder_layers)
            .map(|i| ConformerLiteBlock::new(store, &format!("decoder.block{i}"), &block))
            .collect::<Result<Vec<_>>>()?;
        let mel_out = Linear::new(store, "decoder.mel_out", h, config.mel_bins)?;
        let postnet = if config.postnet {
            Some(Postnet {
                conv1: Conv1d::new(store, "postnet.conv1", config.mel_bins, h, 5)?,
                conv2: Conv1d::new(store, "postnet.conv2", h, config.mel_bins, 5)?,
            })
        } else {
            None
        };
        Ok(Self {
            dtype: store.dtype(),
            config,
            input,
            language_table,
            encoder,
            speaker_bottleneck,
            speaker_project,
            speaker_norm,
            duration,
            pitch,
            energy,
            pitch_embed,
            energy_embed,
            decoder,
            mel_out,
            postnet,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn language_count(&self) -> usize {
        self.config.language_count
    }

    pub fn language_table(&self) -> &Var {
        &self.language_table
    }

    fn tensor(&self, data: &[f32], shape: &[usize]) -> Result<Tensor> {
        host(data, shape, self.dtype, &Device::Cpu)
    }

    /// Adds a language row initialized to the mean of the existing rows and
    /// extends the optimizer moments with zeros.
    pub fn add_language(&mut self, store: &mut ParamStore, optimizer: Option<&mut Adam>) -> Result<LanguageId> {
        let table = self.language_table.as_tensor();
        let mean = table.mean_keepdim(0)?;
        let grown = Tensor::cat(&[&table.detach(), &mean.detach()], 0)?;
        self.language_table = store.replace(LANGUAGE_TABLE, &grown)?;
        if let Some(adam) = optimizer {
            adam.grow_rows(LANGUAGE_TABLE, 1)?;
        }
        let id = LanguageId(self.config.language_count as u32);
        self.config.language_count += 1;
        Ok(id)
    }

    /// Projects the articulatory vectors, adds the language row to every
    /// position and runs the encoder blocks.
    pub fn encode(&self, seq: &PhoneSequence) -> Result<EncoderOutput> {
        let lang = seq.language();
        if lang.index() >= self.config.language_count {
            return Err(Error::config(format!(
                "language {lang} is not registered with the model ({} languages)",
                self.config.language_count
            )));
        }
        if seq.feature_dim() != self.config.feature_dim {
            return Err(Error::shape(format!(
                "sequence features have width {}, model expects {}",
                seq.feature_dim(),
                self.config.feature_dim
            )));
        }
        let x = self.tensor(&seq.feature_matrix(), &[seq.len(), seq.feature_dim()])?;
        let idx = Tensor::from_vec(vec![lang.0], 1, &Device::Cpu)?;
        let row = self.language_table.as_tensor().index_select(&idx, 0)?;
        let mut h = self.input.forward(&x)?.broadcast_add(&row)?;
        for block in &self.encoder {
            h = block.forward(&h)?;
        }
        Ok(EncoderOutput {
            hidden: h,
            boundary_indexes: seq.boundary_indexes().clone(),
        })
    }

    pub fn inject_speaker_traced(&self, enc: &EncoderOutput, speaker: &[f32]) -> Result<InjectionTrace> {
        if speaker.len() != self.config.speaker_dim {
            return Err(Error::shape(format!(
                "speaker embedding has {} dimensions, model expects {}",
                speaker.len(),
                self.config.speaker_dim
            )));
        }
        let l = enc.hidden.dim(0)?;
        let spk = self.tensor(speaker, &[1, speaker.len()])?;
        let code = softsign(&self.speaker_bottleneck.forward(&spk)?)?;
        let tiled = code.broadcast_as((l, self.config.bottleneck_dim))?.contiguous()?;
        let joined = Tensor::cat(&[&enc.hidden, &tiled], 1)?;
        let projected = self.speaker_project.forward(&joined)?;
        let normalized = self.speaker_norm.normalize(&projected)?;
        let hidden = normalized
            .broadcast_mul(self.speaker_norm.gain.as_tensor())?
            .broadcast_add(self.speaker_norm.shift.as_tensor())?;
        Ok(InjectionTrace {
            speaker_code: code,
            normalized,
            output: EncoderOutput {
                hidden,
                boundary_indexes: enc.boundary_indexes.clone(),
            },
        })
    }

    /// LayerNorm(Project(concat(h, SoftSign(Bottleneck(speaker))))) per position.
    pub fn inject_speaker(&self, enc: &EncoderOutput, speaker: &[f32]) -> Result<EncoderOutput> {
        Ok(self.inject_speaker_traced(enc, speaker)?.output)
    }

    pub fn predict_variances(&self, enc: &EncoderOutput) -> Result<Variances> {
        Ok(Variances {
            log_durations: self.duration.forward(&enc.hidden)?,
            pitch: self.pitch.forward(&enc.hidden)?,
            energy: self.energy.forward(&enc.hidden)?,
        })
    }

    /// Gold values under teacher forcing, otherwise rounded predictions.
    pub fn resolve_variances(
        &self,
        predicted: &Variances,
        boundaries: &BTreeSet<usize>,
        gold: Option<&VarianceTargets>,
    ) -> Result<ResolvedVariances> {
        let l = predicted.log_durations.dim(0)?;
        if let Some(g) = gold {
            if g.durations.len() != l || g.pitch.len() != l || g.energy.len() != l {
                return Err(Error::shape(format!("variance targets do not match {l} units")));
            }
            return Ok(ResolvedVariances {
                durations: g.durations.iter().map(|&d| i64::from(d)).collect(),
                pitch: g.pitch.clone(),
                energy: g.energy.clone(),
            });
        }
        let host = |t: &Tensor| -> Result<Vec<f32>> { Ok(t.to_dtype(DType::F32)?.to_vec1()?) };
        let log_d = host(&predicted.log_durations)?;
        let mut durations = inference_durations(&log_d, boundaries);
        if durations.iter().all(|&d| d == 0) {
            if let Some(i) = (0..l).find(|i| !boundaries.contains(i)) {
                durations[i] = 1;
            }
        }
        Ok(ResolvedVariances {
            durations,
            pitch: host(&predicted.pitch)?,
            energy: host(&predicted.energy)?,
        })
    }

    /// Adds the pitch and energy embeddings and expands by duration.
    pub fn regulate(&self, enc: &EncoderOutput, resolved: &ResolvedVariances) -> Result<Tensor> {
        let l = enc.hidden.dim(0)?;
        let p = self.pitch_embed.forward(&self.tensor(&resolved.pitch, &[l, 1])?)?;
        let e = self.energy_embed.forward(&self.tensor(&resolved.energy, &[l, 1])?)?;
        let h = ((&enc.hidden + p)? + e)?;
        length_regulate(&h, &resolved.durations, &enc.boundary_indexes)
    }

    pub fn decode(&self, frames: &Tensor) -> Result<Tensor> {
        if frames.dim(0)? == 0 {
            return Err(Error::shape("decoder input is empty"));
        }
        let mut h = frames.clone();
        for block in &self.decoder {
            h = block.forward(&h)?;
        }
        let mel = self.mel_out.forward(&h)?;
        match &self.postnet {
            Some(p) => {
                let r = p.conv2.forward(&p.conv1.forward(&mel)?.tanh()?)?;
                Ok((mel + r)?)
            }
            None => Ok(mel),
        }
    }

    /// Full pass; teacher-forced when `gold` is given.
    pub fn forward(&self, seq: &PhoneSequence, speaker: &[f32], gold: Option<&VarianceTargets>) -> Result<ForwardOutput> {
        let enc = self.encode(seq)?;
        let enc = self.inject_speaker(&enc, speaker)?;
        let variances = self.predict_variances(&enc)?;
        let resolved = self.resolve_variances(&variances, &enc.boundary_indexes, gold)?;
        let frames = self.regulate(&enc, &resolved)?;
        let mel = self.decode(&frames)?;
        Ok(ForwardOutput {
            mel,
            variances,
            resolved,
        })
    }

    /// Predicted log-mel spectrogram (`T × mel_bins`) for inference.
    pub fn synthesize(&self, seq: &PhoneSequence, speaker: &[f32]) -> Result<(Array2<f32>, ResolvedVariances)> {
        let out = self.forward(seq, speaker, None)?;
        let rows: Vec<Vec<f32>> = out.mel.to_dtype(DType::F32)?.to_vec2()?;
        let t = rows.len();
        let mel = Array2::from_shape_vec((t, self.config.mel_bins), rows.into_iter().flatten().collect())
            .map_err(|e| Error::shape(e.to_string()))?;
        Ok((mel, out.resolved))
    }
}

/// round(exp(x) - 1) clamped at 0; boundary units are always 0.
pub fn inference_durations(log_durations: &[f32], boundaries: &BTreeSet<usize>) -> Vec<i64> {
    log_durations
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if boundaries.contains(&i) {
                0
            } else {
                ((f64::from(x).exp() - 1.0).round().max(0.0)).min(1e6) as i64
            }
        })
        .collect()
}

/// Largest per-row deviation from zero mean and from unit variance.
pub fn row_moment_errors(x: &Tensor) -> Result<(f64, f64)> {
    let x = x.to_dtype(DType::F64)?;
    let mean = x.mean_keepdim(D::Minus1)?;
    let var = x.broadcast_sub(&mean)?.sqr()?.mean_keepdim(D::Minus1)?;
    let m: Vec<f64> = mean.flatten_all()?.to_vec1()?;
    let v: Vec<f64> = var.flatten_all()?.to_vec1()?;
    Ok((
        m.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        v.iter().fold(0.0f64, |a, x| a.max((x - 1.0).abs())),
    ))
}
