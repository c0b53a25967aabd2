use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{DType, Tensor};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::aligner::ctc::{ctc_loss, ctc_min_frames};
use crate::aligner::mas::{durations_from_path, mas, Posteriogram};
use crate::container::Container;
use crate::error::{Error, Result};
use crate::frontend::{FeatureInventory, PhoneSequence, PAUSE_SYMBOL, SENTENCE_MARKS};
use crate::laml::{laml_step, LossOutput, StepReport, TaskRegistry, TrainState};
use crate::nn::{host, log_softmax_last, scalar, silu, AdamConfig, Conv1d, LayerNorm, Linear, ParamStore, Precision};
use crate::LanguageId;

const CHECKPOINT_KIND: &str = "aligner";
pub const BLANK_SYMBOL: &str = "<blank>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignerConfig {
    pub mel_bins: usize,
    pub channels: usize,
    pub layers: usize,
    pub kernel: usize,
    pub decoder_channels: usize,
    /// Weight of the reconstruction term relative to CTC.
    pub reconstruction_weight: f64,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        Self {
            mel_bins: 80,
            channels: 128,
            layers: 3,
            kernel: 5,
            decoder_channels: 64,
            reconstruction_weight: 1.0,
            precision: Precision::F32,
            seed: 0,
        }
    }
}

/// Output classes: blank, every inventory phoneme, pause and sentence marks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignerVocab {
    symbols: Vec<String>,
}

impl AlignerVocab {
    pub fn from_inventory(inventory: &FeatureInventory) -> Self {
        let symbols = std::iter::once(BLANK_SYMBOL)
            .chain(inventory.symbols())
            .chain(std::iter::once(PAUSE_SYMBOL))
            .chain(SENTENCE_MARKS)
            .map(str::to_string)
            .collect();
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Class ids of the frame-bearing units of a sequence.
    pub fn targets(&self, seq: &PhoneSequence) -> Result<Vec<usize>> {
        seq.frame_unit_indexes()
            .into_iter()
            .map(|i| {
                let sym = &seq.units()[i].symbol;
                self.index(sym)
                    .ok_or_else(|| Error::config(format!("symbol {sym} is not in the aligner vocabulary")))
            })
            .collect()
    }
}

/// One training utterance: log-mel frames and frame-bearing unit classes.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignerSample {
    pub mel: Array2<f32>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignerLoss {
    pub ctc: f64,
    pub reconstruction: f64,
    pub total: f64,
    pub skipped: usize,
}

/// Convolutional frame classifier plus the auxiliary decoder that maps its
/// frame posteriors back to a spectrogram.
pub struct AlignerNet {
    config: AlignerConfig,
    vocab: AlignerVocab,
    classifier: Vec<(Conv1d, LayerNorm)>,
    classes: Linear,
    aux_in: Linear,
    aux_conv: Conv1d,
    aux_out: Linear,
    dtype: DType,
}

impl AlignerNet {
    pub fn new(store: &mut ParamStore, config: AlignerConfig, vocab: AlignerVocab) -> Result<Self> {
        if config.layers == 0 || config.kernel % 2 == 0 || config.channels == 0 {
            return Err(Error::config("aligner needs at least one layer, positive width and an odd kernel"));
        }
        let mut classifier = Vec::new();
        for i in 0..config.layers {
            let input = if i == 0 { config.mel_bins } else { config.channels };
            classifier.push((
                Conv1d::new(store, &format!("classifier.{i}.conv"), input, config.channels, config.kernel)?,
                LayerNorm::new(store, &format!("classifier.{i}.norm"), config.channels)?,
            ));
        }
        let v = vocab.len();
        Ok(Self {
            classes: Linear::new(store, "classifier.out", config.channels, v)?,
            aux_in: Linear::new(store, "aux.in", v, config.decoder_channels)?,
            aux_conv: Conv1d::new(store, "aux.conv", config.decoder_channels, config.decoder_channels, 3)?,
            aux_out: Linear::new(store, "aux.out", config.decoder_channels, config.mel_bins)?,
            classifier,
            dtype: store.dtype(),
            config,
            vocab,
        })
    }

    pub fn config(&self) -> &AlignerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &AlignerVocab {
        &self.vocab
    }

    /// Names of the auxiliary decoder parameters.
    pub fn aux_parameter_prefix() -> &'static str {
        "aux."
    }

    fn mel_tensor(&self, mel: &Array2<f32>) -> Result<Tensor> {
        if mel.ncols() != self.config.mel_bins {
            return Err(Error::shape(format!(
                "aligner expects {} mel bins, got {}",
                self.config.mel_bins,
                mel.ncols()
            )));
        }
        let data: Vec<f32> = mel.iter().copied().collect();
        host(&data, &[mel.nrows(), mel.ncols()], self.dtype, &candle_core::Device::Cpu)
    }

    /// `[T, V]` log-probabilities.
    pub fn log_probs(&self, mel: &Tensor) -> Result<Tensor> {
        let mut h = mel.clone();
        for (conv, norm) in &self.classifier {
            h = silu(&norm.forward(&conv.forward(&h)?)?)?;
        }
        log_softmax_last(&self.classes.forward(&h)?)
    }

    fn reconstruct(&self, log_probs: &Tensor) -> Result<Tensor> {
        let h = silu(&self.aux_in.forward(&log_probs.exp()?)?)?;
        let h = silu(&self.aux_conv.forward(&h)?)?;
        self.aux_out.forward(&h)
    }

    pub fn posteriogram(&self, mel: &Array2<f32>) -> Result<Posteriogram> {
        let lp = self.log_probs(&self.mel_tensor(mel)?)?;
        let rows: Vec<Vec<f32>> = lp.to_dtype(DType::F32)?.to_vec2()?;
        let v = self.vocab.len();
        let flat: Vec<f32> = rows.into_iter().flatten().collect();
        Posteriogram::new(Array2::from_shape_vec((mel.nrows(), v), flat).map_err(|e| Error::shape(e.to_string()))?)
    }

    /// Per-sample loss; `None` when the target cannot fit in the frames.
    fn sample_loss(&self, sample: &AlignerSample) -> Result<Option<(Tensor, f64, f64)>> {
        if sample.targets.is_empty() {
            return Err(Error::shape("aligner sample without targets"));
        }
        if sample.mel.nrows() < ctc_min_frames(&sample.targets) {
            tracing::warn!(
                frames = sample.mel.nrows(),
                units = sample.targets.len(),
                "skipping aligner sample whose transcript is longer than its audio"
            );
            return Ok(None);
        }
        let mel = self.mel_tensor(&sample.mel)?;
        let lp = self.log_probs(&mel)?;
        let host_lp: Vec<Vec<f64>> = lp.to_dtype(DType::F64)?.to_vec2()?;
        let (t, v) = (host_lp.len(), self.vocab.len());
        let host_lp = Array2::from_shape_vec((t, v), host_lp.into_iter().flatten().collect())
            .map_err(|e| Error::shape(e.to_string()))?;
        let (nll, grad) = ctc_loss(host_lp.view(), &sample.targets)?;
        let scale = 1.0 / sample.targets.len() as f64;
        let g: Vec<f64> = grad.iter().map(|x| x * scale).collect();
        let g = Tensor::from_vec(g, (t, v), lp.device())?.to_dtype(self.dtype)?;
        // carries value nll/len and gradient grad/len with respect to lp
        let linear = lp.mul(&g)?.sum_all()?;
        let ctc = linear.affine(1.0, nll * scale - scalar(&linear)?)?;
        let rec = self.reconstruct(&lp)?;
        let l1 = rec.sub(&mel)?.abs()?.mean_all()?;
        let l1_value = scalar(&l1)?;
        let total = (ctc + (l1 * self.config.reconstruction_weight)?)?;
        Ok(Some((total, nll * scale, l1_value)))
    }

    /// Mean loss over the usable samples of a batch.
    pub fn batch_loss(&self, batch: &[&AlignerSample]) -> Result<(Tensor, AlignerLoss)> {
        let mut total: Option<Tensor> = None;
        let (mut ctc, mut rec, mut used) = (0.0, 0.0, 0usize);
        for s in batch {
            if let Some((loss, c, r)) = self.sample_loss(s)? {
                ctc += c;
                rec += r;
                used += 1;
                total = Some(match total {
                    Some(t) => (t + loss)?,
                    None => loss,
                });
            }
        }
        let total = total.ok_or_else(|| Error::contract("every sample in the aligner batch was skipped"))?;
        let n = used as f64;
        let total = (total / n)?;
        let report = AlignerLoss {
            ctc: ctc / n,
            reconstruction: rec / n,
            total: scalar(&total)?,
            skipped: batch.len() - used,
        };
        Ok((total, report))
    }

    /// Durations for every unit of `seq`; word boundaries get 0 frames.
    pub fn align(&self, mel: &Array2<f32>, seq: &PhoneSequence) -> Result<Vec<u32>> {
        let targets = self.vocab.targets(seq)?;
        let post = self.posteriogram(mel)?;
        let selected = post.select(&targets)?;
        let path = mas(selected.view())?;
        let frame_durations = durations_from_path(&path, targets.len())?;
        let mut out = vec![0u32; seq.len()];
        for (i, d) in seq.frame_unit_indexes().into_iter().zip(frame_durations) {
            out[i] = d;
        }
        Ok(out)
    }
}

/// Aligner network with its optimizer state.
pub struct Aligner {
    pub net: AlignerNet,
    pub state: TrainState,
    feature_hash: String,
}

impl Aligner {
    pub fn new(config: AlignerConfig, vocab: AlignerVocab, optimizer: AdamConfig, feature_hash: impl Into<String>) -> Result<Self> {
        let mut store = ParamStore::new(config.seed, config.precision.dtype());
        let seed = config.seed;
        let net = AlignerNet::new(&mut store, config, vocab)?;
        Ok(Self {
            net,
            state: TrainState::new(store, optimizer, seed)?,
            feature_hash: feature_hash.into(),
        })
    }

    pub fn feature_hash(&self) -> &str {
        &self.feature_hash
    }

    /// One optimizer update on a single batch.
    pub fn train_step(&mut self, batch: &[&AlignerSample]) -> Result<AlignerLoss> {
        let (total, report) = self.net.batch_loss(batch)?;
        let grads = total.backward()?;
        self.state.optimizer.apply(&self.state.params, &grads)?;
        Ok(report)
    }

    /// One summed-per-language update drawing from `data`.
    pub fn train_step_multilingual(
        &mut self,
        registry: &mut TaskRegistry,
        data: &BTreeMap<LanguageId, Vec<AlignerSample>>,
    ) -> Result<StepReport> {
        let net = &self.net;
        laml_step(registry, &mut self.state, |language, indices| {
            let samples = data
                .get(&language)
                .ok_or_else(|| Error::config(format!("no aligner data for language {language}")))?;
            let batch: Vec<&AlignerSample> = indices.iter().map(|&i| &samples[i]).collect();
            let (total, r) = net.batch_loss(&batch)?;
            Ok(LossOutput {
                total,
                components: vec![("ctc".into(), r.ctc), ("reconstruction".into(), r.reconstruction)],
            })
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = json!({
            "config": self.net.config,
            "vocab": self.net.vocab,
            "feature_hash": self.feature_hash,
            "optimizer": self.state.optimizer.config(),
        });
        let mut c = Container::new(CHECKPOINT_KIND, meta);
        self.state.params.save_into(&mut c, "param.")?;
        self.state.optimizer.save_into(&mut c, "adam.")?;
        c.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c = Container::read(path)?;
        if c.kind != CHECKPOINT_KIND {
            return Err(Error::config(format!("expected an aligner checkpoint, found {}", c.kind)));
        }
        let config: AlignerConfig = serde_json::from_value(c.meta["config"].clone())?;
        let vocab: AlignerVocab = serde_json::from_value(c.meta["vocab"].clone())?;
        let feature_hash = c.meta["feature_hash"].as_str().unwrap_or_default().to_string();
        let optimizer: AdamConfig = serde_json::from_value(c.meta["optimizer"].clone())?;
        let mut a = Self::new(config, vocab, optimizer, feature_hash)?;
        a.state.params.load_from(&c, "param.")?;
        a.state.optimizer.load_from(&c, "adam.", &a.state.params)?;
        Ok(a)
    }
}
