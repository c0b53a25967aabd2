use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::acoustic::{tts_loss, AcousticModel, LoadedModel, ModelConfig, ModelMeta, TrainingTarget};
use crate::container::Container;
use crate::error::{Error, Result};
use crate::frontend::PhoneSequence;
use crate::laml::sampler::{SamplerState, TaskRegistry};
use crate::laml::step::{laml_step, summed_loss, LossOutput, StepReport, TrainState};
use crate::nn::{scalar, AdamConfig};
use crate::LanguageId;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FINETUNE_STEPS: u64 = 5000;

/// Declarative training settings, versioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub schema_version: u32,
    pub steps: u64,
    pub finetune_steps: u64,
    /// Utterances drawn per language per step.
    pub batch_size: usize,
    pub seed: u64,
    /// Checkpoint cadence in steps; 0 writes only at the end of a run.
    pub checkpoint_every: u64,
    pub optimizer: AdamConfig,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            steps: 60_000,
            finetune_steps: DEFAULT_FINETUNE_STEPS,
            batch_size: 4,
            seed: 0,
            checkpoint_every: 1000,
            optimizer: AdamConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(format!("training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "training config schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        self.optimizer.validate()?;
        self.model.validate()
    }
}

/// One utterance ready for teacher-forced training.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub sequence: PhoneSequence,
    pub target: TrainingTarget,
    pub speaker: Vec<f32>,
}

/// Mean teacher-forced loss over a batch of examples.
pub fn batch_loss(model: &AcousticModel, examples: &[TrainingExample], indices: &[usize]) -> Result<LossOutput> {
    let mut total = None;
    let mut sums = [0.0f64; 4];
    for &i in indices {
        let ex = examples
            .get(i)
            .ok_or_else(|| Error::shape(format!("example index {i} out of range")))?;
        let out = model.forward(&ex.sequence, &ex.speaker, Some(&ex.target.variances))?;
        let (loss, parts) = tts_loss(&out.mel, &out.variances, &ex.target)?;
        for (s, v) in sums.iter_mut().zip([parts.mel, parts.duration, parts.pitch, parts.energy]) {
            *s += v;
        }
        total = Some(match total {
            Some(t) => (t + loss)?,
            None => loss,
        });
    }
    let n = indices.len() as f64;
    let total = (total.ok_or_else(|| Error::shape("empty batch"))? / n)?;
    let names = ["mel_l1", "duration_mse", "pitch_mse", "energy_mse"];
    Ok(LossOutput {
        total,
        components: names.iter().zip(sums).map(|(k, v)| (k.to_string(), v / n)).collect(),
    })
}

/// Append-only CSV of per-language losses.
pub struct LossLog {
    path: PathBuf,
}

impl LossLog {
    pub const HEADER: &'static str = "step,language_id,total,mel_l1,duration_mse,pitch_mse,energy_mse";

    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let fresh = std::fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
        if fresh {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, format!("{}\n", Self::HEADER))?;
        }
        Ok(Self { path })
    }

    pub fn append(&self, report: &StepReport) -> Result<()> {
        let mut f = OpenOptions::new().append(true).open(&self.path)?;
        for (lang, l) in &report.per_language {
            let parts: Vec<String> = l.components.iter().map(|(_, v)| format!("{v:.8}")).collect();
            writeln!(f, "{},{},{:.8},{}", report.step, lang, l.total, parts.join(","))?;
        }
        Ok(())
    }
}

/// Acoustic model under meta-training, with its tasks and data.
pub struct Trainer {
    pub model: AcousticModel,
    pub state: TrainState,
    pub registry: TaskRegistry,
    pub data: BTreeMap<LanguageId, Vec<TrainingExample>>,
    pub config: TrainConfig,
    pub meta: ModelMeta,
    log: Option<LossLog>,
}

impl Trainer {
    /// Fresh initialization from `config.seed`; one task per language in `data`.
    pub fn new(config: TrainConfig, meta: ModelMeta, data: BTreeMap<LanguageId, Vec<TrainingExample>>) -> Result<Self> {
        let mut config = config;
        config.model.language_count = meta.languages.len();
        config.validate()?;
        let mut meta = meta;
        meta.config = config.model.clone();
        let loaded = LoadedModel::new(meta)?;
        let mut registry = TaskRegistry::new(config.batch_size, config.seed)?;
        for (&lang, examples) in &data {
            loaded.meta.languages.check(lang)?;
            if let Some(bad) = examples.iter().find(|e| e.sequence.language() != lang) {
                return Err(Error::config(format!(
                    "example of language {} filed under task {lang}",
                    bad.sequence.language()
                )));
            }
            registry.register(lang, examples.len())?;
        }
        Ok(Self {
            model: loaded.model,
            state: TrainState::new(loaded.params, config.optimizer, config.seed)?,
            registry,
            data,
            config,
            meta: loaded.meta,
            log: None,
        })
    }

    pub fn with_log(mut self, log: LossLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn set_log(&mut self, log: Option<LossLog>) {
        self.log = log;
    }

    pub fn step_count(&self) -> u64 {
        self.state.step()
    }

    /// One summed-per-language update.
    pub fn step(&mut self) -> Result<StepReport> {
        let model = &self.model;
        let data = &self.data;
        let report = laml_step(&mut self.registry, &mut self.state, |lang, idx| {
            let examples = data
                .get(&lang)
                .ok_or_else(|| Error::config(format!("no data for language {lang}")))?;
            batch_loss(model, examples, idx)
        })?;
        if let Some(log) = &self.log {
            log.append(&report)?;
        }
        Ok(report)
    }

    /// Runs `steps` updates, checkpointing on the configured cadence and at
    /// the end when `checkpoint` is given.
    pub fn run(&mut self, steps: u64, checkpoint: Option<&Path>) -> Result<Vec<StepReport>> {
        let mut reports = Vec::with_capacity(steps as usize);
        for i in 0..steps {
            let report = self.step()?;
            if i % 50 == 0 || i + 1 == steps {
                tracing::info!(step = report.step, loss = report.total, "laml step");
            }
            reports.push(report);
            if let Some(path) = checkpoint {
                let every = self.config.checkpoint_every;
                if (every > 0 && self.step_count() % every == 0) || i + 1 == steps {
                    self.save_checkpoint(path)?;
                }
            }
        }
        Ok(reports)
    }

    /// Loss on a fixed batch without updating anything.
    pub fn probe_loss(&self, language: LanguageId, indices: &[usize]) -> Result<f64> {
        let examples = self
            .data
            .get(&language)
            .ok_or_else(|| Error::config(format!("no data for language {language}")))?;
        scalar(&batch_loss(&self.model, examples, indices)?.total)
    }

    /// Summed loss over one fixed batch per task, without an update.
    pub fn probe_summed(&self, batches: &[(LanguageId, Vec<usize>)]) -> Result<f64> {
        let mut f = |lang: LanguageId, idx: &[usize]| {
            let examples = self
                .data
                .get(&lang)
                .ok_or_else(|| Error::config(format!("no data for language {lang}")))?;
            batch_loss(&self.model, examples, idx)
        };
        scalar(&summed_loss(batches, &mut f)?.0)
    }

    /// Id the next registered language will receive.
    pub fn next_language_id(&self) -> LanguageId {
        LanguageId(self.meta.languages.len() as u32)
    }

    /// Adds a language with a mean-initialized embedding row and makes it a
    /// task. The name must not collide with an existing language.
    pub fn add_language(&mut self, name: &str, examples: Vec<TrainingExample>) -> Result<LanguageId> {
        if self.meta.languages.id(name).is_some() {
            return Err(Error::config(format!("language `{name}` is already registered")));
        }
        let id = self.next_language_id();
        if let Some(bad) = examples.iter().find(|e| e.sequence.language() != id) {
            return Err(Error::config(format!(
                "new-language examples must carry id {id}, found {}",
                bad.sequence.language()
            )));
        }
        if examples.is_empty() {
            return Err(Error::EmptyTask(id));
        }
        let mut registry = self.registry.clone();
        registry.register(id, examples.len())?;
        let model_id = self.model.add_language(&mut self.state.params, Some(&mut self.state.optimizer))?;
        debug_assert_eq!(model_id, id);
        self.meta.languages.register(name)?;
        self.meta.config = self.model.config().clone();
        self.config.model = self.model.config().clone();
        self.registry = registry;
        self.data.insert(id, examples);
        Ok(id)
    }

    fn container(&self) -> Result<Container> {
        let mut meta = self.meta.clone();
        meta.config = self.model.config().clone();
        let samplers: BTreeMap<String, SamplerState> = self
            .registry
            .states()
            .into_iter()
            .map(|(l, s)| (l.to_string(), s))
            .collect();
        let mut c = Container::new(
            crate::acoustic::CHECKPOINT_KIND,
            json!({
                "model": meta,
                "training": {
                    "config": self.config,
                    "step": self.step_count(),
                    "seed": self.state.seed,
                    "samplers": samplers,
                }
            }),
        );
        self.state.params.save_into(&mut c, "param.")?;
        self.state.optimizer.save_into(&mut c, "adam.")?;
        Ok(c)
    }

    /// Writes a checkpoint, retrying at `<path>.fallback` if the primary
    /// write fails. The in-memory state is untouched either way.
    pub fn save_checkpoint(&self, path: &Path) -> Result<PathBuf> {
        let c = self.container()?;
        match c.write(path) {
            Ok(()) => Ok(path.to_path_buf()),
            Err(first) => {
                let fallback = fallback_path(path);
                tracing::warn!(path = %path.display(), error = %first, "checkpoint write failed, retrying at fallback");
                match c.write(&fallback) {
                    Ok(()) => Ok(fallback),
                    Err(second) => Err(Error::Checkpoint {
                        primary: path.to_path_buf(),
                        fallback,
                        msg: format!("{first}; {second}"),
                    }),
                }
            }
        }
    }

    /// Restores a trainer from a checkpoint and the same data it was trained on.
    pub fn resume(path: &Path, data: BTreeMap<LanguageId, Vec<TrainingExample>>) -> Result<Self> {
        let c = Container::read(path)?;
        let training = c
            .meta
            .get("training")
            .ok_or_else(|| Error::config("checkpoint has no training state"))?;
        let config: TrainConfig = serde_json::from_value(training["config"].clone())?;
        let meta: ModelMeta = serde_json::from_value(c.meta["model"].clone())?;
        let mut trainer = Trainer::new(config, meta, data)?;
        trainer.state.params.load_from(&c, "param.")?;
        trainer.state.optimizer.load_from(&c, "adam.", &trainer.state.params)?;
        let step = training["step"].as_u64().unwrap_or(0);
        if trainer.step_count() != step {
            return Err(Error::config(format!(
                "checkpoint step {step} disagrees with optimizer step {}",
                trainer.step_count()
            )));
        }
        let samplers: BTreeMap<String, SamplerState> = serde_json::from_value(training["samplers"].clone())?;
        let samplers = samplers
            .into_iter()
            .map(|(k, v)| {
                k.parse::<u32>()
                    .map(|l| (LanguageId(l), v))
                    .map_err(|_| Error::config(format!("bad sampler key {k}")))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        trainer.registry.restore(&samplers)?;
        Ok(trainer)
    }

    pub fn loaded_model(&self) -> Result<LoadedModel> {
        let mut meta = self.meta.clone();
        meta.config = self.model.config().clone();
        let c = self.container()?;
        let mut loaded = LoadedModel::new(meta)?;
        loaded.params.load_from(&c, "param.")?;
        Ok(loaded)
    }
}

fn fallback_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".fallback");
    let dir = std::env::temp_dir();
    match path.parent() {
        Some(p) if p.is_dir() => p.join(&name),
        _ => dir.join(name),
    }
}

/// LAML pretraining for `config.steps` steps.
pub fn pretrain(
    config: TrainConfig,
    meta: ModelMeta,
    data: BTreeMap<LanguageId, Vec<TrainingExample>>,
    checkpoint: Option<&Path>,
    log: Option<LossLog>,
) -> Result<Trainer> {
    let mut trainer = Trainer::new(config, meta, data)?;
    trainer.set_log(log);
    let steps = trainer.config.steps;
    trainer.run(steps, checkpoint)?;
    Ok(trainer)
}

/// Adds the small corpus as a new language task and continues joint LAML
/// training with every pretraining language for `steps` updates
/// (`config.finetune_steps` when `None`).
pub fn finetune_lowresource(
    trainer: &mut Trainer,
    language: &str,
    examples: Vec<TrainingExample>,
    steps: Option<u64>,
    checkpoint: Option<&Path>,
) -> Result<Vec<StepReport>> {
    trainer.add_language(language, examples)?;
    let steps = steps.unwrap_or(trainer.config.finetune_steps);
    trainer.run(steps, checkpoint)
}
