use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use crate::acoustic::LoadedModel;
use crate::aligner::AlignerConfig;
use crate::data::{CorpusManifest, FeatureConfig, DEFAULT_CORPUS_CAP};
use crate::eval::{CommandAsr, ProjectionMethod, DEFAULT_TEXTS_PER_CELL};
use crate::frontend::{CommandG2p, FeatureInventory, Frontend, G2p, Lexicon, LexiconG2p};
use crate::laml::TrainConfig;
use crate::nn::AdamConfig;
use crate::pipeline::TtsSystem;
use crate::speaker::EmbedderConfig;
use crate::vocoder::{GriffinLim, GriffinLimConfig};
use crate::LanguageRegistry;

pub const RUN_SCHEMA_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "POLYTTS_CACHE_DIR";

/// Everything a command needs, resolved from a TOML file plus flags and
/// written verbatim into each run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub features: FeatureConfig,
    pub embedder: EmbedderConfig,
    pub aligner: AlignerRunConfig,
    pub train: TrainConfig,
    pub finetune: FinetuneConfig,
    pub vocoder: GriffinLimConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: RUN_SCHEMA_VERSION,
            seed: 0,
            corpus: CorpusConfig::default(),
            features: FeatureConfig::default(),
            embedder: EmbedderConfig::default(),
            aligner: AlignerRunConfig::default(),
            train: TrainConfig::default(),
            finetune: FinetuneConfig::default(),
            vocoder: GriffinLimConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub manifest: Option<PathBuf>,
    /// Language names in id order.
    pub languages: Vec<String>,
    /// Feature table; the built-in one when absent.
    pub inventory: Option<PathBuf>,
    pub g2p: G2pConfig,
    /// Per-language record cap.
    pub cap: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            languages: Vec::new(),
            inventory: None,
            g2p: G2pConfig::default(),
            cap: DEFAULT_CORPUS_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum G2pConfig {
    /// Pronunciation lexicons keyed by language name.
    Lexicon { lexicons: BTreeMap<String, PathBuf> },
    /// External phonemizer; `codes` maps language names to its voice codes.
    Command {
        program: String,
        args: Vec<String>,
        codes: BTreeMap<String, String>,
    },
}

impl Default for G2pConfig {
    fn default() -> Self {
        G2pConfig::Lexicon {
            lexicons: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignerRunConfig {
    pub model: AlignerConfig,
    pub optimizer: AdamConfig,
    pub steps: u64,
    pub batch_size: usize,
}

impl Default for AlignerRunConfig {
    fn default() -> Self {
        Self {
            model: AlignerConfig::default(),
            optimizer: AdamConfig::default(),
            steps: 5000,
            batch_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub manifest: Option<PathBuf>,
    pub language: Option<String>,
    pub minutes_budget: f64,
    /// Overrides `train.finetune_steps` when set.
    pub steps: Option<u64>,
    /// Lexicon for the new language when the lexicon g2p is used.
    pub lexicon: Option<PathBuf>,
    /// Phonemizer code for the new language when a command g2p is used.
    pub g2p_code: Option<String>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            language: None,
            minutes_budget: 5.0,
            steps: None,
            lexicon: None,
            g2p_code: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    /// JSON lines of `{"speaker", "language", "audio": [paths]}`.
    pub references: Option<PathBuf>,
    /// JSON object mapping language names to lists of texts.
    pub texts: Option<PathBuf>,
    pub texts_per_cell: usize,
    pub single_speaker_languages: Vec<String>,
    pub projection: ProjectionMethod,
    pub asr: Option<CommandAsr>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            references: None,
            texts: None,
            texts_per_cell: DEFAULT_TEXTS_PER_CELL,
            single_speaker_languages: Vec::new(),
            projection: ProjectionMethod::Pca,
            asr: None,
        }
    }
}

fn absolutize(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.schema_version != RUN_SCHEMA_VERSION {
            bail!(
                "run config schema version {} is not supported (expected {RUN_SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        let base = path
            .parent()
            .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
            .unwrap_or(Path::new("."));
        let base = std::fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
        cfg.make_paths_absolute(&base);
        Ok(cfg)
    }

    /// Relative paths in the file are taken relative to the file itself.
    pub fn make_paths_absolute(&mut self, base: &Path) {
        let c = &mut self.corpus;
        for p in c.manifest.iter_mut().chain(c.inventory.iter_mut()) {
            absolutize(base, p);
        }
        if let G2pConfig::Lexicon { lexicons } = &mut c.g2p {
            lexicons.values_mut().for_each(|p| absolutize(base, p));
        }
        let f = &mut self.finetune;
        for p in f.manifest.iter_mut().chain(f.lexicon.iter_mut()) {
            absolutize(base, p);
        }
        let e = &mut self.evaluate;
        for p in e.references.iter_mut().chain(e.texts.iter_mut()) {
            absolutize(base, p);
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn manifest(&self) -> anyhow::Result<CorpusManifest> {
        let path = self
            .corpus
            .manifest
            .as_ref()
            .context("no corpus manifest configured (set corpus.manifest or pass --manifest)")?;
        Ok(CorpusManifest::load(path)?)
    }

    pub fn inventory(&self) -> anyhow::Result<Arc<FeatureInventory>> {
        Ok(Arc::new(match &self.corpus.inventory {
            Some(p) => FeatureInventory::load(p)?,
            None => FeatureInventory::builtin(),
        }))
    }

    /// Frontend over `languages`, which may extend the configured list.
    pub fn frontend(&self, languages: &LanguageRegistry) -> anyhow::Result<Frontend> {
        let inventory = self.inventory()?;
        let g2p: Arc<dyn G2p> = match &self.corpus.g2p {
            G2pConfig::Lexicon { lexicons } => {
                let mut g = LexiconG2p::new();
                for (name, path) in lexicons {
                    let Some(id) = languages.id(name) else { continue };
                    let lex = Lexicon::load(path).with_context(|| format!("lexicon for {name}"))?;
                    g.insert(id, lex);
                }
                Arc::new(g)
            }
            G2pConfig::Command { program, args, codes } => {
                let codes = codes
                    .iter()
                    .filter_map(|(name, code)| languages.id(name).map(|id| (id, code.clone())))
                    .collect();
                Arc::new(CommandG2p::new(program.clone(), args.clone(), codes, inventory.clone()))
            }
        };
        Ok(Frontend::new(inventory, languages.clone(), g2p))
    }

    pub fn languages(&self) -> anyhow::Result<LanguageRegistry> {
        if self.corpus.languages.is_empty() {
            bail!("corpus.languages is empty");
        }
        Ok(LanguageRegistry::new(self.corpus.languages.clone())?)
    }

    /// Adds the fine-tuning language to the g2p configuration.
    pub fn register_finetune_language(&mut self, name: &str) -> anyhow::Result<()> {
        match &mut self.corpus.g2p {
            G2pConfig::Lexicon { lexicons } => {
                let lex = self
                    .finetune
                    .lexicon
                    .clone()
                    .context("the lexicon g2p needs finetune.lexicon (or --lexicon) for the new language")?;
                lexicons.insert(name.to_string(), lex);
            }
            G2pConfig::Command { codes, .. } => {
                let code = self
                    .finetune
                    .g2p_code
                    .clone()
                    .context("a command g2p needs finetune.g2p_code for the new language")?;
                codes.insert(name.to_string(), code);
            }
        }
        self.corpus.languages.push(name.to_string());
        Ok(())
    }

    /// Model checkpoint plus the frontend and vocoder this config describes.
    pub fn load_system(&self, checkpoint: &Path) -> anyhow::Result<TtsSystem> {
        let model = LoadedModel::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
        let frontend = self.frontend(&model.meta.languages)?;
        ensure!(
            frontend.inventory().hash() == model.meta.inventory_hash,
            "feature inventory differs from the one the model was trained with"
        );
        ensure!(
            self.features.hash() == model.meta.feature_hash,
            "feature extraction settings differ from the ones the model was trained with"
        );
        ensure!(
            self.embedder.dim() == model.meta.config.speaker_dim,
            "embedder produces {} values, the model expects {}",
            self.embedder.dim(),
            model.meta.config.speaker_dim
        );
        let vocoder = GriffinLim::new(self.features.clone(), self.vocoder.clone());
        Ok(TtsSystem {
            model,
            frontend,
            vocoder: Box::new(vocoder),
        })
    }
}
