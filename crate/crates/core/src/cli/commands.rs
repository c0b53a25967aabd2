use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use polytts::acoustic::{ModelConfig, ModelMeta};
use polytts::aligner::{Aligner, AlignerSample, AlignerVocab};
use polytts::container::Container;
use polytts::data::{read_wav, write_wav, CorpusManifest, FeatureCache, Waveform, SAMPLE_RATE};
use polytts::eval::{
    accent_delta, intelligibility, project2d, similarity_report, AsrAdapter, IntelligibilityItem,
    IntelligibilityOutcome, ProjectionMethod, RateUnit, Reference,
};
use polytts::frontend::{Frontend, UnitKind};
use polytts::laml::{finetune_lowresource, LossLog, TaskRegistry, Trainer, TrainingExample};
use polytts::pipeline::{align_corpus, prepare_corpus, training_examples, PreparedCorpus};
use polytts::speaker::{embed, SpeakerEmbedder};
use polytts::toy::{make_toy_corpus, ToyConfig};
use polytts::{LanguageId, LanguageRegistry};

use polytts::config::{G2pConfig, RunConfig, CACHE_ENV};
use super::{Command, Common};

pub fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::MakeToyCorpus {
            out,
            languages,
            utterances,
            speakers,
            seed,
        } => make_toy(&out, languages, utterances, speakers, seed),
        Command::Prepare { common, cap } => prepare(&common, cap),
        Command::TrainAligner { common, steps } => train_aligner(&common, steps),
        Command::Pretrain {
            common,
            aligner,
            steps,
            resume,
        } => pretrain(&common, &aligner, steps, resume.as_deref()),
        Command::Finetune {
            common,
            checkpoint,
            aligner,
            new_manifest,
            language,
            lexicon,
            minutes_budget,
            steps,
        } => {
            let mut cfg = resolve(&common)?;
            let f = &mut cfg.finetune;
            f.manifest = new_manifest.or(f.manifest.take());
            f.language = language.or(f.language.take());
            f.lexicon = lexicon.or(f.lexicon.take());
            f.steps = steps.or(f.steps);
            if let Some(m) = minutes_budget {
                f.minutes_budget = m;
            }
            finetune(cfg, &common.out, &checkpoint, &aligner)
        }
        Command::Synthesize {
            config,
            checkpoint,
            text,
            language,
            reference,
            out,
        } => synthesize(config.as_deref(), &checkpoint, &text, &language, &reference, &out),
        Command::Evaluate {
            common,
            checkpoint,
            references,
            texts,
            tsne,
        } => {
            let mut cfg = resolve(&common)?;
            cfg.evaluate.references = references.or(cfg.evaluate.references.take());
            cfg.evaluate.texts = texts.or(cfg.evaluate.texts.take());
            if tsne {
                cfg.evaluate.projection = ProjectionMethod::Tsne {
                    seed: cfg.seed,
                    perplexity: 5.0,
                    iterations: 500,
                };
            }
            evaluate(cfg, &common.out, &checkpoint)
        }
    }
}

// ── shared plumbing ─────────────────────────────────────────────────────────

fn resolve(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = &common.manifest {
        cfg.corpus.manifest = Some(std::path::absolute(m)?);
    }
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

/// Creates the run directory with the resolved config and the code version.
fn start_run(out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating run directory {}", out.display()))?;
    std::fs::write(out.join("resolved_config.toml"), cfg.to_toml()?)?;
    std::fs::write(out.join("version.txt"), format!("{}\n", polytts::VERSION_TAG))?;
    Ok(())
}

fn cache(cfg: &RunConfig) -> FeatureCache {
    let root = std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".polytts-cache"));
    FeatureCache::new(root, cfg.features.clone())
}

fn embedder(cfg: &RunConfig) -> anyhow::Result<Arc<dyn SpeakerEmbedder>> {
    Ok(cfg.embedder.build()?)
}

fn file_tag(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load_audio(path: &Path) -> anyhow::Result<Waveform> {
    let w = read_wav(path)?;
    Ok(if w.sample_rate == SAMPLE_RATE { w } else { w.resample(SAMPLE_RATE) })
}

fn prepare_with(
    cfg: &RunConfig,
    manifest: &CorpusManifest,
    frontend: &Frontend,
) -> anyhow::Result<PreparedCorpus> {
    let embedder = embedder(cfg)?;
    Ok(prepare_corpus(manifest, frontend, &cache(cfg), &*embedder, cfg.corpus.cap, cfg.seed)?)
}

fn load_aligner(cfg: &RunConfig, path: &Path) -> anyhow::Result<(Aligner, String)> {
    let aligner = Aligner::load(path)?;
    ensure!(
        aligner.feature_hash() == cfg.features.hash(),
        "aligner {} was trained on different feature settings",
        path.display()
    );
    Ok((aligner, file_tag(path)?))
}

fn aligned_examples(
    cfg: &RunConfig,
    corpus: &PreparedCorpus,
    aligner: &Aligner,
    tag: &str,
) -> anyhow::Result<BTreeMap<LanguageId, Vec<TrainingExample>>> {
    let features = align_corpus(&aligner.net, tag, corpus, &cache(cfg))?;
    let skipped = features.iter().filter(|f| f.is_none()).count();
    if skipped > 0 {
        eprintln!("skipped {skipped} utterance(s) too short to align");
    }
    Ok(training_examples(corpus, &features)?)
}

fn model_meta(cfg: &RunConfig, frontend: &Frontend) -> anyhow::Result<ModelMeta> {
    let languages = frontend.languages().clone();
    Ok(ModelMeta {
        config: ModelConfig {
            feature_dim: frontend.inventory().dim(),
            speaker_dim: cfg.embedder.dim(),
            mel_bins: cfg.features.n_mels,
            language_count: languages.len(),
            seed: cfg.seed,
            ..cfg.train.model.clone()
        },
        languages,
        inventory_hash: frontend.inventory().hash().to_string(),
        feature_hash: cfg.features.hash(),
    })
}

/// Loads a model checkpoint and a frontend over its languages, checking
/// that the configuration matches what the model was trained with.
// ── commands ────────────────────────────────────────────────────────────────

fn make_toy(out: &Path, languages: usize, utterances: usize, speakers: usize, seed: u64) -> anyhow::Result<()> {
    let corpus = make_toy_corpus(&ToyConfig {
        languages,
        utterances_per_language: utterances,
        speakers,
        seed,
        ..ToyConfig::default()
    })?;
    // With three or more languages the last one is held out for fine-tuning.
    let held_out = (languages >= 3).then(|| LanguageId(languages as u32 - 1));
    let train_ids: Vec<LanguageId> = corpus.languages.ids().filter(|l| Some(*l) != held_out).collect();
    corpus.write_to(out, Some(&train_ids))?;
    let names: Vec<String> = train_ids.iter().map(|&l| corpus.languages.name(l).unwrap_or("?").to_string()).collect();

    let mut cfg = RunConfig::default();
    cfg.seed = seed;
    cfg.corpus.manifest = Some("manifest.jsonl".into());
    cfg.corpus.languages = names.clone();
    cfg.corpus.g2p = G2pConfig::Lexicon {
        lexicons: names.iter().map(|n| (n.clone(), PathBuf::from(format!("{n}.lexicon.tsv")))).collect(),
    };
    cfg.embedder = polytts::speaker::EmbedderConfig::Toy;
    cfg.aligner.model.channels = 32;
    cfg.aligner.model.layers = 2;
    cfg.aligner.model.decoder_channels = 16;
    cfg.aligner.steps = 200;
    cfg.aligner.batch_size = 4;
    cfg.aligner.optimizer.warmup_steps = 50;
    cfg.train.model = ModelConfig::toy();
    cfg.train.steps = 300;
    cfg.train.finetune_steps = 200;
    cfg.train.checkpoint_every = 100;
    cfg.train.batch_size = 4;
    cfg.train.optimizer.warmup_steps = 100;
    cfg.train.optimizer.learning_rate = 2e-3;
    cfg.vocoder.iterations = 32;
    cfg.evaluate.references = Some("references.jsonl".into());
    cfg.evaluate.texts = Some("texts.json".into());

    if let Some(h) = held_out {
        let dir = out.join("holdout");
        corpus.write_to(&dir, Some(&[h]))?;
        let name = corpus.languages.name(h).unwrap_or("?").to_string();
        cfg.finetune.manifest = Some(PathBuf::from("holdout").join("manifest.jsonl"));
        cfg.finetune.lexicon = Some(PathBuf::from("holdout").join(format!("{name}.lexicon.tsv")));
        cfg.finetune.language = Some(name);
    }

    // Two reference utterances per speaker and two texts per training language.
    let mut refs = String::new();
    for s in 0..corpus.speakers.len() {
        let utts: Vec<usize> = corpus
            .utterances
            .iter()
            .enumerate()
            .filter(|(_, u)| u.speaker == s && train_ids.contains(&u.language))
            .map(|(i, _)| i)
            .take(2)
            .collect();
        let Some(&first) = utts.first() else { continue };
        let audio: Vec<String> = utts.iter().map(|i| format!("wav/utt{i:05}.wav")).collect();
        let lang = corpus.languages.name(corpus.utterances[first].language).unwrap_or("?");
        let line = serde_json::json!({ "speaker": polytts::toy::ToyCorpus::speaker_id(s), "language": lang, "audio": audio });
        let _ = writeln!(refs, "{line}");
    }
    std::fs::write(out.join("references.jsonl"), refs)?;
    let texts: BTreeMap<String, Vec<String>> = corpus
        .languages
        .ids()
        .map(|l| {
            let name = corpus.languages.name(l).unwrap_or("?").to_string();
            (name, corpus.by_language(l).iter().take(2).map(|u| u.text.clone()).collect())
        })
        .collect();
    std::fs::write(out.join("texts.json"), serde_json::to_string_pretty(&texts)?)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    println!(
        "wrote {} utterances in {} language(s) to {}{}",
        corpus.utterances.iter().filter(|u| train_ids.contains(&u.language)).count(),
        train_ids.len(),
        out.display(),
        held_out.map_or(String::new(), |_| " (last language held out under holdout/)".into())
    );
    Ok(())
}

fn prepare(common: &Common, cap: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(c) = cap {
        cfg.corpus.cap = c;
    }
    start_run(&common.out, &cfg)?;
    let manifest = cfg.manifest()?.capped(cfg.corpus.cap, cfg.seed);
    let frontend = cfg.frontend(&cfg.languages()?)?;
    let corpus = prepare_with(&cfg, &manifest, &frontend)?;
    manifest.save(common.out.join("prepared.jsonl"))?;
    std::fs::write(common.out.join("speakers.json"), serde_json::to_string_pretty(&corpus.speakers)?)?;
    for (lang, records) in manifest.by_language() {
        let name = frontend.languages().name(lang).unwrap_or("?");
        println!("{name}: {} utterance(s) prepared", records.len());
    }
    Ok(())
}

fn train_aligner(common: &Common, steps: Option<u64>) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(s) = steps {
        cfg.aligner.steps = s;
    }
    cfg.aligner.model.mel_bins = cfg.features.n_mels;
    cfg.aligner.model.seed = cfg.seed;
    start_run(&common.out, &cfg)?;
    let frontend = cfg.frontend(&cfg.languages()?)?;
    let corpus = prepare_with(&cfg, &cfg.manifest()?, &frontend)?;
    let vocab = AlignerVocab::from_inventory(frontend.inventory());
    let mut data: BTreeMap<LanguageId, Vec<AlignerSample>> = BTreeMap::new();
    for u in &corpus.utterances {
        data.entry(u.sequence.language()).or_default().push(AlignerSample {
            mel: u.frames.mel.clone(),
            targets: vocab.targets(&u.sequence)?,
        });
    }
    let mut registry = TaskRegistry::new(cfg.aligner.batch_size, cfg.seed)?;
    for (lang, samples) in &data {
        registry.register(*lang, samples.len())?;
    }
    let mut aligner = Aligner::new(cfg.aligner.model.clone(), vocab, cfg.aligner.optimizer, cfg.features.hash())?;
    let mut log = String::from("step,language_id,total,ctc,reconstruction\n");
    let every = (cfg.aligner.steps / 10).max(1);
    for _ in 0..cfg.aligner.steps {
        let r = aligner.train_step_multilingual(&mut registry, &data)?;
        for (lang, l) in &r.per_language {
            let parts: Vec<String> = l.components.iter().map(|(_, v)| format!("{v:.8}")).collect();
            let _ = writeln!(log, "{},{},{:.8},{}", r.step, lang, l.total, parts.join(","));
        }
        if r.step % every == 0 {
            eprintln!("aligner step {}: loss {:.4}", r.step, r.total);
        }
    }
    std::fs::write(common.out.join("aligner_loss.csv"), log)?;
    let path = common.out.join("aligner.ckpt");
    aligner.save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}

fn pretrain(common: &Common, aligner_path: &Path, steps: Option<u64>, resume: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(s) = steps {
        cfg.train.steps = s;
    }
    let frontend = cfg.frontend(&cfg.languages()?)?;
    let meta = model_meta(&cfg, &frontend)?;
    cfg.train.model = meta.config.clone();
    start_run(&common.out, &cfg)?;
    let corpus = prepare_with(&cfg, &cfg.manifest()?, &frontend)?;
    let (aligner, tag) = load_aligner(&cfg, aligner_path)?;
    let data = aligned_examples(&cfg, &corpus, &aligner, &tag)?;
    ensure!(!data.is_empty(), "no aligned training data");
    let mut trainer = match resume {
        Some(p) => Trainer::resume(p, data)?,
        None => Trainer::new(cfg.train.clone(), meta, data)?,
    };
    trainer.set_log(Some(LossLog::open(common.out.join("loss.csv"))?));
    let ckpt = common.out.join("pretrain.ckpt");
    let remaining = cfg.train.steps.saturating_sub(trainer.step_count());
    let reports = trainer.run(remaining, Some(&ckpt))?;
    if reports.is_empty() {
        trainer.save_checkpoint(&ckpt)?;
    }
    match reports.last() {
        Some(r) => println!("step {}: summed loss {:.4}; saved {}", r.step, r.total, ckpt.display()),
        None => println!("no steps run; saved {}", ckpt.display()),
    }
    Ok(())
}

fn wav_seconds(path: &Path) -> anyhow::Result<f64> {
    let reader = hound::WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    Ok(f64::from(reader.duration()) / f64::from(spec.sample_rate))
}

fn finetune(mut cfg: RunConfig, out: &Path, checkpoint: &Path, aligner_path: &Path) -> anyhow::Result<()> {
    let name = cfg.finetune.language.clone().context("no new language given (--language)")?;
    let new_manifest = cfg.finetune.manifest.clone().context("no new-language manifest given (--new-manifest)")?;
    ensure!(cfg.finetune.minutes_budget > 0.0, "minutes budget must be positive");

    let pretrained = Container::read(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    let meta: ModelMeta = serde_json::from_value(
        pretrained.meta.get("model").cloned().context("checkpoint lacks model metadata")?,
    )?;
    if meta.languages.id(&name).is_some() {
        bail!("language `{name}` is already part of the pretrained model");
    }
    let new_id = LanguageId(meta.languages.len() as u32);

    let mut manifest = CorpusManifest::load(&new_manifest)?;
    for r in &mut manifest.records {
        r.language_id = new_id;
    }
    let budget = cfg.finetune.minutes_budget * 60.0;
    let (selected, seconds) =
        manifest.select_by_duration(budget, cfg.seed, |r| wav_seconds(&manifest.resolve(r)).map_err(|e| polytts::Error::Config(format!("{e:#}"))))?;
    ensure!(!selected.records.is_empty(), "no utterance fits in the {:.1} minute budget", cfg.finetune.minutes_budget);

    let pre_frontend = cfg.frontend(&meta.languages)?;
    cfg.register_finetune_language(&name)?;
    let mut languages: LanguageRegistry = meta.languages.clone();
    languages.register(&name)?;
    let frontend = cfg.frontend(&languages)?;
    start_run(out, &cfg)?;
    selected.save(out.join("selected.jsonl"))?;
    std::fs::write(
        out.join("selection.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "language": name,
            "utterances": selected.records.len(),
            "seconds": seconds,
            "budget_seconds": budget,
        }))?,
    )?;

    let (aligner, tag) = load_aligner(&cfg, aligner_path)?;
    let pre_corpus = prepare_with(&cfg, &cfg.manifest()?, &pre_frontend)?;
    let pre_data = aligned_examples(&cfg, &pre_corpus, &aligner, &tag)?;
    let new_corpus = prepare_with(&cfg, &selected, &frontend)?;
    let new_examples = aligned_examples(&cfg, &new_corpus, &aligner, &tag)?.remove(&new_id).unwrap_or_default();
    ensure!(!new_examples.is_empty(), "no aligned utterances for `{name}`");

    let mut trainer = Trainer::resume(checkpoint, pre_data)?;
    trainer.set_log(Some(LossLog::open(out.join("loss.csv"))?));
    let steps = cfg.finetune.steps.unwrap_or(cfg.train.finetune_steps);
    let ckpt = out.join("finetune.ckpt");
    let reports = finetune_lowresource(&mut trainer, &name, new_examples, Some(steps), Some(&ckpt))?;
    if reports.is_empty() {
        trainer.save_checkpoint(&ckpt)?;
    }
    println!(
        "selected {} utterance(s), {seconds:.1} s of audio for `{name}`; {} step(s); saved {}",
        selected.records.len(),
        reports.len(),
        ckpt.display()
    );
    Ok(())
}

fn synthesize(
    config: Option<&Path>,
    checkpoint: &Path,
    text: &str,
    language: &str,
    reference: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let system = cfg.load_system(checkpoint)?;
    let language = system.resolve_language(language)?;
    let embedder = embedder(&cfg)?;
    let speaker = embed(&*embedder, &load_audio(reference)?)?;
    let result = system.synthesize(text, language, &speaker.vector)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_wav(out, &result.audio)?;
    println!(
        "wrote {} ({:.2} s, {} frames)",
        out.display(),
        result.audio.duration_secs(),
        result.mel.nrows()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ReferenceLine {
    speaker: String,
    language: String,
    audio: Vec<PathBuf>,
}

fn read_references(path: &Path, languages: &LanguageRegistry) -> anyhow::Result<Vec<Reference>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut refs = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: ReferenceLine =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        let audio = r
            .audio
            .iter()
            .map(|p| load_audio(&if p.is_relative() { base.join(p) } else { p.clone() }))
            .collect::<anyhow::Result<Vec<_>>>()?;
        refs.push(Reference {
            speaker: r.speaker,
            language: languages.resolve(&r.language)?,
            audio,
        });
    }
    ensure!(!refs.is_empty(), "{} lists no references", path.display());
    Ok(refs)
}

fn evaluate(cfg: RunConfig, out: &Path, checkpoint: &Path) -> anyhow::Result<()> {
    start_run(out, &cfg)?;
    let system = cfg.load_system(checkpoint)?;
    let languages = system.model.meta.languages.clone();
    let embedder = embedder(&cfg)?;
    let refs_path = cfg.evaluate.references.clone().context("no reference list (--references)")?;
    let texts_path = cfg.evaluate.texts.clone().context("no evaluation texts (--texts)")?;
    let references = read_references(&refs_path, &languages)?;
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(
        &std::fs::read_to_string(&texts_path).with_context(|| format!("reading {}", texts_path.display()))?,
    )?;
    let mut texts = BTreeMap::new();
    for (name, list) in raw {
        let Some(id) = languages.id(&name) else {
            eprintln!("texts for `{name}` ignored: the model does not know that language");
            continue;
        };
        texts.insert(id, list.into_iter().take(cfg.evaluate.texts_per_cell).collect::<Vec<_>>());
    }
    let name_of = |l: LanguageId| languages.name(l).unwrap_or("?").to_string();

    let report = similarity_report(&system, &*embedder, &references, &texts)?;
    report.write_csv(out.join("similarity.csv"))?;
    let summary = report.render_summary(&name_of);
    std::fs::write(out.join("similarity.txt"), &summary)?;
    print!("{summary}");

    if !cfg.evaluate.single_speaker_languages.is_empty() {
        let singles = cfg
            .evaluate
            .single_speaker_languages
            .iter()
            .map(|n| languages.resolve(n))
            .collect::<polytts::Result<Vec<_>>>()?;
        let accent = accent_delta(&system, &*embedder, &references, &texts, &singles)?;
        let mut csv = String::from("language,delta_sim\n");
        for (l, d) in &accent.delta {
            let _ = writeln!(csv, "{},{d:.9}", name_of(*l));
            println!("ΔSim with {} embedding: {d:.4}", name_of(*l));
        }
        std::fs::write(out.join("accent.csv"), csv)?;
    }

    let mut points = Vec::new();
    for r in &references {
        for a in &r.audio {
            points.push((r.speaker.clone(), embed(&*embedder, a)?.vector));
        }
    }
    if points.len() >= 3 {
        let proj = project2d(&points, cfg.evaluate.projection)?;
        proj.write_csv(out.join("projection.csv"))?;
        proj.write_png(out.join("projection.png"))?;
    } else {
        println!("projection skipped: needs at least 3 reference utterances");
    }

    // Intelligibility on one reference speaker across all texts.
    let wav_dir = out.join("wav");
    std::fs::create_dir_all(&wav_dir)?;
    let speaker = embed(&*embedder, &references[0].audio[0])?.vector;
    let mut items = Vec::new();
    for (&lang, list) in &texts {
        for (i, text) in list.iter().enumerate() {
            let seq = system.frontend.text_to_units(text, lang)?;
            let audio = system.synthesize(text, lang, &speaker)?.audio;
            let path = wav_dir.join(format!("{}_{}_{i}.wav", references[0].speaker, name_of(lang)));
            write_wav(&path, &audio)?;
            items.push(IntelligibilityItem {
                wav: path,
                reference: seq
                    .units()
                    .iter()
                    .filter(|u| u.kind == UnitKind::Phoneme)
                    .map(|u| u.symbol.clone())
                    .collect(),
            });
        }
    }
    let adapter = cfg.evaluate.asr.as_ref().map(|a| a as &dyn AsrAdapter);
    match intelligibility(&items, RateUnit::Phone, adapter)? {
        IntelligibilityOutcome::Scored(table) => {
            std::fs::write(out.join("intelligibility.csv"), table.to_csv())?;
            println!("PER {:.2}%", table.overall);
        }
        IntelligibilityOutcome::Skipped { notice } => {
            std::fs::write(out.join("intelligibility.txt"), format!("{notice}\n"))?;
            println!("{notice}");
        }
    }
    Ok(())
}
