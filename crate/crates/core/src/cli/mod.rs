//! Command-line entry point.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};


#[derive(Debug, Parser)]
#[command(name = "polytts", version = polytts::VERSION_TAG, about = "Multilingual phonological-feature text to speech")]
pub struct Cli {
    /// Log filter, e.g. `info` or `polytts=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory; receives the resolved config and all artifacts.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the corpus manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multilingual corpus with lexicons and a starter config.
    MakeToyCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        languages: usize,
        #[arg(long, default_value_t = 4)]
        utterances: usize,
        #[arg(long, default_value_t = 2)]
        speakers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cap the corpus, run the frontend and fill the feature cache.
    Prepare {
        #[command(flatten)]
        common: Common,
        /// Per-language record cap.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Train the phoneme-to-frame aligner.
    TrainAligner {
        #[command(flatten)]
        common: Common,
        /// Optimizer steps; defaults to the configured count.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Multilingual LAML pretraining of the acoustic model.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Aligner checkpoint used to extract durations.
        #[arg(long)]
        aligner: PathBuf,
        /// Optimizer steps; defaults to the configured count.
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from a pretraining checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Add a low-resource language to a pretrained model.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// Pretrained acoustic checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Aligner checkpoint used to extract durations.
        #[arg(long)]
        aligner: PathBuf,
        /// Manifest of the new language's corpus.
        #[arg(long)]
        new_manifest: Option<PathBuf>,
        /// Name of the new language.
        #[arg(long)]
        language: Option<String>,
        /// Lexicon for the new language.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Audio budget for the new language, in minutes.
        #[arg(long)]
        minutes_budget: Option<f64>,
        /// Optimizer steps; defaults to the configured fine-tuning count.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Speak a text in a language with the voice of a reference recording.
    Synthesize {
        /// Run configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Acoustic model checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Text to speak.
        #[arg(long)]
        text: String,
        /// Language name or numeric id.
        #[arg(long)]
        language: String,
        /// WAV recording of the target voice.
        #[arg(long)]
        reference: PathBuf,
        /// Output WAV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Speaker-similarity, accent-transfer, projection and intelligibility reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Acoustic model checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reference list (JSON lines).
        #[arg(long)]
        references: Option<PathBuf>,
        /// Texts per language (JSON object).
        #[arg(long)]
        texts: Option<PathBuf>,
        /// Use the stochastic-neighbour projection instead of PCA.
        #[arg(long)]
        tsne: bool,
    },
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .try_init();
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let kind = e.downcast_ref::<polytts::Error>().map_or("runtime", polytts::Error::kind);
            let message = describe(&e);
            eprintln!("error: {message}");
            eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
            1
        }
    }
}

/// Joins the error chain, dropping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !parts.last().is_some_and(|p| p.ends_with(&text)) {
            parts.push(text);
        }
    }
    parts.join(": ")
}
