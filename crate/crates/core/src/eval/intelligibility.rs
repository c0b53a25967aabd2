use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::edit::levenshtein;
use crate::error::{Error, Result};

/// External recognizer: WAV path in, symbol sequence out.
pub trait AsrAdapter: Send + Sync {
    fn name(&self) -> &str;

    fn transcribe(&self, wav: &Path) -> Result<Vec<String>>;
}

/// Runs a program and splits its stdout on whitespace. `{wav}` in the
/// arguments is replaced by the audio path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAsr {
    pub name: String,
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl AsrAdapter for CommandAsr {
    fn name(&self) -> &str {
        &self.name
    }

    fn transcribe(&self, wav: &Path) -> Result<Vec<String>> {
        let wav = wav.to_str().ok_or_else(|| Error::config("audio paths must be UTF-8"))?;
        let out = Command::new(&self.program)
            .args(self.args.iter().map(|a| a.replace("{wav}", wav)))
            .output()?;
        if !out.status.success() {
            return Err(Error::config(format!(
                "asr adapter `{}` failed: {}",
                self.name,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).split_whitespace().map(str::to_string).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    Phone,
    Word,
}

impl RateUnit {
    pub fn label(self) -> &'static str {
        match self {
            RateUnit::Phone => "PER",
            RateUnit::Word => "WER",
        }
    }
}

/// Edit distance over reference length, in percent.
pub fn error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> f64 {
    if reference.is_empty() {
        return if hypothesis.is_empty() { 0.0 } else { 100.0 };
    }
    100.0 * levenshtein(reference, hypothesis) as f64 / reference.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntelligibilityItem {
    pub wav: PathBuf,
    pub reference: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntelligibilityRow {
    pub wav: PathBuf,
    pub reference_len: usize,
    pub edits: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntelligibilityTable {
    pub unit: RateUnit,
    pub rows: Vec<IntelligibilityRow>,
    /// Total edits over total reference length, in percent.
    pub overall: f64,
}

impl IntelligibilityTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("wav,reference_len,edits,{}\n", self.unit.label().to_lowercase());
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.4}", r.wav.display(), r.reference_len, r.edits, r.rate);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntelligibilityOutcome {
    Scored(IntelligibilityTable),
    Skipped { notice: String },
}

/// Scores each WAV against its reference with the adapter, or reports that
/// scoring was skipped when no adapter is configured.
pub fn intelligibility(
    items: &[IntelligibilityItem],
    unit: RateUnit,
    adapter: Option<&dyn AsrAdapter>,
) -> Result<IntelligibilityOutcome> {
    let Some(adapter) = adapter else {
        let notice = format!(
            "{} skipped: no ASR adapter configured for {} file(s)",
            unit.label(),
            items.len()
        );
        tracing::warn!("{notice}");
        return Ok(IntelligibilityOutcome::Skipped { notice });
    };
    let mut rows = Vec::with_capacity(items.len());
    let (mut edits, mut total) = (0usize, 0usize);
    for item in items {
        let hyp = adapter.transcribe(&item.wav)?;
        let e = levenshtein(&item.reference, &hyp);
        edits += e;
        total += item.reference.len();
        rows.push(IntelligibilityRow {
            wav: item.wav.clone(),
            reference_len: item.reference.len(),
            edits: e,
            rate: error_rate(&item.reference, &hyp),
        });
    }
    let overall = if total == 0 { 0.0 } else { 100.0 * edits as f64 / total as f64 };
    Ok(IntelligibilityOutcome::Scored(IntelligibilityTable { unit, rows, overall }))
}
