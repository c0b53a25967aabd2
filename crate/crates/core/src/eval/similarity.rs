use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Waveform;
use crate::error::{Error, Result};
use crate::eval::{embed_output, mean_std, Synthesizer};
use crate::speaker::{cosine, embed, SpeakerEmbedder};
use crate::LanguageId;

/// A reference speaker: one or more utterances and the language they speak.
#[derive(Debug, Clone)]
pub struct Reference {
    pub speaker: String,
    pub language: LanguageId,
    /// The first utterance conditions synthesis; further ones feed the
    /// human-human upper bound.
    pub audio: Vec<Waveform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub speaker: String,
    pub language: LanguageId,
    pub text_id: usize,
    /// `None` when synthesis or embedding failed.
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerSummary {
    pub speaker: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub languages: Vec<LanguageId>,
    pub speakers: Vec<String>,
    /// speakers × languages; each cell averages its texts.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub summaries: Vec<SpeakerSummary>,
    /// Mean similarity between pairs of utterances of the same reference speaker.
    pub upper_bound: Option<f64>,
    pub records: Vec<CellRecord>,
}

impl SimilarityReport {
    /// Rebuilds matrix and per-speaker summaries from the raw records.
    pub fn aggregate(
        speakers: &[String],
        languages: &[LanguageId],
        records: &[CellRecord],
    ) -> (Vec<Vec<Option<f64>>>, Vec<SpeakerSummary>) {
        let mut cells: BTreeMap<(&str, LanguageId), Vec<f64>> = BTreeMap::new();
        for r in records {
            if let Some(s) = r.similarity {
                cells.entry((r.speaker.as_str(), r.language)).or_default().push(s);
            }
        }
        let matrix: Vec<Vec<Option<f64>>> = speakers
            .iter()
            .map(|s| {
                languages
                    .iter()
                    .map(|&l| cells.get(&(s.as_str(), l)).map(|v| mean_std(v).0))
                    .collect()
            })
            .collect();
        let summaries = speakers
            .iter()
            .zip(&matrix)
            .map(|(s, row)| {
                let present: Vec<f64> = row.iter().flatten().copied().collect();
                let (mean, std) = mean_std(&present);
                SpeakerSummary {
                    speaker: s.clone(),
                    mean,
                    std,
                }
            })
            .collect();
        (matrix, summaries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("speaker,language,text_id,similarity\n");
        for r in &self.records {
            let sim = r.similarity.map(|s| format!("{s:.9}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.speaker, r.language, r.text_id, sim);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    /// Plain-text table with per-speaker ∅ and σ.
    pub fn render_summary(&self, language_names: &dyn Fn(LanguageId) -> String) -> String {
        let mut out = String::from("speaker");
        for &l in &self.languages {
            let _ = write!(out, "\t{}", language_names(l));
        }
        out.push_str("\tmean\tstd\n");
        for ((s, row), sum) in self.speakers.iter().zip(&self.matrix).zip(&self.summaries) {
            out.push_str(s);
            for c in row {
                match c {
                    Some(v) => {
                        let _ = write!(out, "\t{v:.3}");
                    }
                    None => out.push_str("\t-"),
                }
            }
            let _ = writeln!(out, "\t{:.3}\t{:.3}", sum.mean, sum.std);
        }
        match self.upper_bound {
            Some(u) => {
                let _ = writeln!(out, "upper bound (same-speaker pairs): {u:.3}");
            }
            None => out.push_str("upper bound: not available (needs two utterances per speaker)\n"),
        }
        out
    }
}

/// Synthesizes every text of every language for each reference and compares
/// speaker embeddings with the reference embedding.
pub fn similarity_report(
    synth: &dyn Synthesizer,
    embedder: &dyn SpeakerEmbedder,
    references: &[Reference],
    texts: &BTreeMap<LanguageId, Vec<String>>,
) -> Result<SimilarityReport> {
    if references.is_empty() {
        return Err(Error::config("similarity report needs at least one reference"));
    }
    let (languages, missing): (Vec<_>, Vec<_>) = synth
        .languages()
        .into_iter()
        .partition(|l| texts.get(l).is_some_and(|t| !t.is_empty()));
    if languages.is_empty() {
        return Err(Error::config("no evaluation text for any synthesizable language"));
    }
    for l in missing {
        tracing::warn!("language {l} has no evaluation text and is left out of the report");
    }
    let mut records = Vec::new();
    let mut pair_sims = Vec::new();
    for r in references {
        let first = r
            .audio
            .first()
            .ok_or_else(|| Error::config(format!("reference {} has no audio", r.speaker)))?;
        let target = embed(embedder, first)?.vector;
        for (i, a) in r.audio.iter().enumerate() {
            for b in &r.audio[i + 1..] {
                pair_sims.push(cosine(&embed(embedder, a)?.vector, &embed(embedder, b)?.vector)?);
            }
        }
        for &lang in &languages {
            for (text_id, text) in texts[&lang].iter().enumerate() {
                let similarity = synth
                    .synthesize(text, lang, &target)
                    .and_then(|audio| embed_output(embedder, &audio))
                    .and_then(|v| cosine(&v, &target));
                let similarity = match similarity {
                    Ok(s) => Some(s),
                    Err(e) => {
                        tracing::warn!(speaker = %r.speaker, language = %lang, text_id, error = %e, "cell failed");
                        None
                    }
                };
                records.push(CellRecord {
                    speaker: r.speaker.clone(),
                    language: lang,
                    text_id,
                    similarity,
                });
            }
        }
    }
    let speakers: Vec<String> = references.iter().map(|r| r.speaker.clone()).collect();
    let (matrix, summaries) = SimilarityReport::aggregate(&speakers, &languages, &records);
    let upper_bound = (!pair_sims.is_empty()).then(|| mean_std(&pair_sims).0);
    Ok(SimilarityReport {
        languages,
        speakers,
        matrix,
        summaries,
        upper_bound,
        records,
    })
}
