//! JSON-lines corpus manifests.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::LanguageId;

/// Per-corpus cap used for the multilingual pretraining data.
pub const DEFAULT_CORPUS_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub audio_path: PathBuf,
    pub transcript: String,
    pub language_id: LanguageId,
    pub speaker_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusManifest {
    pub records: Vec<UtteranceRecord>,
    /// Directory relative audio paths are resolved against.
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn new(records: Vec<UtteranceRecord>, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            records,
            base_dir: base_dir.into(),
        }
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        Self::from_reader(text.as_bytes(), base_dir)
    }

    fn from_reader(reader: impl BufRead, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: UtteranceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            if rec.transcript.trim().is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "empty transcript".into(),
                });
            }
            records.push(rec);
        }
        Ok(Self::new(records, base_dir))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file), base)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn resolve(&self, record: &UtteranceRecord) -> PathBuf {
        if record.audio_path.is_absolute() {
            record.audio_path.clone()
        } else {
            self.base_dir.join(&record.audio_path)
        }
    }

    pub fn by_language(&self) -> BTreeMap<LanguageId, Vec<&UtteranceRecord>> {
        let mut groups: BTreeMap<LanguageId, Vec<&UtteranceRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(r.language_id).or_default().push(r);
        }
        groups
    }

    pub fn languages(&self) -> Vec<LanguageId> {
        self.by_language().into_keys().collect()
    }

    /// Keeps at most `cap` randomly chosen records per language corpus.
    /// Surviving records keep their original order.
    pub fn capped(&self, cap: usize, seed: u64) -> Self {
        let mut keep = vec![false; self.records.len()];
        let mut groups: BTreeMap<LanguageId, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.language_id).or_default().push(i);
        }
        for (lang, mut idx) in groups {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(lang.0) << 32));
            idx.shuffle(&mut rng);
            for &i in idx.iter().take(cap) {
                keep[i] = true;
            }
        }
        let records = self
            .records
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(r, _)| r.clone())
            .collect();
        Self::new(records, self.base_dir.clone())
    }

    /// Random whole utterances, added until the next would exceed the budget.
    /// `duration` returns the length of a record in seconds.
    pub fn select_by_duration(
        &self,
        budget_secs: f64,
        seed: u64,
        mut duration: impl FnMut(&UtteranceRecord) -> Result<f64>,
    ) -> Result<(Self, f64)> {
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut chosen = Vec::new();
        let mut total = 0.0;
        for i in order {
            let d = duration(&self.records[i])?;
            if total + d > budget_secs {
                break;
            }
            total += d;
            chosen.push(i);
        }
        chosen.sort_unstable();
        let records = chosen.into_iter().map(|i| self.records[i].clone()).collect();
        Ok((Self::new(records, self.base_dir.clone()), total))
    }
}
