//! Phonological feature inventory.
//!
//! Each phoneme symbol maps to a ternary vector over a fixed set of
//! articulatory features. Non-phoneme units (word boundary, pause, sentence
//! marks) get reserved one-hot rows in columns appended after the
//! phonological ones, so they can never collide with a phoneme.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::edit::levenshtein;
use crate::error::{Error, Result};

const BUILTIN_TSV: &str = include_str!("../../data/features.tsv");

/// Reserved columns appended after the phonological features.
pub const RESERVED_COLUMNS: [&str; 5] = [
    "word_boundary",
    "pause",
    "sentence_stop",
    "sentence_question",
    "sentence_exclaim",
];

pub const WORD_BOUNDARY_SYMBOL: &str = "#";
pub const PAUSE_SYMBOL: &str = "~";
pub const SENTENCE_MARKS: [&str; 3] = [".", "?", "!"];

/// A fixed-length vector of feature activations in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector(Vec<i8>);

impl FeatureVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::contract(format!(
                "feature activation {v} outside {{-1, 0, +1}}"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| f32::from(v)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FeatureInventory {
    feature_names: Vec<String>,
    rows: BTreeMap<String, FeatureVector>,
    hash: String,
}

impl FeatureInventory {
    /// The inventory shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_tsv(BUILTIN_TSV).expect("builtin feature table is well-formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_tsv(&text)
    }

    /// Parse a tab-separated table: a header row `symbol<TAB>feat1<TAB>...`,
    /// then one row per symbol with values written `+`, `-` or `0`.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with("//"));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty feature table".into(),
        })?;
        let mut cols = header.split('\t');
        cols.next();
        let feature_names: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
        if feature_names.is_empty() {
            return Err(Error::Parse {
                line: 1,
                msg: "header has no feature columns".into(),
            });
        }
        for name in &feature_names {
            if RESERVED_COLUMNS.contains(&name.as_str()) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("feature name `{name}` is reserved"),
                });
            }
        }
        let width = feature_names.len() + RESERVED_COLUMNS.len();

        let mut rows = BTreeMap::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let mut fields = line.split('\t');
            let symbol = fields.next().unwrap_or_default().trim().to_string();
            if symbol.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "missing symbol".into(),
                });
            }
            if is_reserved_symbol(&symbol) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("symbol `{symbol}` is reserved for non-phoneme units"),
                });
            }
            let mut values = Vec::with_capacity(width);
            for field in fields {
                let v = match field.trim() {
                    "+" | "1" | "+1" => 1,
                    "-" | "-1" => -1,
                    "0" => 0,
                    other => {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("bad feature value `{other}` for `{symbol}`"),
                        })
                    }
                };
                values.push(v);
            }
            if values.len() != feature_names.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!(
                        "`{symbol}` has {} values, header declares {}",
                        values.len(),
                        feature_names.len()
                    ),
                });
            }
            values.resize(width, 0);
            if rows.insert(symbol.clone(), FeatureVector(values)).is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("duplicate symbol `{symbol}`"),
                });
            }
        }

        let hash = hex::encode(Sha256::digest(canonical_bytes(&feature_names, &rows)));
        Ok(Self {
            feature_names,
            rows,
            hash,
        })
    }

    /// Total vector width F: phonological features plus reserved columns.
    pub fn dim(&self) -> usize {
        self.feature_names.len() + RESERVED_COLUMNS.len()
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.feature_names
            .iter()
            .map(String::as_str)
            .chain(RESERVED_COLUMNS.iter().copied())
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.rows.contains_key(symbol)
    }

    /// Content hash of the table, independent of row order and formatting.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn featurize(&self, symbol: &str) -> Result<FeatureVector> {
        if let Some(v) = self.rows.get(symbol) {
            return Ok(v.clone());
        }
        Err(Error::UnknownSymbol {
            symbol: symbol.to_string(),
            nearest: self.nearest(symbol, 3),
        })
    }

    /// Reserved vector for a non-phoneme unit symbol.
    pub fn reserved(&self, symbol: &str) -> Option<FeatureVector> {
        let column = match symbol {
            WORD_BOUNDARY_SYMBOL => 0,
            PAUSE_SYMBOL => 1,
            "." => 2,
            "?" => 3,
            "!" => 4,
            _ => return None,
        };
        let mut values = vec![0i8; self.dim()];
        values[self.feature_names.len() + column] = 1;
        Some(FeatureVector(values))
    }

    fn nearest(&self, symbol: &str, k: usize) -> Vec<String> {
        let query: Vec<char> = symbol.chars().collect();
        let mut scored: Vec<(usize, &String)> = self
            .rows
            .keys()
            .map(|s| (levenshtein(&query, &s.chars().collect::<Vec<_>>()), s))
            .collect();
        scored.sort();
        scored.into_iter().take(k).map(|(_, s)| s.clone()).collect()
    }

    /// Split an IPA string into inventory symbols by greedy longest match.
    /// Whitespace and stress/syllable marks are skipped.
    pub fn segment(&self, ipa: &str) -> Result<Vec<String>> {
        let max_len = self.rows.keys().map(|s| s.chars().count()).max().unwrap_or(1);
        let chars: Vec<char> = ipa
            .chars()
            .filter(|c| !c.is_whitespace() && !matches!(c, 'ˈ' | 'ˌ' | '.' | '\u{361}' | '\u{35c}'))
            .collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let mut matched = None;
            for len in (1..=max_len.min(chars.len() - i)).rev() {
                let candidate: String = chars[i..i + len].iter().collect();
                if self.rows.contains_key(&candidate) {
                    matched = Some((candidate, len));
                    break;
                }
            }
            match matched {
                Some((sym, len)) => {
                    out.push(sym);
                    i += len;
                }
                None => {
                    let sym = chars[i].to_string();
                    return Err(Error::UnknownSymbol {
                        nearest: self.nearest(&sym, 3),
                        symbol: sym,
                    });
                }
            }
        }
        Ok(out)
    }
}

pub fn is_reserved_symbol(symbol: &str) -> bool {
    symbol == WORD_BOUNDARY_SYMBOL || symbol == PAUSE_SYMBOL || SENTENCE_MARKS.contains(&symbol)
}

fn canonical_bytes(names: &[String], rows: &BTreeMap<String, FeatureVector>) -> Vec<u8> {
    let mut buf = Vec::new();
    for n in names {
        buf.extend_from_slice(n.as_bytes());
        buf.push(0);
    }
    buf.push(0xff);
    for (sym, v) in rows {
        buf.extend_from_slice(sym.as_bytes());
        buf.push(0);
        buf.extend(v.0.iter().map(|&x| x as u8));
    }
    buf
}
