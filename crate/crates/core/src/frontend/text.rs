//! Text to articulatory unit sequences.
//!
//! Tokenization rules:
//! - words are runs of letters, digits, apostrophes and intra-word hyphens;
//! - commas, em/en dashes and hyphen-minus standing alone between spaces are
//!   pauses (consecutive pause triggers collapse into one unit);
//! - `.`, `?`, `!` are sentence marks (runs of the same mark collapse);
//! - other punctuation is dropped;
//! - a word boundary is emitted before each word that follows another word,
//!   unless a sentence mark intervened. It comes after any pause, so
//!   `one, two` becomes `w ʌ n ~ # t u`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::inventory::{
    FeatureInventory, FeatureVector, PAUSE_SYMBOL, SENTENCE_MARKS, WORD_BOUNDARY_SYMBOL,
};
use crate::frontend::G2p;
use crate::{LanguageId, LanguageRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Phoneme,
    WordBoundary,
    Pause,
    SentenceMark,
}

impl UnitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Phoneme => "phoneme",
            UnitKind::WordBoundary => "word_boundary",
            UnitKind::Pause => "pause",
            UnitKind::SentenceMark => "sentence_mark",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "phoneme" => UnitKind::Phoneme,
            "word_boundary" => UnitKind::WordBoundary,
            "pause" => UnitKind::Pause,
            "sentence_mark" => UnitKind::SentenceMark,
            _ => return None,
        })
    }

    /// Units that occupy spectrogram frames.
    pub fn has_frames(self) -> bool {
        self != UnitKind::WordBoundary
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextUnit {
    pub kind: UnitKind,
    pub symbol: String,
    pub features: FeatureVector,
}

impl TextUnit {
    pub fn phoneme(inventory: &FeatureInventory, symbol: &str) -> Result<Self> {
        Ok(Self {
            kind: UnitKind::Phoneme,
            symbol: symbol.to_string(),
            features: inventory.featurize(symbol)?,
        })
    }

    pub fn special(inventory: &FeatureInventory, kind: UnitKind, symbol: &str) -> Result<Self> {
        let ok = match kind {
            UnitKind::WordBoundary => symbol == WORD_BOUNDARY_SYMBOL,
            UnitKind::Pause => symbol == PAUSE_SYMBOL,
            UnitKind::SentenceMark => SENTENCE_MARKS.contains(&symbol),
            UnitKind::Phoneme => false,
        };
        if !ok {
            return Err(Error::contract(format!(
                "`{symbol}` is not a valid {} symbol",
                kind.as_str()
            )));
        }
        let features = inventory.reserved(symbol).expect("reserved symbol");
        Ok(Self {
            kind,
            symbol: symbol.to_string(),
            features,
        })
    }
}

/// Ordered units plus the positions of word boundaries and a language id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneSequence {
    units: Vec<TextUnit>,
    boundary_indexes: BTreeSet<usize>,
    language: LanguageId,
}

impl PhoneSequence {
    /// Builds a sequence, checking every structural invariant.
    pub fn new(units: Vec<TextUnit>, language: LanguageId) -> Result<Self> {
        let boundary_indexes = units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.kind == UnitKind::WordBoundary)
            .map(|(i, _)| i)
            .collect();
        let seq = Self {
            units,
            boundary_indexes,
            language,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub(crate) fn from_parts(
        units: Vec<TextUnit>,
        boundary_indexes: BTreeSet<usize>,
        language: LanguageId,
    ) -> Self {
        Self {
            units,
            boundary_indexes,
            language,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let units = &self.units;
        if units.is_empty() {
            return Err(Error::contract("phone sequence is empty"));
        }
        let width = units[0].features.len();
        for (i, u) in units.iter().enumerate() {
            if u.features.len() != width {
                return Err(Error::contract(format!(
                    "unit {i} has feature width {}, expected {width}",
                    u.features.len()
                )));
            }
            if u.kind == UnitKind::SentenceMark && !SENTENCE_MARKS.contains(&u.symbol.as_str()) {
                return Err(Error::contract(format!(
                    "unit {i}: `{}` is not a sentence mark",
                    u.symbol
                )));
            }
        }
        let actual: BTreeSet<usize> = units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.kind == UnitKind::WordBoundary)
            .map(|(i, _)| i)
            .collect();
        if actual != self.boundary_indexes {
            return Err(Error::contract(
                "boundary indexes disagree with unit kinds",
            ));
        }
        if units[0].kind == UnitKind::WordBoundary
            || units[units.len() - 1].kind == UnitKind::WordBoundary
        {
            return Err(Error::contract("sequence starts or ends with a word boundary"));
        }
        if units
            .windows(2)
            .any(|w| w[0].kind == UnitKind::WordBoundary && w[1].kind == UnitKind::WordBoundary)
        {
            return Err(Error::contract("adjacent word boundaries"));
        }
        Ok(())
    }

    pub fn units(&self) -> &[TextUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn boundary_indexes(&self) -> &BTreeSet<usize> {
        &self.boundary_indexes
    }

    pub fn language(&self) -> LanguageId {
        self.language
    }

    /// Same units under another language id (accent transfer).
    pub fn with_language(&self, language: LanguageId) -> Self {
        Self {
            language,
            ..self.clone()
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.units[0].features.len()
    }

    /// Row-major L×F feature matrix.
    pub fn feature_matrix(&self) -> Vec<f32> {
        self.units.iter().flat_map(|u| u.features.to_f32()).collect()
    }

    pub fn count(&self, kind: UnitKind) -> usize {
        self.units.iter().filter(|u| u.kind == kind).count()
    }

    /// Indices of units that occupy frames (everything but word boundaries).
    pub fn frame_unit_indexes(&self) -> Vec<usize> {
        (0..self.units.len())
            .filter(|i| !self.boundary_indexes.contains(i))
            .collect()
    }

    pub fn symbols(&self) -> Vec<&str> {
        self.units.iter().map(|u| u.symbol.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Pause,
    Mark(char),
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '’'
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if chunk.chars().all(|c| c == '-') {
            tokens.push(Token::Pause);
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if is_word_char(c) {
                word.push(c);
                continue;
            }
            // hyphen inside a word, with word characters on both sides
            if c == '-'
                && !word.is_empty()
                && chars.get(i + 1).is_some_and(|&n| is_word_char(n))
            {
                word.push(c);
                continue;
            }
            if !word.is_empty() {
                tokens.push(Token::Word(std::mem::take(&mut word)));
            }
            match c {
                ',' | '—' | '–' | '，' | '、' => tokens.push(Token::Pause),
                '.' | '?' | '!' => tokens.push(Token::Mark(c)),
                _ => {}
            }
        }
        if !word.is_empty() {
            tokens.push(Token::Word(word));
        }
    }
    tokens
}

/// Converts text in a registered language into a [`PhoneSequence`].
pub fn text_to_units(
    text: &str,
    language: LanguageId,
    languages: &LanguageRegistry,
    g2p: &dyn G2p,
    inventory: &FeatureInventory,
) -> Result<PhoneSequence> {
    languages.check(language)?;
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if normalized.is_empty() {
        return Err(Error::contract("text is empty after whitespace normalization"));
    }
    let tokens = tokenize(&normalized);
    if !tokens.iter().any(|t| matches!(t, Token::Word(_))) {
        return Err(Error::contract(format!("text `{normalized}` contains no words")));
    }

    let mut units: Vec<TextUnit> = Vec::new();
    let mut seen_word = false;
    let mut mark_since_word = false;
    for token in tokens {
        match token {
            Token::Word(w) => {
                if seen_word && !mark_since_word {
                    units.push(TextUnit::special(
                        inventory,
                        UnitKind::WordBoundary,
                        WORD_BOUNDARY_SYMBOL,
                    )?);
                }
                let phones = g2p.phonemize(&w, language)?;
                if phones.is_empty() {
                    return Err(Error::G2p {
                        token: w,
                        reason: "no phonemes".into(),
                    });
                }
                for p in &phones {
                    let unit = TextUnit::phoneme(inventory, p).map_err(|e| Error::G2p {
                        token: w.clone(),
                        reason: e.to_string(),
                    })?;
                    units.push(unit);
                }
                seen_word = true;
                mark_since_word = false;
            }
            Token::Pause => {
                if units.last().is_some_and(|u| u.kind == UnitKind::Pause) {
                    continue;
                }
                units.push(TextUnit::special(inventory, UnitKind::Pause, PAUSE_SYMBOL)?);
            }
            Token::Mark(c) => {
                let sym = c.to_string();
                if units
                    .last()
                    .is_some_and(|u| u.kind == UnitKind::SentenceMark && u.symbol == sym)
                {
                    continue;
                }
                units.push(TextUnit::special(inventory, UnitKind::SentenceMark, &sym)?);
                mark_since_word = true;
            }
        }
    }
    PhoneSequence::new(units, language)
}
