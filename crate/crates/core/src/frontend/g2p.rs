//! Grapheme-to-phoneme backends.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frontend::FeatureInventory;
use crate::LanguageId;

/// Converts one orthographic word into inventory phoneme symbols.
pub trait G2p: Send + Sync {
    fn phonemize(&self, word: &str, language: LanguageId) -> Result<Vec<String>>;
}

/// Pronunciation lexicon for one language: `word<TAB>ph ph ph` per line.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, phones) = line.split_once('\t').ok_or(Error::Parse {
                line: idx + 1,
                msg: "expected `word<TAB>phonemes`".into(),
            })?;
            let phones: Vec<String> = phones.split_whitespace().map(str::to_string).collect();
            if word.trim().is_empty() || phones.is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "empty word or pronunciation".into(),
                });
            }
            entries.insert(word.trim().to_lowercase(), phones);
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, word: &str, phones: Vec<String>) {
        self.entries.insert(word.to_lowercase(), phones);
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialized form, sorted by word.
    pub fn to_text(&self) -> String {
        let mut words: Vec<_> = self.entries.iter().collect();
        words.sort();
        words
            .into_iter()
            .map(|(w, p)| format!("{w}\t{}\n", p.join(" ")))
            .collect()
    }
}

/// Table-lookup g2p over per-language lexicons.
///
/// Hyphenated words missing from the lexicon are looked up part by part and
/// concatenated without a boundary.
#[derive(Debug, Clone, Default)]
pub struct LexiconG2p {
    lexicons: BTreeMap<LanguageId, Lexicon>,
}

impl LexiconG2p {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_lexicon(mut self, language: LanguageId, lexicon: Lexicon) -> Self {
        self.lexicons.insert(language, lexicon);
        self
    }

    pub fn insert(&mut self, language: LanguageId, lexicon: Lexicon) {
        self.lexicons.insert(language, lexicon);
    }

    pub fn lexicon(&self, language: LanguageId) -> Option<&Lexicon> {
        self.lexicons.get(&language)
    }
}

impl G2p for LexiconG2p {
    fn phonemize(&self, word: &str, language: LanguageId) -> Result<Vec<String>> {
        let lex = self.lexicons.get(&language).ok_or_else(|| Error::G2p {
            token: word.to_string(),
            reason: format!("no lexicon for language {language}"),
        })?;
        if let Some(p) = lex.get(word) {
            return Ok(p.to_vec());
        }
        if word.contains('-') {
            let mut out = Vec::new();
            for part in word.split('-').filter(|p| !p.is_empty()) {
                match lex.get(part) {
                    Some(p) => out.extend_from_slice(p),
                    None => {
                        return Err(Error::G2p {
                            token: word.to_string(),
                            reason: format!("part `{part}` not in lexicon"),
                        })
                    }
                }
            }
            if !out.is_empty() {
                return Ok(out);
            }
        }
        Err(Error::G2p {
            token: word.to_string(),
            reason: "not in lexicon".into(),
        })
    }
}

/// Adapter around an external phonemizer process.
///
/// `args` may contain `{word}` and `{lang}` placeholders; `{lang}` expands to
/// the code registered for the language. Standard output is read as an IPA
/// string and segmented against the feature inventory.
#[derive(Debug, Clone)]
pub struct CommandG2p {
    program: String,
    args: Vec<String>,
    language_codes: BTreeMap<LanguageId, String>,
    inventory: Arc<FeatureInventory>,
}

impl CommandG2p {
    pub fn new(
        program: impl Into<String>,
        args: Vec<String>,
        language_codes: BTreeMap<LanguageId, String>,
        inventory: Arc<FeatureInventory>,
    ) -> Self {
        Self {
            program: program.into(),
            args,
            language_codes,
            inventory,
        }
    }

    /// espeak-ng style invocation: `espeak-ng -q --ipa -v <lang> <word>`.
    pub fn espeak(
        language_codes: BTreeMap<LanguageId, String>,
        inventory: Arc<FeatureInventory>,
    ) -> Self {
        let args = ["-q", "--ipa", "-v", "{lang}", "{word}"]
            .map(String::from)
            .to_vec();
        Self::new("espeak-ng", args, language_codes, inventory)
    }
}

impl G2p for CommandG2p {
    fn phonemize(&self, word: &str, language: LanguageId) -> Result<Vec<String>> {
        let fail = |reason: String| Error::G2p {
            token: word.to_string(),
            reason,
        };
        let code = self
            .language_codes
            .get(&language)
            .ok_or_else(|| fail(format!("no phonemizer code for language {language}")))?;
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.replace("{word}", word).replace("{lang}", code))
            .collect();
        let out = Command::new(&self.program)
            .args(&args)
            .output()
            .map_err(|e| fail(format!("cannot run `{}`: {e}", self.program)))?;
        if !out.status.success() {
            return Err(fail(format!(
                "`{}` exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let ipa = String::from_utf8(out.stdout).map_err(|e| fail(e.to_string()))?;
        let phones = self
            .inventory
            .segment(ipa.trim())
            .map_err(|e| fail(e.to_string()))?;
        if phones.is_empty() {
            return Err(fail("phonemizer produced no output".into()));
        }
        Ok(phones)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> LexiconG2p {
        let l = Lexicon::parse("hello\th ɛ l o\nworld\tw ɜ l d\n").unwrap();
        LexiconG2p::new().with_lexicon(LanguageId(0), l)
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(
            lex().phonemize("Hello", LanguageId(0)).unwrap(),
            vec!["h", "ɛ", "l", "o"]
        );
    }

    #[test]
    fn missing_word_names_the_token() {
        match lex().phonemize("zebra", LanguageId(0)) {
            Err(Error::G2p { token, .. }) => assert_eq!(token, "zebra"),
            other => panic!("{other:?}"),
        }
        assert!(lex().phonemize("hello", LanguageId(7)).is_err());
    }

    #[test]
    fn hyphenated_words_fall_back_to_parts() {
        let p = lex().phonemize("hello-world", LanguageId(0)).unwrap();
        assert_eq!(p.len(), 8);
        assert!(lex().phonemize("hello-zebra", LanguageId(0)).is_err());
    }

    #[test]
    fn malformed_lexicon_reports_line() {
        let err = Lexicon::parse("ok\ta\nbroken line\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn command_backend_segments_stdout() {
        let inv = Arc::new(FeatureInventory::builtin());
        let codes = BTreeMap::from([(LanguageId(0), "en".to_string())]);
        let g = CommandG2p::new(
            "sh",
            vec!["-c".into(), "printf 'ˈhɛloʊ'".into()],
            codes.clone(),
            inv.clone(),
        );
        assert_eq!(
            g.phonemize("hello", LanguageId(0)).unwrap(),
            vec!["h", "ɛ", "l", "o", "ʊ"]
        );
        let missing = CommandG2p::new("/nonexistent/phonemizer", vec![], codes, inv);
        assert!(matches!(
            missing.phonemize("hello", LanguageId(0)),
            Err(Error::G2p { .. })
        ));
    }
}
