//! Canonical text record for [`PhoneSequence`].
//!
//! ```text
//! phoneseq	1
//! language	0
//! boundaries	3
//! units	5
//! phoneme	h	-1 1 ...
//! ...
//! ```
//!
//! One line per unit: kind, symbol, space-separated feature activations.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frontend::inventory::FeatureVector;
use crate::frontend::text::{PhoneSequence, TextUnit, UnitKind};
use crate::LanguageId;

const HEADER: &str = "phoneseq";
const VERSION: u32 = 1;

pub fn serialize_sequence(seq: &PhoneSequence) -> Result<String> {
    seq.validate()?;
    let mut out = String::new();
    let bounds: Vec<String> = seq.boundary_indexes().iter().map(usize::to_string).collect();
    writeln!(out, "{HEADER}\t{VERSION}").unwrap();
    writeln!(out, "language\t{}", seq.language()).unwrap();
    writeln!(out, "boundaries\t{}", bounds.join(" ")).unwrap();
    writeln!(out, "units\t{}", seq.len()).unwrap();
    for u in seq.units() {
        if u.symbol.is_empty() || u.symbol.chars().any(char::is_whitespace) {
            return Err(Error::contract(format!(
                "symbol `{}` cannot be serialized",
                u.symbol
            )));
        }
        let feats: Vec<String> = u.features.values().iter().map(i8::to_string).collect();
        writeln!(out, "{}\t{}\t{}", u.kind.as_str(), u.symbol, feats.join(" ")).unwrap();
    }
    Ok(out)
}

fn field<'a>(line: Option<(usize, &'a str)>, key: &str) -> Result<(usize, &'a str)> {
    let (no, text) = line.ok_or(Error::Parse {
        line: 0,
        msg: format!("missing `{key}` line"),
    })?;
    let (k, v) = text.split_once('\t').ok_or(Error::Parse {
        line: no,
        msg: format!("expected `{key}<TAB>value`"),
    })?;
    if k != key {
        return Err(Error::Parse {
            line: no,
            msg: format!("expected `{key}`, found `{k}`"),
        });
    }
    Ok((no, v))
}

pub fn parse_sequence(record: &str) -> Result<PhoneSequence> {
    let mut lines = record
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (no, version) = field(lines.next(), HEADER)?;
    if version.trim() != VERSION.to_string() {
        return Err(Error::Parse {
            line: no,
            msg: format!("unsupported record version `{version}`"),
        });
    }
    let (no, lang) = field(lines.next(), "language")?;
    let language = lang.trim().parse::<u32>().map(LanguageId).map_err(|e| Error::Parse {
        line: no,
        msg: format!("bad language id: {e}"),
    })?;
    let (no, bounds) = field(lines.next(), "boundaries")?;
    let boundary_indexes = bounds
        .split_whitespace()
        .map(|b| b.parse::<usize>())
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(|e| Error::Parse {
            line: no,
            msg: format!("bad boundary index: {e}"),
        })?;
    let (no, count) = field(lines.next(), "units")?;
    let count: usize = count.trim().parse().map_err(|e| Error::Parse {
        line: no,
        msg: format!("bad unit count: {e}"),
    })?;

    let mut units = Vec::with_capacity(count);
    let mut last_line = no;
    for (no, line) in lines.by_ref().take(count) {
        last_line = no;
        let mut parts = line.splitn(3, '\t');
        let kind = parts.next().and_then(UnitKind::parse).ok_or(Error::Parse {
            line: no,
            msg: "bad unit kind".into(),
        })?;
        let symbol = parts.next().filter(|s| !s.is_empty()).ok_or(Error::Parse {
            line: no,
            msg: "missing symbol".into(),
        })?;
        let feats = parts
            .next()
            .unwrap_or_default()
            .split_whitespace()
            .map(|v| v.parse::<i8>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: no,
                msg: format!("bad feature value: {e}"),
            })?;
        let features = FeatureVector::new(feats).map_err(|e| Error::Parse {
            line: no,
            msg: e.to_string(),
        })?;
        units.push(TextUnit {
            kind,
            symbol: symbol.to_string(),
            features,
        });
    }
    if units.len() != count {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("expected {count} units, found {}", units.len()),
        });
    }
    if let Some((no, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Parse {
            line: no,
            msg: "trailing content after units".into(),
        });
    }

    let seq = PhoneSequence::from_parts(units, boundary_indexes, language);
    seq.validate().map_err(|e| Error::Parse {
        line: 3,
        msg: e.to_string(),
    })?;
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::FeatureInventory;
    use proptest::prelude::*;

    fn arb_sequence() -> impl Strategy<Value = PhoneSequence> {
        let inv = FeatureInventory::builtin();
        let symbols: Vec<String> = inv.symbols().map(str::to_string).collect();
        (
            prop::collection::vec(
                (prop::sample::select(symbols), 0u8..10),
                1..40,
            ),
            0u32..12,
        )
            .prop_map(move |(items, lang)| {
                let mut units: Vec<TextUnit> = Vec::new();
                for (sym, roll) in items {
                    let prev_is_wb = units.last().is_some_and(|u| u.kind == UnitKind::WordBoundary);
                    let unit = match roll {
                        0 if !units.is_empty() && !prev_is_wb => {
                            TextUnit::special(&inv, UnitKind::WordBoundary, "#").unwrap()
                        }
                        1 => TextUnit::special(&inv, UnitKind::Pause, "~").unwrap(),
                        2 => TextUnit::special(&inv, UnitKind::SentenceMark, "?").unwrap(),
                        _ => TextUnit::phoneme(&inv, &sym).unwrap(),
                    };
                    units.push(unit);
                }
                if units.last().unwrap().kind == UnitKind::WordBoundary {
                    units.push(TextUnit::special(&inv, UnitKind::SentenceMark, ".").unwrap());
                }
                PhoneSequence::new(units, LanguageId(lang)).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn parse_inverts_serialize(seq in arb_sequence()) {
            let text = serialize_sequence(&seq).unwrap();
            prop_assert_eq!(parse_sequence(&text).unwrap(), seq);
        }
    }

    #[test]
    fn empty_sequence_cannot_be_serialized() {
        let seq = PhoneSequence::from_parts(vec![], BTreeSet::new(), LanguageId(0));
        assert!(serialize_sequence(&seq).is_err());
    }

    #[test]
    fn inconsistent_boundaries_are_rejected() {
        let inv = FeatureInventory::builtin();
        let seq = PhoneSequence::new(
            vec![
                TextUnit::phoneme(&inv, "p").unwrap(),
                TextUnit::special(&inv, UnitKind::WordBoundary, "#").unwrap(),
                TextUnit::phoneme(&inv, "a").unwrap(),
            ],
            LanguageId(0),
        )
        .unwrap();
        let text = serialize_sequence(&seq).unwrap();
        let broken = text.replace("boundaries\t1", "boundaries\t2");
        assert!(matches!(parse_sequence(&broken), Err(Error::Parse { .. })));
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_sequence(&truncated), Err(Error::Parse { .. })));
        let bad_value = text.replacen("\t-1 ", "\t7 ", 1);
        assert!(matches!(parse_sequence(&bad_value), Err(Error::Parse { line: 5, .. })));
    }
}
