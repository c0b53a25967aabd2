use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::similarity::Reference;
use crate::eval::{embed_output, Synthesizer};
use crate::speaker::{cosine, embed, SpeakerEmbedder};
use crate::LanguageId;

#[derive(Debug, Clone, PartialEq)]
pub struct AccentReport {
    /// Substituted language → mean |Δ similarity|.
    pub delta: BTreeMap<LanguageId, f64>,
    /// Comparisons that failed and were left out.
    pub failures: usize,
}

/// For each target speaker, text language and substituted single-speaker
/// language, compares similarity to the target with the matching and the
/// substituted language embedding.
pub fn accent_delta(
    synth: &dyn Synthesizer,
    embedder: &dyn SpeakerEmbedder,
    targets: &[Reference],
    texts: &BTreeMap<LanguageId, Vec<String>>,
    single_speaker_languages: &[LanguageId],
) -> Result<AccentReport> {
    let languages = synth.languages();
    if languages.len() < 2 {
        return Err(Error::config("accent transfer needs at least two registered languages"));
    }
    if let Some(l) = single_speaker_languages.iter().find(|l| !languages.contains(l)) {
        return Err(Error::config(format!("language {l} is not registered in the model")));
    }
    let mut sums: BTreeMap<LanguageId, (f64, usize)> = BTreeMap::new();
    let mut failures = 0;
    for r in targets {
        let first = r
            .audio
            .first()
            .ok_or_else(|| Error::config(format!("reference {} has no audio", r.speaker)))?;
        let target = embed(embedder, first)?.vector;
        let sim = |text: &str, text_lang: LanguageId, emb_lang: LanguageId| -> Result<f64> {
            let audio = synth.synthesize_as(text, text_lang, emb_lang, &target)?;
            cosine(&embed_output(embedder, &audio)?, &target)
        };
        for &lang in &languages {
            for text in texts.get(&lang).into_iter().flatten() {
                let base = match sim(text, lang, lang) {
                    Ok(s) => s,
                    Err(e) => {
                        tracing::warn!(speaker = %r.speaker, language = %lang, error = %e, "baseline synthesis failed");
                        failures += single_speaker_languages.len();
                        continue;
                    }
                };
                for &sub in single_speaker_languages {
                    let swapped = if sub == lang { Ok(base) } else { sim(text, lang, sub) };
                    match swapped {
                        Ok(s) => {
                            let e = sums.entry(sub).or_insert((0.0, 0));
                            e.0 += (base - s).abs();
                            e.1 += 1;
                        }
                        Err(e) => {
                            tracing::warn!(speaker = %r.speaker, substituted = %sub, error = %e, "substituted synthesis failed");
                            failures += 1;
                        }
                    }
                }
            }
        }
    }
    let delta = sums
        .into_iter()
        .map(|(l, (s, n))| (l, if n == 0 { f64::NAN } else { s / n as f64 }))
        .collect();
    Ok(AccentReport { delta, failures })
}
