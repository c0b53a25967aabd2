use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use polytts::acoustic::{LoadedModel, ModelConfig};
use polytts::config::{G2pConfig, RunConfig};
use polytts::data::{read_wav, FeatureConfig};
use polytts::speaker::EmbedderConfig;
use polytts::toy::{make_toy_corpus, ToyConfig, ToyCorpus};
use polytts_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: ToyCorpus,
    config: CString,
    checkpoint: CString,
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn cpath(p: &Path) -> CString {
    cstr(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = polytts_last_error_message();
    assert!(!p.is_null(), "a failed call leaves a message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Toy corpus, run config and an untrained checkpoint on disk.
fn fixture() -> Fixture {
    let corpus = make_toy_corpus(&ToyConfig {
        languages: 2,
        utterances_per_language: 2,
        ..ToyConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    corpus.write_to(&root, None).unwrap();
    let names = corpus.languages.names().to_vec();

    let mut cfg = RunConfig::default();
    cfg.corpus.languages = names.clone();
    cfg.corpus.g2p = G2pConfig::Lexicon {
        lexicons: names.iter().map(|n| (n.clone(), PathBuf::from(format!("{n}.lexicon.tsv")))).collect(),
    };
    cfg.embedder = EmbedderConfig::Toy;
    cfg.vocoder.iterations = 4;
    cfg.vocoder.nnls_iterations = 20;
    std::fs::write(root.join("config.toml"), cfg.to_toml().unwrap()).unwrap();

    let meta = corpus.model_meta(ModelConfig::toy(), &FeatureConfig::default());
    LoadedModel::new(meta).unwrap().save(root.join("model.ckpt")).unwrap();
    Fixture {
        config: cpath(&root.join("config.toml")),
        checkpoint: cpath(&root.join("model.ckpt")),
        root,
        corpus,
        _dir: dir,
    }
}

fn load(f: &Fixture) -> *mut PolyttsSystem {
    let mut sys = ptr::null_mut();
    let status = unsafe { polytts_system_load(f.config.as_ptr(), f.checkpoint.as_ptr(), &mut sys) };
    assert_eq!(status, PolyttsStatus::Ok, "{}", last_error());
    assert!(!sys.is_null());
    sys
}

#[test]
fn system_round_trip_through_handles() {
    let f = fixture();
    let sys = load(&f);
    unsafe {
        let mut count = 0usize;
        assert_eq!(polytts_system_language_count(sys, &mut count), PolyttsStatus::Ok);
        assert_eq!(count, 2);

        let utt = &f.corpus.utterances[0];
        let lang = cstr(f.corpus.languages.name(utt.language).unwrap());
        let mut id = u32::MAX;
        assert_eq!(polytts_system_language_id(sys, lang.as_ptr(), &mut id), PolyttsStatus::Ok);
        assert_eq!(id, utt.language.0);

        let text = cstr(&utt.text);
        let mut units = ptr::null_mut();
        assert_eq!(
            polytts_system_text_to_units(sys, text.as_ptr(), lang.as_ptr(), &mut units),
            PolyttsStatus::Ok,
            "{}",
            last_error()
        );
        let expected = utt.sequence.symbols();
        assert_eq!(polytts_units_len(units), expected.len());
        for (i, sym) in expected.iter().enumerate() {
            assert_eq!(CStr::from_ptr(polytts_units_symbol(units, i)).to_str().unwrap(), *sym);
            let mut kind = PolyttsUnitKind::Pause;
            assert_eq!(polytts_units_kind(units, i, &mut kind), PolyttsStatus::Ok);
            assert_eq!(
                kind == PolyttsUnitKind::WordBoundary,
                utt.sequence.boundary_indexes().contains(&i)
            );
        }
        assert!(polytts_units_symbol(units, expected.len()).is_null());
        polytts_units_free(units);

        let wav = cpath(&f.root.join("wav/utt00000.wav"));
        let mut emb = ptr::null_mut();
        assert_eq!(polytts_system_embed_wav(sys, wav.as_ptr(), &mut emb), PolyttsStatus::Ok, "{}", last_error());
        let mut dim = 0usize;
        assert_eq!(polytts_system_speaker_dim(sys, &mut dim), PolyttsStatus::Ok);
        assert_eq!(polytts_floats_len(emb), dim);
        let speaker = std::slice::from_raw_parts(polytts_floats_data(emb), dim).to_vec();

        let synth = |speaker: &[f32]| {
            let mut audio = ptr::null_mut();
            let status = polytts_system_synthesize(
                sys,
                text.as_ptr(),
                lang.as_ptr(),
                speaker.as_ptr(),
                speaker.len(),
                &mut audio,
            );
            assert_eq!(status, PolyttsStatus::Ok, "{}", last_error());
            audio
        };
        let a = synth(&speaker);
        let b = synth(&speaker);
        assert_eq!(polytts_audio_sample_rate(a), polytts_sample_rate());
        let n = polytts_audio_len(a);
        assert!(n > 0);
        let sa = std::slice::from_raw_parts(polytts_audio_samples(a), n);
        let sb = std::slice::from_raw_parts(polytts_audio_samples(b), polytts_audio_len(b));
        assert_eq!(sa, sb);

        let out = cpath(&f.root.join("out/synth.wav"));
        assert_eq!(polytts_audio_write_wav(a, out.as_ptr()), PolyttsStatus::Ok, "{}", last_error());
        let written = read_wav(f.root.join("out/synth.wav")).unwrap();
        assert_eq!(written.samples.len(), n);

        let mut cos = 0.0;
        assert_eq!(polytts_cosine(speaker.as_ptr(), speaker.as_ptr(), dim, &mut cos), PolyttsStatus::Ok);
        assert!((cos - 1.0).abs() < 1e-9);

        polytts_audio_free(a);
        polytts_audio_free(b);
        polytts_floats_free(emb);
        polytts_system_free(sys);
    }
}

#[test]
fn failures_report_codes_and_messages() {
    let f = fixture();
    let sys = load(&f);
    unsafe {
        let lang = cstr("no-such-language");
        let text = cstr("x");
        let mut units = ptr::null_mut();
        let status = polytts_system_text_to_units(sys, text.as_ptr(), lang.as_ptr(), &mut units);
        assert_ne!(status, PolyttsStatus::Ok);
        assert!(units.is_null(), "outputs stay untouched on failure");
        assert!(last_error().contains("no-such-language"));

        let good = cstr(f.corpus.languages.name(polytts::LanguageId(0)).unwrap());
        let mut audio = ptr::null_mut();
        let short = [1.0f32; 3];
        let status = polytts_system_synthesize(sys, text.as_ptr(), good.as_ptr(), short.as_ptr(), 3, &mut audio);
        assert_ne!(status, PolyttsStatus::Ok);
        assert!(!last_error().is_empty());

        let status = polytts_system_synthesize(sys, ptr::null(), good.as_ptr(), short.as_ptr(), 3, &mut audio);
        assert_eq!(status, PolyttsStatus::NullArgument);
        assert!(last_error().contains("text"));

        let mut count = 0usize;
        assert_eq!(polytts_system_language_count(sys, &mut count), PolyttsStatus::Ok);
        assert!(polytts_last_error_message().is_null(), "success clears the message");
        polytts_system_free(sys);
    }

    let missing = cpath(&f.root.join("missing.ckpt"));
    let mut sys = ptr::null_mut();
    let status = unsafe { polytts_system_load(f.config.as_ptr(), missing.as_ptr(), &mut sys) };
    assert_eq!(status, PolyttsStatus::Io);
    assert!(sys.is_null());
    assert!(last_error().contains("missing.ckpt"));

    let bad = [0xffu8, 0xfe, 0];
    let status = unsafe { polytts_system_load(bad.as_ptr().cast(), f.checkpoint.as_ptr(), &mut sys) };
    assert_eq!(status, PolyttsStatus::InvalidUtf8);
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        polytts_system_free(ptr::null_mut());
        polytts_units_free(ptr::null_mut());
        polytts_audio_free(ptr::null_mut());
        polytts_floats_free(ptr::null_mut());
        assert_eq!(polytts_units_len(ptr::null()), 0);
        assert!(polytts_audio_samples(ptr::null()).is_null());
    }
}

#[test]
fn stateless_algorithms() {
    unsafe {
        // Unit 1 prefers frames 1..3, unit 0 frame 0, unit 2 the last frame.
        let scores: [f64; 15] = [
            0.0, -5.0, -5.0, //
            -5.0, 0.0, -5.0, //
            -5.0, 0.0, -5.0, //
            -5.0, 0.0, -5.0, //
            -5.0, -5.0, 0.0,
        ];
        let mut d = [0u32; 3];
        assert_eq!(polytts_mas(scores.as_ptr(), 5, 3, d.as_mut_ptr()), PolyttsStatus::Ok);
        assert_eq!(d, [1, 3, 1]);
        assert_eq!(polytts_mas(scores.as_ptr(), 2, 3, d.as_mut_ptr()), PolyttsStatus::Alignment);

        let values = [1.0f32, 3.0, 0.0, 4.0, 0.0, 0.0];
        let durations = [2u32, 2, 0, 2];
        let mut avg = [9.0f32; 4];
        let status = polytts_phoneme_average(values.as_ptr(), 6, durations.as_ptr(), 4, true, avg.as_mut_ptr());
        assert_eq!(status, PolyttsStatus::Ok);
        assert_eq!(avg, [2.0, 4.0, 0.0, 0.0]);
        let status = polytts_phoneme_average(values.as_ptr(), 6, durations.as_ptr(), 4, false, avg.as_mut_ptr());
        assert_eq!(status, PolyttsStatus::Ok);
        assert_eq!(avg, [2.0, 2.0, 0.0, 0.0]);
        let status = polytts_phoneme_average(values.as_ptr(), 5, durations.as_ptr(), 4, false, avg.as_mut_ptr());
        assert_eq!(status, PolyttsStatus::Shape);

        let a = [1.0f32, 0.0];
        let b = [0.0f32, 2.0];
        let mut c = 9.0;
        assert_eq!(polytts_cosine(a.as_ptr(), b.as_ptr(), 2, &mut c), PolyttsStatus::Ok);
        assert_eq!(c, 0.0);
        let z = [0.0f32, 0.0];
        assert_eq!(polytts_cosine(a.as_ptr(), z.as_ptr(), 2, &mut c), PolyttsStatus::ZeroNorm);

        let owned: Vec<CString> = ["a", "b", "c", "a", "x", "c"].iter().map(|s| cstr(s)).collect();
        let ptrs: Vec<*const std::ffi::c_char> = owned.iter().map(|s| s.as_ptr()).collect();
        let mut rate = 0.0;
        assert_eq!(polytts_error_rate(ptrs.as_ptr(), 3, ptrs[3..].as_ptr(), 3, &mut rate), PolyttsStatus::Ok);
        assert!((rate - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(polytts_error_rate(ptr::null(), 0, ptr::null(), 0, &mut rate), PolyttsStatus::Ok);
        assert_eq!(rate, 0.0);
    }
    let v = unsafe { CStr::from_ptr(polytts_version()) };
    assert_eq!(v.to_str().unwrap(), polytts::VERSION_TAG);
}
