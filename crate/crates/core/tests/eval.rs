mod common;

use std::collections::BTreeMap;

use polytts::acoustic::{LoadedModel, ModelConfig};
use polytts::data::{FeatureConfig, Waveform};
use polytts::eval::{
    accent_delta, intelligibility, project2d, similarity_report, CommandAsr, IntelligibilityItem,
    IntelligibilityOutcome, ProjectionMethod, RateUnit, Reference, Synthesizer,
};
use polytts::pipeline::TtsSystem;
use polytts::speaker::{embed, SpeakerEmbedder, ToyEmbedder, TOY_DIM};
use polytts::vocoder::{GriffinLim, GriffinLimConfig};
use polytts::LanguageId;

struct ConstantEmbedder;

impl SpeakerEmbedder for ConstantEmbedder {
    fn name(&self) -> &str {
        "constant"
    }

    fn dim(&self) -> usize {
        TOY_DIM
    }

    fn embed_raw(&self, _: &Waveform) -> polytts::Result<Vec<f32>> {
        Ok((0..TOY_DIM).map(|i| (i as f32 * 0.7).sin()).collect())
    }
}

fn tsne(seed: u64) -> ProjectionMethod {
    ProjectionMethod::Tsne {
        seed,
        perplexity: 2.0,
        iterations: 300,
    }
}

fn labelled(vectors: &[Vec<f32>]) -> Vec<(String, Vec<f32>)> {
    vectors.iter().enumerate().map(|(i, v)| (format!("p{i}"), v.clone())).collect()
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[test]
fn orthogonal_vectors_project_to_distinct_points() {
    let points = labelled(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    for method in [ProjectionMethod::Pca, tsne(1)] {
        let p = project2d(&points, method).unwrap();
        let extent = p.extent();
        assert!(extent > 0.0);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(distance(p.coords[i], p.coords[j]) > 0.01 * extent, "{method:?} {i} {j}");
            }
        }
    }
}

#[test]
fn duplicated_embeddings_coincide() {
    let points = labelled(&[
        vec![1.0, 2.0, 0.5, 0.0],
        vec![1.0, 2.0, 0.5, 0.0],
        vec![-1.0, 0.0, 2.0, 1.0],
        vec![0.0, -2.0, 1.0, 3.0],
        vec![2.0, 1.0, -1.0, 0.5],
    ]);
    for method in [ProjectionMethod::Pca, tsne(4)] {
        let p = project2d(&points, method).unwrap();
        assert!(distance(p.coords[0], p.coords[1]) < 0.01 * p.extent(), "{method:?}");
    }
}

#[test]
fn projections_are_reproducible() {
    let points = labelled(&(0..8).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5) as f32 - 2.0).collect()).collect::<Vec<_>>());
    assert_eq!(project2d(&points, tsne(9)).unwrap(), project2d(&points, tsne(9)).unwrap());
    assert_eq!(
        project2d(&points, ProjectionMethod::Pca).unwrap(),
        project2d(&points, ProjectionMethod::Pca).unwrap()
    );
    assert!(project2d(&points[..2], ProjectionMethod::Pca).is_err());

    let dir = tempfile::tempdir().unwrap();
    let p = project2d(&points, ProjectionMethod::Pca).unwrap();
    p.write_png(dir.path().join("p.png")).unwrap();
    let img = image::open(dir.path().join("p.png")).unwrap();
    assert_eq!((img.width(), img.height()), (512, 512));
    assert_eq!(p.to_csv().lines().count(), 1 + points.len());
}

#[test]
fn command_adapter_scores_phone_error_rate() {
    let items = vec![
        IntelligibilityItem {
            wav: "unused.wav".into(),
            reference: vec!["a".into(), "x".into(), "c".into()],
        },
        IntelligibilityItem {
            wav: "unused.wav".into(),
            reference: vec!["a".into(), "b".into(), "c".into()],
        },
    ];
    let asr = CommandAsr {
        name: "echo".into(),
        program: "echo".into(),
        args: vec!["a".into(), "b".into(), "c".into()],
    };
    match intelligibility(&items, RateUnit::Phone, Some(&asr)).unwrap() {
        IntelligibilityOutcome::Scored(table) => {
            assert!((table.rows[0].rate - 100.0 / 3.0).abs() < 1e-9);
            assert_eq!(table.rows[1].rate, 0.0);
            assert!((table.overall - 100.0 / 6.0).abs() < 1e-9);
            assert!(table.to_csv().starts_with("wav,reference_len,edits,per\n"));
        }
        other => panic!("expected a score, got {other:?}"),
    }
}

/// Untrained toy model behind the real synthesis path.
fn toy_system() -> (TtsSystem, common::ToySetup) {
    let setup = common::toy_setup(2, 2, ModelConfig::toy());
    let model = LoadedModel::new(setup.meta.clone()).unwrap();
    let vocoder = GriffinLim::new(
        FeatureConfig::default(),
        GriffinLimConfig {
            iterations: 4,
            nnls_iterations: 20,
            ..GriffinLimConfig::default()
        },
    );
    let system = TtsSystem {
        model,
        frontend: setup.corpus.frontend.clone(),
        vocoder: Box::new(vocoder),
    };
    (system, setup)
}

#[test]
fn constant_embedder_gives_unit_similarity_and_zero_accent_delta() {
    let (system, setup) = toy_system();
    let references: Vec<Reference> = setup
        .corpus
        .utterances
        .iter()
        .take(2)
        .map(|u| Reference {
            speaker: format!("s{}", u.speaker),
            language: u.language,
            audio: vec![u.audio.clone()],
        })
        .collect();
    let texts: BTreeMap<LanguageId, Vec<String>> = [LanguageId(0), LanguageId(1)]
        .into_iter()
        .map(|l| (l, vec![setup.corpus.by_language(l)[0].text.clone()]))
        .collect();
    let report = similarity_report(&system, &ConstantEmbedder, &references, &texts).unwrap();
    assert!(report
        .records
        .iter()
        .all(|r| r.similarity.is_some_and(|s| (s - 1.0).abs() < 1e-6)));
    assert_eq!(report.records.len(), 2 * 2);
    let accent = accent_delta(&system, &ConstantEmbedder, &references, &texts, &[LanguageId(0)]).unwrap();
    assert_eq!(accent.failures, 0);
    assert!(accent.delta.values().all(|&d| d.abs() < 1e-9), "{:?}", accent.delta);
}

#[test]
fn synthesis_is_deterministic_and_speaker_dependent() {
    let (system, setup) = toy_system();
    let embedder = ToyEmbedder::new();
    let u0 = &setup.corpus.utterances[0];
    let other = setup.corpus.utterances.iter().find(|u| u.speaker != u0.speaker).unwrap();
    let s0 = embed(&embedder, &u0.audio).unwrap().vector;
    let s1 = embed(&embedder, &other.audio).unwrap().vector;
    let a = Synthesizer::synthesize(&system, &u0.text, u0.language, &s0).unwrap();
    let b = Synthesizer::synthesize(&system, &u0.text, u0.language, &s0).unwrap();
    let c = Synthesizer::synthesize(&system, &u0.text, u0.language, &s1).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.sample_rate, 16_000);
    assert!(system.resolve_language("nope").is_err());
}
