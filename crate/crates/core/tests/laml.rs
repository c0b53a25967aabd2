mod common;

use std::collections::BTreeMap;

use polytts::acoustic::{ModelConfig, ModelMeta};
use polytts::laml::{
    batch_loss, finetune_lowresource, LossLog, TrainConfig, Trainer, TrainingExample, DEFAULT_FINETUNE_STEPS,
};
use polytts::nn::ParamStore;
use polytts::{Error, LanguageId, LanguageRegistry};

type Data = BTreeMap<LanguageId, Vec<TrainingExample>>;

fn snapshot(params: &ParamStore) -> BTreeMap<String, Vec<u32>> {
    params
        .iter()
        .map(|(name, var)| {
            let v: Vec<f32> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
            (name.clone(), v.into_iter().map(f32::to_bits).collect())
        })
        .collect()
}

/// Meta and data restricted to the first `keep` languages of a toy setup.
fn first_languages(setup: &common::ToySetup, keep: usize) -> (ModelMeta, Data) {
    let mut meta = setup.meta.clone();
    meta.languages = LanguageRegistry::new(setup.corpus.languages.names()[..keep].to_vec()).unwrap();
    let data = setup
        .data
        .iter()
        .filter(|(l, _)| l.index() < keep)
        .map(|(l, v)| (*l, v.clone()))
        .collect();
    (meta, data)
}

fn config(steps: u64) -> TrainConfig {
    common::toy_train_config(ModelConfig::toy(), steps)
}

#[test]
fn single_language_step_equals_plain_training() {
    let setup = common::toy_setup(1, 4, ModelConfig::toy());
    let mut laml = Trainer::new(config(3), setup.meta.clone(), setup.data.clone()).unwrap();
    let mut plain = Trainer::new(config(3), setup.meta.clone(), setup.data.clone()).unwrap();
    let examples = &setup.data[&LanguageId(0)];
    for _ in 0..3 {
        laml.step().unwrap();
        let draw = plain.registry.draw();
        assert_eq!(draw.len(), 1);
        let loss = batch_loss(&plain.model, examples, &draw[0].1).unwrap();
        let grads = loss.total.backward().unwrap();
        plain.state.optimizer.apply(&plain.state.params, &grads).unwrap();
    }
    assert_eq!(snapshot(&laml.state.params), snapshot(&plain.state.params));
}

#[test]
fn every_task_contributes_one_batch_per_step() {
    let setup = common::toy_setup(3, 5, ModelConfig::toy());
    let mut trainer = Trainer::new(config(2), setup.meta.clone(), setup.data.clone()).unwrap();
    for _ in 0..2 {
        let report = trainer.step().unwrap();
        assert_eq!(report.per_language.len(), 3);
        assert_eq!(report.consumed(), 12);
        assert!(report.per_language.values().all(|l| l.samples == 4));
    }
    assert_eq!(trainer.step_count(), 2);
}

#[test]
fn zero_steps_leave_the_initial_state() {
    let setup = common::toy_setup(2, 4, ModelConfig::toy());
    let fresh = Trainer::new(config(0), setup.meta.clone(), setup.data.clone()).unwrap();
    let trained = polytts::laml::pretrain(config(0), setup.meta.clone(), setup.data.clone(), None, None).unwrap();
    assert_eq!(trained.step_count(), 0);
    assert_eq!(snapshot(&fresh.state.params), snapshot(&trained.state.params));
}

#[test]
fn finetune_default_is_5000_batches() {
    assert_eq!(DEFAULT_FINETUNE_STEPS, 5000);
    assert_eq!(TrainConfig::default().finetune_steps, 5000);
}

#[test]
fn new_language_joins_every_step() {
    let setup = common::toy_setup(3, 4, ModelConfig::toy());
    let (meta, data) = first_languages(&setup, 2);
    let mut trainer = Trainer::new(config(2), meta, data).unwrap();
    trainer.run(2, None).unwrap();
    let rows_before: Vec<f32> = trainer.model.language_table().as_tensor().flatten_all().unwrap().to_vec1().unwrap();
    let name = setup.corpus.languages.name(LanguageId(2)).unwrap().to_string();
    let reports =
        finetune_lowresource(&mut trainer, &name, setup.data[&LanguageId(2)].clone(), Some(3), None).unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        let langs: Vec<LanguageId> = r.per_language.keys().copied().collect();
        assert_eq!(langs, vec![LanguageId(0), LanguageId(1), LanguageId(2)]);
        assert_eq!(r.consumed(), 12);
    }
    assert_eq!(trainer.meta.languages.len(), 3);
    assert_eq!(trainer.model.language_count(), 3);
    assert_eq!(rows_before.len(), 2 * 32);
}

#[test]
fn new_language_row_starts_at_the_mean() {
    let setup = common::toy_setup(3, 4, ModelConfig::toy());
    let (meta, data) = first_languages(&setup, 2);
    let mut trainer = Trainer::new(config(0), meta, data).unwrap();
    let name = setup.corpus.languages.name(LanguageId(2)).unwrap().to_string();
    trainer.add_language(&name, setup.data[&LanguageId(2)].clone()).unwrap();
    let table: Vec<Vec<f32>> = trainer.model.language_table().as_tensor().to_vec2().unwrap();
    for c in 0..table[0].len() {
        let mean = (table[0][c] + table[1][c]) / 2.0;
        assert!((table[2][c] - mean).abs() < 1e-6);
    }
}

#[test]
fn colliding_or_empty_languages_are_rejected() {
    let setup = common::toy_setup(3, 4, ModelConfig::toy());
    let (meta, data) = first_languages(&setup, 2);
    let mut trainer = Trainer::new(config(0), meta, data).unwrap();
    let existing = setup.corpus.languages.name(LanguageId(0)).unwrap().to_string();
    let err = trainer.add_language(&existing, setup.data[&LanguageId(2)].clone()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let err = trainer.add_language("fresh", Vec::new()).unwrap_err();
    assert!(matches!(err, Error::EmptyTask(LanguageId(2))), "{err}");
    let err = trainer.add_language("fresh", setup.data[&LanguageId(0)].clone()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert_eq!(trainer.meta.languages.len(), 2);
    assert_eq!(trainer.model.language_count(), 2);
}

#[test]
fn failed_checkpoint_write_falls_back_and_keeps_training() {
    let setup = common::toy_setup(1, 4, ModelConfig::toy());
    let mut trainer = Trainer::new(config(1), setup.meta.clone(), setup.data.clone()).unwrap();
    trainer.step().unwrap();
    let dir = tempfile::tempdir().unwrap();
    // A non-empty directory cannot be replaced by the checkpoint file.
    let blocked = dir.path().join("model.ckpt");
    std::fs::create_dir(&blocked).unwrap();
    std::fs::write(blocked.join("occupied"), b"x").unwrap();
    let written = trainer.save_checkpoint(&blocked).unwrap();
    assert_eq!(written, dir.path().join("model.ckpt.fallback"));
    let resumed = Trainer::resume(&written, setup.data.clone()).unwrap();
    assert_eq!(resumed.step_count(), 1);
    assert_eq!(snapshot(&resumed.state.params), snapshot(&trainer.state.params));
    trainer.step().unwrap();
    assert_eq!(trainer.step_count(), 2);
}

#[test]
fn loss_log_has_one_row_per_language_and_step() {
    let setup = common::toy_setup(2, 4, ModelConfig::toy());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    let mut trainer = Trainer::new(config(3), setup.meta.clone(), setup.data.clone())
        .unwrap()
        .with_log(LossLog::open(&path).unwrap());
    trainer.run(3, None).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,language_id,total,mel_l1,duration_mse,pitch_mse,energy_mse");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("1,0,"));
    assert!(lines[6].starts_with("3,1,"));
}

#[test]
fn train_config_round_trips_through_toml() {
    let cfg = TrainConfig {
        steps: 123,
        seed: 9,
        ..config(123)
    };
    let back = TrainConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(TrainConfig::from_toml("schema_version = 99").is_err());
}
