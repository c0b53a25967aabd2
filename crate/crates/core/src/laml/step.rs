use std::collections::BTreeMap;

use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::laml::sampler::TaskRegistry;
use crate::nn::{scalar, Adam, AdamConfig, ParamStore};
use crate::LanguageId;

/// Scalar loss graph for one batch plus its named components.
pub struct LossOutput {
    pub total: Tensor,
    pub components: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageLoss {
    pub total: f64,
    pub components: Vec<(String, f64)>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 1-based index of the update just applied.
    pub step: u64,
    pub total: f64,
    pub per_language: BTreeMap<LanguageId, LanguageLoss>,
    pub grad_norm: f64,
}

impl StepReport {
    pub fn consumed(&self) -> usize {
        self.per_language.values().map(|l| l.samples).sum()
    }
}

/// Parameters, optimizer moments and counters.
pub struct TrainState {
    pub params: ParamStore,
    pub optimizer: Adam,
    pub seed: u64,
}

impl TrainState {
    pub fn new(params: ParamStore, optimizer: AdamConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            params,
            optimizer: Adam::new(optimizer)?,
            seed,
        })
    }

    pub fn step(&self) -> u64 {
        self.optimizer.step_count()
    }
}

/// Sum of one batch loss per task, without an update.
pub fn summed_loss<F>(
    batches: &[(LanguageId, Vec<usize>)],
    loss_fn: &mut F,
) -> Result<(Tensor, BTreeMap<LanguageId, LanguageLoss>)>
where
    F: FnMut(LanguageId, &[usize]) -> Result<LossOutput>,
{
    let mut total: Option<Tensor> = None;
    let mut per_language = BTreeMap::new();
    for (language, batch) in batches {
        let out = loss_fn(*language, batch)?;
        let value = scalar(&out.total)?;
        if !value.is_finite() {
            return Err(Error::contract(format!("non-finite loss for language {language}")));
        }
        per_language.insert(
            *language,
            LanguageLoss {
                total: value,
                components: out.components,
                samples: batch.len(),
            },
        );
        total = Some(match total {
            Some(t) => (t + out.total)?,
            None => out.total,
        });
    }
    let total = total.ok_or_else(|| Error::config("no tasks registered"))?;
    Ok((total, per_language))
}

/// One meta-training step: one batch from every task, losses summed, a single
/// optimizer update.
pub fn laml_step<F>(registry: &mut TaskRegistry, state: &mut TrainState, mut loss_fn: F) -> Result<StepReport>
where
    F: FnMut(LanguageId, &[usize]) -> Result<LossOutput>,
{
    if registry.is_empty() {
        return Err(Error::config("no tasks registered"));
    }
    let batches = registry.draw();
    let (total, per_language) = summed_loss(&batches, &mut loss_fn)?;
    let grads = total.backward()?;
    let grad_norm = state.optimizer.apply(&state.params, &grads)?;
    Ok(StepReport {
        step: state.step(),
        total: scalar(&total)?,
        per_language,
        grad_norm,
    })
}
