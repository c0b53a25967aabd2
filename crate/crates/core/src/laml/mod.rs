//! Language-agnostic meta learning: each update sums one batch loss per
//! language.

mod sampler;
mod step;

pub use sampler::{SamplerState, TaskRegistry, TaskSampler};
pub use step::{laml_step, summed_loss, LanguageLoss, LossOutput, StepReport, TrainState};
mod train;

pub use train::{
    batch_loss, finetune_lowresource, pretrain, LossLog, TrainConfig, Trainer, TrainingExample,
    DEFAULT_FINETUNE_STEPS, SCHEMA_VERSION,
};
