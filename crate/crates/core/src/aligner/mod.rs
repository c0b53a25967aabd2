//! Self-contained phoneme-to-frame aligner: a CTC frame classifier with an
//! auxiliary reconstruction decoder, and monotonic alignment search over its
//! posteriograms.

mod ctc;
mod mas;
mod model;

pub use ctc::{ctc_loss, ctc_min_frames};
pub use mas::{durations_from_path, mas, AlignmentPath, Posteriogram};
pub use model::{Aligner, AlignerConfig, AlignerLoss, AlignerNet, AlignerSample, AlignerVocab, BLANK_SYMBOL};
