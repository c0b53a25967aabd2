//! Multilingual text-to-speech built on phonological feature inputs.

pub mod acoustic;
pub mod aligner;
pub mod config;
pub mod container;
pub mod data;
pub mod dsp;
pub mod edit;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod laml;
mod language;
pub mod nn;
pub mod pipeline;
pub mod speaker;
pub mod toy;
pub mod vocoder;

pub use error::{Error, Result};
pub use language::{LanguageId, LanguageRegistry};

/// `git describe` of the source tree this library was built from.
pub const VERSION_TAG: &str = env!("POLYTTS_VERSION_TAG");
