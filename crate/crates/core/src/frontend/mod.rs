//! Text frontend: articulatory feature vectors with explicit word-boundary,
//! pause and sentence-mark units.

mod g2p;
mod inventory;
mod record;
mod text;

use std::sync::Arc;

pub use g2p::{CommandG2p, G2p, Lexicon, LexiconG2p};
pub use inventory::{
    is_reserved_symbol, FeatureInventory, FeatureVector, PAUSE_SYMBOL, RESERVED_COLUMNS,
    SENTENCE_MARKS, WORD_BOUNDARY_SYMBOL,
};
pub use record::{parse_sequence, serialize_sequence};
pub use text::{text_to_units, PhoneSequence, TextUnit, UnitKind};

use crate::error::Result;
use crate::{LanguageId, LanguageRegistry};

/// Bundles an inventory, the language registry and a g2p backend.
#[derive(Clone)]
pub struct Frontend {
    inventory: Arc<FeatureInventory>,
    languages: LanguageRegistry,
    g2p: Arc<dyn G2p>,
}

impl Frontend {
    pub fn new(
        inventory: Arc<FeatureInventory>,
        languages: LanguageRegistry,
        g2p: Arc<dyn G2p>,
    ) -> Self {
        Self {
            inventory,
            languages,
            g2p,
        }
    }

    pub fn text_to_units(&self, text: &str, language: LanguageId) -> Result<PhoneSequence> {
        text_to_units(text, language, &self.languages, &*self.g2p, &self.inventory)
    }

    pub fn featurize(&self, symbol: &str) -> Result<FeatureVector> {
        self.inventory.featurize(symbol)
    }

    pub fn inventory(&self) -> &Arc<FeatureInventory> {
        &self.inventory
    }

    pub fn languages(&self) -> &LanguageRegistry {
        &self.languages
    }
}
