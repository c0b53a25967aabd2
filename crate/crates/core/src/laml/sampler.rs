use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::LanguageId;

/// Position of a sampler; the permutation is recomputed from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerState {
    pub epoch: u64,
    pub cursor: usize,
}

/// Endless shuffled cycle over the items of one task.
#[derive(Debug, Clone)]
pub struct TaskSampler {
    language: LanguageId,
    items: usize,
    seed: u64,
    state: SamplerState,
    order: Vec<usize>,
}

impl TaskSampler {
    pub fn new(language: LanguageId, items: usize, seed: u64) -> Result<Self> {
        if items == 0 {
            return Err(Error::EmptyTask(language));
        }
        let mut s = Self {
            language,
            items,
            seed,
            state: SamplerState { epoch: 0, cursor: 0 },
            order: Vec::new(),
        };
        s.reshuffle();
        Ok(s)
    }

    fn reshuffle(&mut self) {
        let mix = self.seed ^ (u64::from(self.language.0) << 32) ^ self.state.epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        self.order = (0..self.items).collect();
        self.order.shuffle(&mut rng);
    }

    pub fn language(&self) -> LanguageId {
        self.language
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn state(&self) -> SamplerState {
        self.state
    }

    pub fn restore(&mut self, state: SamplerState) -> Result<()> {
        if state.cursor >= self.items {
            return Err(Error::config(format!(
                "sampler cursor {} out of range for {} items",
                state.cursor, self.items
            )));
        }
        self.state = state;
        self.reshuffle();
        Ok(())
    }

    /// Next `n` item indices, wrapping into a freshly shuffled epoch.
    pub fn next_batch(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            out.push(self.order[self.state.cursor]);
            self.state.cursor += 1;
            if self.state.cursor == self.items {
                self.state.cursor = 0;
                self.state.epoch += 1;
                self.reshuffle();
            }
        }
        out
    }
}

/// Languages as tasks, each with the same per-step batch size.
#[derive(Debug, Clone)]
pub struct TaskRegistry {
    samplers: BTreeMap<LanguageId, TaskSampler>,
    batch_size: usize,
    seed: u64,
}

impl TaskRegistry {
    pub fn new(batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        Ok(Self {
            samplers: BTreeMap::new(),
            batch_size,
            seed,
        })
    }

    pub fn register(&mut self, language: LanguageId, items: usize) -> Result<()> {
        if self.samplers.contains_key(&language) {
            return Err(Error::config(format!("language {language} is already a task")));
        }
        self.samplers.insert(language, TaskSampler::new(language, items, self.seed)?);
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn languages(&self) -> Vec<LanguageId> {
        self.samplers.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.samplers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samplers.is_empty()
    }

    pub fn contains(&self, language: LanguageId) -> bool {
        self.samplers.contains_key(&language)
    }

    /// One batch of item indices per task, in language order.
    pub fn draw(&mut self) -> Vec<(LanguageId, Vec<usize>)> {
        let n = self.batch_size;
        self.samplers
            .iter_mut()
            .map(|(&l, s)| (l, s.next_batch(n)))
            .collect()
    }

    pub fn states(&self) -> BTreeMap<LanguageId, SamplerState> {
        self.samplers.iter().map(|(&l, s)| (l, s.state())).collect()
    }

    pub fn restore(&mut self, states: &BTreeMap<LanguageId, SamplerState>) -> Result<()> {
        for (l, st) in states {
            self.samplers
                .get_mut(l)
                .ok_or_else(|| Error::config(format!("checkpoint sampler for unregistered language {l}")))?
                .restore(*st)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_item_once_per_epoch() {
        let mut s = TaskSampler::new(LanguageId(1), 7, 3).unwrap();
        let mut seen = s.next_batch(7);
        seen.sort_unstable();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
        assert_eq!(s.state().epoch, 1);
    }

    #[test]
    fn restore_reproduces_the_stream() {
        let mut a = TaskSampler::new(LanguageId(0), 5, 9).unwrap();
        a.next_batch(8);
        let st = a.state();
        let expect = a.next_batch(12);
        let mut b = TaskSampler::new(LanguageId(0), 5, 9).unwrap();
        b.restore(st).unwrap();
        assert_eq!(b.next_batch(12), expect);
    }

    #[test]
    fn empty_task_names_the_language() {
        let mut r = TaskRegistry::new(2, 0).unwrap();
        let err = r.register(LanguageId(4), 0).unwrap_err();
        assert!(err.to_string().contains('4'), "{err}");
    }

    #[test]
    fn draw_consumes_batch_size_per_task() {
        let mut r = TaskRegistry::new(4, 0).unwrap();
        for l in 0..3 {
            r.register(LanguageId(l), 3).unwrap();
        }
        let draw = r.draw();
        assert_eq!(draw.iter().map(|(_, b)| b.len()).sum::<usize>(), 12);
        assert!(r.register(LanguageId(1), 2).is_err());
    }
}
