use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coverage::BranchOutcomeId;
use crate::deps::DependencySet;
use crate::paths::InvocationSequence;
use crate::sampler::TestCase;

use super::report::IterationRecord;

/// Mutable session data, changed only between iterations.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub pool: Vec<TestCase>,
    /// Union of the pool's covered outcomes.
    pub covered: BTreeSet<BranchOutcomeId>,
    /// Filtered sequences not yet used, per target. Filled on first use.
    pub unused_sequences: BTreeMap<String, Vec<InvocationSequence>>,
    pub depsets: BTreeMap<String, DependencySet>,
    pub log: Vec<IterationRecord>,
    pub rng: ChaCha8Rng,
    pub(super) llm_tests: usize,
    pub(super) unparsable_blocks: usize,
}

impl SessionState {
    pub fn new(seed: u64) -> Self {
        Self {
            pool: Vec::new(),
            covered: BTreeSet::new(),
            unused_sequences: BTreeMap::new(),
            depsets: BTreeMap::new(),
            log: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            llm_tests: 0,
            unparsable_blocks: 0,
        }
    }

    pub fn test(&self, test_id: &str) -> Option<&TestCase> {
        self.pool.iter().find(|t| t.test_id == test_id)
    }

    pub fn test_mut(&mut self, test_id: &str) -> Option<&mut TestCase> {
        self.pool.iter_mut().find(|t| t.test_id == test_id)
    }
}

/// Takes the next sequence for `target` out of `unused`: the singleton
/// `[target]` if still there, otherwise a uniformly random one.
pub fn select_sequence<R: Rng + ?Sized>(
    unused: &mut Vec<InvocationSequence>,
    target: &str,
    rng: &mut R,
) -> Option<InvocationSequence> {
    if let Some(i) = unused.iter().position(|s| s.is_singleton() && s.target() == target) {
        return Some(unused.remove(i));
    }
    if unused.is_empty() {
        return None;
    }
    let i = rng.gen_range(0..unused.len());
    Some(unused.remove(i))
}
