//! Counter-example selection.
//!
//! For an invocation sequence, candidates are the existing tests that enter
//! the sequence's first method. From those, a greedy set cover over the
//! target's branch outcomes picks a small subset reaching every outcome the
//! candidates reach together.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::coverage::{BranchOutcomeId, CoverageReport};
use crate::model::ProgramModel;
use crate::paths::InvocationSequence;

/// Prompts carry at most this many counter-examples by default.
pub const DEFAULT_COUNTEREXAMPLE_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Preceding,
    Llm,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub test_id: String,
    pub source_text: String,
    pub origin: Origin,
    pub report: Option<CoverageReport>,
    /// (target, sequence) pairs this test has already served as a
    /// counter-example for. Only grows.
    pub retired_for: BTreeSet<(String, InvocationSequence)>,
}

impl TestCase {
    pub fn new(test_id: impl Into<String>, source_text: impl Into<String>, origin: Origin) -> Self {
        Self {
            test_id: test_id.into(),
            source_text: source_text.into(),
            origin,
            report: None,
            retired_for: BTreeSet::new(),
        }
    }

    pub fn with_report(mut self, report: CoverageReport) -> Self {
        self.report = Some(report);
        self
    }

    pub fn invokes(&self, method: &str) -> bool {
        self.report.as_ref().is_some_and(|r| r.invoked_methods.contains(method))
    }

    pub fn is_retired_for(&self, sequence: &InvocationSequence) -> bool {
        self.retired_for.contains(&(sequence.target().to_string(), sequence.clone()))
    }

    pub fn retire_for(&mut self, sequence: &InvocationSequence) {
        self.retired_for.insert((sequence.target().to_string(), sequence.clone()));
    }

    fn covered_among<'a>(
        &'a self,
        outcomes: &'a BTreeSet<BranchOutcomeId>,
    ) -> impl Iterator<Item = &'a BranchOutcomeId> + 'a {
        self.report.iter().flat_map(|r| r.covered_outcomes.iter()).filter(move |o| outcomes.contains(*o))
    }
}

/// Tests that enter `sequence.entry()` and are not yet retired for it, in
/// pool order.
pub fn candidates_for<'p>(pool: &'p [TestCase], sequence: &InvocationSequence) -> Vec<&'p TestCase> {
    pool.iter().filter(|t| t.invokes(sequence.entry()) && !t.is_retired_for(sequence)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection<'p> {
    pub tests: Vec<&'p TestCase>,
    /// New target outcomes contributed by each pick.
    pub gains: Vec<usize>,
    /// Target outcomes covered by the selection.
    pub covered: BTreeSet<BranchOutcomeId>,
}

impl Selection<'_> {
    pub fn test_ids(&self) -> Vec<&str> {
        self.tests.iter().map(|t| t.test_id.as_str()).collect()
    }

    /// Keeps the first `cap` picks. Greedy gains never increase from one pick
    /// to the next, so the dropped tail holds the lowest-gain members.
    pub fn capped(mut self, cap: usize) -> Self {
        if self.tests.len() > cap {
            self.tests.truncate(cap);
            self.gains.truncate(cap);
            self.covered = self
                .tests
                .iter()
                .flat_map(|t| t.report.iter().flat_map(|r| r.covered_outcomes.iter()))
                .filter(|o| self.covered.contains(*o))
                .cloned()
                .collect();
        }
        self
    }
}

/// Greedy cover of `target`'s outcomes. Each step takes the candidate adding
/// the most uncovered outcomes (smallest test id on ties) and stops once no
/// candidate adds anything.
pub fn sample<'p>(candidates: &[&'p TestCase], target: &str, model: &ProgramModel) -> Selection<'p> {
    let outcomes: BTreeSet<BranchOutcomeId> =
        model.method(target).map(|m| m.outcome_ids().collect()).unwrap_or_default();
    sample_over(candidates, &outcomes)
}

pub fn sample_over<'p>(candidates: &[&'p TestCase], outcomes: &BTreeSet<BranchOutcomeId>) -> Selection<'p> {
    let mut covered: BTreeSet<BranchOutcomeId> = BTreeSet::new();
    let mut remaining: Vec<&'p TestCase> = candidates.to_vec();
    let mut selection = Selection { tests: Vec::new(), gains: Vec::new(), covered: BTreeSet::new() };
    loop {
        let best = remaining
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.covered_among(outcomes).filter(|o| !covered.contains(*o)).count()))
            .max_by(|(i, gi), (j, gj)| gi.cmp(gj).then_with(|| remaining[*j].test_id.cmp(&remaining[*i].test_id)));
        let Some((index, gain)) = best else { break };
        if gain == 0 {
            break;
        }
        let pick = remaining.remove(index);
        covered.extend(pick.covered_among(outcomes).cloned());
        selection.tests.push(pick);
        selection.gains.push(gain);
    }
    selection.covered = covered;
    selection
}
