use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::SessionConfig;
use crate::coverage::{BranchOutcomeId, MethodCoverage};
use crate::paths::InvocationSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub target: String,
    pub sequence: InvocationSequence,
    pub counterexample_ids: Vec<String>,
    pub context_manifest: Vec<String>,
    pub dropped_dependencies: Vec<String>,
    pub dropped_counterexamples: Vec<String>,
    pub stage1_hash: Option<String>,
    pub stage2_hash: Option<String>,
    pub new_test_ids: Vec<String>,
    pub unparsable_blocks: usize,
    pub new_outcomes: Vec<BranchOutcomeId>,
    pub covered_after: usize,
    pub started_s: f64,
    pub ended_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchReason {
    Plateau,
    SourceExhausted,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    SequencesExhausted,
    FullyCovered,
}

/// Validity of LLM-generated tests. Fenced blocks that failed to parse count
/// as generated but syntactically invalid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rq4Metrics {
    pub generated: usize,
    pub syntax_valid: usize,
    pub execution_passed: usize,
    pub syntax_valid_fraction: f64,
    pub execution_pass_fraction: f64,
}

impl Rq4Metrics {
    pub fn new(generated: usize, syntax_valid: usize, execution_passed: usize) -> Self {
        let frac = |n: usize| if generated == 0 { 0.0 } else { n as f64 / generated as f64 };
        Self {
            generated,
            syntax_valid,
            execution_passed,
            syntax_valid_fraction: frac(syntax_valid),
            execution_pass_fraction: frac(execution_passed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub module_path: PathBuf,
    pub config: SessionConfig,
    pub total_outcomes: usize,
    pub preceding_tests: usize,
    pub new_branch_events_s: Vec<f64>,
    pub switch_s: f64,
    pub switch_reason: SwitchReason,
    pub covered_at_switch: usize,
    pub coverage_at_switch: f64,
    pub final_covered: usize,
    pub final_coverage: f64,
    pub methods_at_switch: Vec<MethodCoverage>,
    pub methods_final: Vec<MethodCoverage>,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub rq4: Rq4Metrics,
    pub elapsed_s: f64,
    /// The last iteration started before the budget ran out but ended after.
    pub grace_used: bool,
}

impl SessionReport {
    /// Plain-text summary for the `report` command.
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let pct = |x: f64| x * 100.0;
        let _ = writeln!(out, "module: {}", self.module_path.display());
        let _ = writeln!(
            out,
            "preceding phase: {} tests, switched at {:.1}s ({:?}), coverage {:.1}% ({}/{})",
            self.preceding_tests,
            self.switch_s,
            self.switch_reason,
            pct(self.coverage_at_switch),
            self.covered_at_switch,
            self.total_outcomes
        );
        let _ = writeln!(out, "iterations: {} ({:?})", self.iterations.len(), self.termination);
        for it in &self.iterations {
            let _ = writeln!(
                out,
                "  #{:<3} {:>7.1}s  {:<32} +{:<2} -> {}/{}{}",
                it.index,
                it.ended_s,
                it.target,
                it.new_outcomes.len(),
                it.covered_after,
                self.total_outcomes,
                it.error.as_deref().map(|e| format!("  error: {e}")).unwrap_or_default()
            );
        }
        let _ = writeln!(
            out,
            "final coverage: {:.1}% ({}/{})",
            pct(self.final_coverage),
            self.final_covered,
            self.total_outcomes
        );
        let _ = writeln!(
            out,
            "generated tests: {}, syntax valid {:.1}%, passing {:.1}%",
            self.rq4.generated,
            pct(self.rq4.syntax_valid_fraction),
            pct(self.rq4.execution_pass_fraction)
        );
        out
    }
}
