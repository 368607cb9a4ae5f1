//! The feedback loop.
//!
//! A session first runs a preceding test source (an imported suite or the
//! baseline generator) until coverage stops growing for a timeframe. It then
//! repeatedly picks the least-covered method, one of its unused invocation
//! sequences, counter-examples reaching that sequence's entry, and asks the
//! LLM for new tests, which are executed and added to the pool.

mod artifacts;
mod clock;
mod config;
mod plateau;
mod preceding;
mod report;
mod runner;
mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;
use tracing::{debug, info, warn};

pub use artifacts::{load_report, Artifacts, BRANCH_MAP_FILE, REPORT_FILE};
pub use clock::{Clock, SimClock, SystemClock};
pub use config::SessionConfig;
pub use plateau::{detect_plateau, PlateauTracker};
pub use preceding::{BaselineGenerator, ImportedSuite, PrecedingSource, PrecedingTest};
pub use report::{IterationRecord, Rq4Metrics, SessionReport, SwitchReason, Termination};
pub use runner::{
    parse_reply, ProcessRunner, ReplayEntry, ReplayFile, ReplayResult, ReplayRunner, RunOutcome, RunRequest,
    RunnerError, TestRunner,
};
pub use state::{select_sequence, SessionState};

use crate::callgraph::{build_call_graph, CallGraph};
use crate::coverage::{
    all_outcomes, method_coverage_in, rank_targets_ascending, BranchOutcomeId, CoverageReport, MethodCoverage,
};
use crate::deps::{analyze_dependencies, classify_method, ContextPolicy};
use crate::llm::{extract_tests, ChatBackend, ChatRequest, GatewayError, Role};
use crate::model::{is_valid_python, ModelError, ProgramModel};
use crate::paths::{extract_sequences, filter_shortest, InvocationSequence};
use crate::prompt::build_bundle;
use crate::sampler::{candidates_for, sample, Origin, TestCase};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] ModelError),
    #[error("artifact I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Runner(RunnerError),
}

/// What one call to [`Session::run_iteration`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOutcome {
    /// An iteration ran; its record is the last log entry.
    Ran,
    BudgetExhausted,
    SequencesExhausted,
    FullyCovered,
}

pub struct Session<'a> {
    config: &'a SessionConfig,
    model: &'a ProgramModel,
    graph: CallGraph,
    backend: &'a mut dyn ChatBackend,
    runner: &'a mut dyn TestRunner,
    clock: &'a dyn Clock,
    artifacts: Option<&'a Artifacts>,
    pub state: SessionState,
    plateau: PlateauTracker,
    switch: Option<(Duration, SwitchReason, BTreeSet<BranchOutcomeId>, usize)>,
}

impl<'a> Session<'a> {
    pub fn new(
        config: &'a SessionConfig,
        model: &'a ProgramModel,
        backend: &'a mut dyn ChatBackend,
        runner: &'a mut dyn TestRunner,
        clock: &'a dyn Clock,
        artifacts: Option<&'a Artifacts>,
    ) -> Result<Self, SessionError> {
        config.validate()?;
        Ok(Self {
            config,
            model,
            graph: build_call_graph(model),
            backend,
            runner,
            clock,
            artifacts,
            state: SessionState::new(config.seed),
            plateau: PlateauTracker::default(),
            switch: None,
        })
    }

    fn budget_left(&self) -> bool {
        self.clock.elapsed() < self.config.time_budget()
    }

    /// Executes a test and adds it to the pool. Returns the outcomes it
    /// covered first.
    fn ingest(
        &mut self,
        test_id: String,
        source: String,
        origin: Origin,
    ) -> Result<Vec<BranchOutcomeId>, SessionError> {
        let request = RunRequest {
            module_path: self.model.module_path.clone(),
            test_source: source.clone(),
            test_id: test_id.clone(),
            timeout_s: self.config.test_timeout_s,
        };
        let report = match self.runner.run(&request) {
            Ok(outcome) => {
                self.clock.charge(outcome.elapsed);
                if let Some(a) = self.artifacts {
                    a.write_coverage(&outcome.wire)?;
                }
                CoverageReport::from_wire(outcome.wire, self.model, &source).unwrap_or_else(|e| {
                    warn!(%test_id, error = %e, "discarding inconsistent coverage report");
                    CoverageReport::empty(test_id.clone(), false)
                })
            }
            Err(e @ RunnerError::Spawn { .. }) => return Err(SessionError::Runner(e)),
            Err(e) => {
                warn!(%test_id, error = %e, "test run failed");
                CoverageReport::empty(test_id.clone(), is_valid_python(&source))
            }
        };
        if let Some(a) = self.artifacts {
            a.write_test(&test_id, &source)?;
        }
        let fresh: Vec<BranchOutcomeId> =
            report.covered_outcomes.iter().filter(|o| !self.state.covered.contains(*o)).cloned().collect();
        self.state.covered.extend(fresh.iter().cloned());
        self.state.pool.push(TestCase::new(test_id, source, origin).with_report(report));
        Ok(fresh)
    }

    /// Pulls tests from `source` until it is exhausted, coverage plateaus or
    /// the budget runs out. Never resumed afterwards.
    pub fn run_preceding(&mut self, source: &mut dyn PrecedingSource) -> Result<SwitchReason, SessionError> {
        assert!(self.switch.is_none(), "the preceding phase runs once");
        let timeframe = self.config.plateau_timeframe();
        let reason = loop {
            if !self.budget_left() {
                break SwitchReason::BudgetExhausted;
            }
            if self.plateau.reached(self.clock.elapsed(), timeframe) {
                break SwitchReason::Plateau;
            }
            let Some(test) = source.next_test() else { break SwitchReason::SourceExhausted };
            let fresh = self.ingest(test.test_id, test.source_text, test.origin)?;
            if !fresh.is_empty() {
                self.plateau.record_event(self.clock.elapsed());
            }
        };
        let now = self.clock.elapsed();
        info!(at_s = now.as_secs_f64(), ?reason, covered = self.state.covered.len(), "switching to LLM generation");
        self.switch = Some((now, reason, self.state.covered.clone(), self.state.pool.len()));
        Ok(reason)
    }

    pub fn run_iteration(&mut self) -> Result<IterationOutcome, SessionError> {
        if !self.budget_left() {
            return Ok(IterationOutcome::BudgetExhausted);
        }
        let ranking = rank_targets_ascending(self.model, &self.state.covered);
        if ranking.is_empty() {
            return Ok(IterationOutcome::FullyCovered);
        }
        let mut picked = None;
        for target in ranking {
            let unused = sequences_for(&mut self.state.unused_sequences, &self.graph, self.model, &target);
            let choice = select_sequence(unused, &target, &mut self.state.rng);
            if let Some(sequence) = choice {
                picked = Some((target, sequence));
                break;
            }
        }
        let Some((target, sequence)) = picked else { return Ok(IterationOutcome::SequencesExhausted) };

        let index = self.state.log.len() + 1;
        let started = self.clock.elapsed();
        let mut record = IterationRecord {
            index,
            target: target.clone(),
            sequence: sequence.clone(),
            counterexample_ids: Vec::new(),
            context_manifest: Vec::new(),
            dropped_dependencies: Vec::new(),
            dropped_counterexamples: Vec::new(),
            stage1_hash: None,
            stage2_hash: None,
            new_test_ids: Vec::new(),
            unparsable_blocks: 0,
            new_outcomes: Vec::new(),
            covered_after: self.state.covered.len(),
            started_s: started.as_secs_f64(),
            ended_s: started.as_secs_f64(),
            error: None,
        };
        debug!(index, %target, %sequence, "iteration");
        if let Err(e) = self.generate(&target, &sequence, &mut record) {
            match e {
                IterationError::Fatal(e) => return Err(e),
                IterationError::Logged(message) => {
                    warn!(index, %message, "iteration failed");
                    record.error = Some(message);
                }
            }
        }
        record.covered_after = self.state.covered.len();
        record.ended_s = self.clock.elapsed().as_secs_f64();
        self.state.log.push(record);
        Ok(IterationOutcome::Ran)
    }

    fn generate(
        &mut self,
        target: &str,
        sequence: &InvocationSequence,
        record: &mut IterationRecord,
    ) -> Result<(), IterationError> {
        let model = self.model;
        let method = model.method(target).expect("ranked targets are methods");
        if !self.state.depsets.contains_key(target) {
            let depset = analyze_dependencies(model, target, self.config.depth_bound).expect("target exists");
            self.state.depsets.insert(target.to_string(), depset);
        }
        let depset = &self.state.depsets[target];
        let uncovered: Vec<_> = classify_method(method, depset)
            .into_iter()
            .filter(|c| {
                method
                    .branch(&c.branch_id)
                    .is_some_and(|b| b.outcome_ids.iter().any(|o| !self.state.covered.contains(o)))
            })
            .collect();
        let policy = ContextPolicy::from_classes(&uncovered);

        let candidates = candidates_for(&self.state.pool, sequence);
        let selection = sample(&candidates, target, model).capped(self.config.counterexample_cap);
        let bundle = build_bundle(sequence, depset, model, policy, &selection.tests, self.config.prompt_char_budget)
            .map_err(|e| IterationError::Logged(e.to_string()))?;
        record.counterexample_ids = bundle.counterexample_ids.clone();
        record.context_manifest = bundle.context_manifest.clone();
        record.dropped_dependencies = bundle.dropped_dependencies.clone();
        record.dropped_counterexamples = bundle.dropped_counterexamples.clone();

        let stage1 = ChatRequest::new(&self.config.model_name, vec![(Role::User, bundle.stage1_text.clone())]);
        record.stage1_hash = Some(stage1.prompt_hash());
        self.write_prompt(record.index, 1, &bundle.stage1_text)?;
        let summary = self.call(&stage1, record.index, 1)?;

        let stage2_text = bundle.stage2_text(&summary);
        let mut messages = Vec::new();
        if self.config.two_turn {
            messages.push((Role::User, bundle.stage1_text.clone()));
            messages.push((Role::Assistant, summary));
        }
        messages.push((Role::User, stage2_text.clone()));
        let stage2 = ChatRequest::new(&self.config.model_name, messages);
        record.stage2_hash = Some(stage2.prompt_hash());
        self.write_prompt(record.index, 2, &stage2_text)?;
        let reply = self.call(&stage2, record.index, 2)?;

        let extracted = extract_tests(&reply);
        record.unparsable_blocks = extracted.dropped_unparsable;
        self.state.unparsable_blocks += extracted.dropped_unparsable;
        for source in extracted.tests {
            self.state.llm_tests += 1;
            let test_id = format!("llm_{:04}", self.state.llm_tests);
            let fresh = self.ingest(test_id.clone(), source, Origin::Llm).map_err(IterationError::Fatal)?;
            record.new_outcomes.extend(fresh);
            record.new_test_ids.push(test_id);
        }
        for id in &record.counterexample_ids {
            if let Some(t) = self.state.test_mut(id) {
                t.retire_for(sequence);
            }
        }
        Ok(())
    }

    fn write_prompt(&self, index: usize, stage: u8, text: &str) -> Result<(), IterationError> {
        if let Some(a) = self.artifacts {
            a.write_prompt(index, stage, text).map_err(|e| IterationError::Fatal(e.into()))?;
        }
        Ok(())
    }

    /// One gateway call. The budget is checked only before stage 1, so an
    /// iteration that has started may finish past the budget.
    fn call(&mut self, request: &ChatRequest, index: usize, stage: u8) -> Result<String, IterationError> {
        if stage == 1 && !self.budget_left() {
            return Err(IterationError::Logged(GatewayError::BudgetExhausted.to_string()));
        }
        let response = self.backend.complete(request).map_err(|e| IterationError::Logged(e.to_string()))?;
        self.clock.charge(Duration::from_millis(response.latency_ms));
        if let Some(a) = self.artifacts {
            a.write_response(index, stage, &response).map_err(|e| IterationError::Fatal(e.into()))?;
        }
        Ok(response.text)
    }

    fn coverage_table(&self, covered: &BTreeSet<BranchOutcomeId>) -> Vec<MethodCoverage> {
        self.model
            .methods
            .iter()
            .map(|m| method_coverage_in(&m.qualified_name, self.model, covered).expect("method exists"))
            .collect()
    }

    pub fn finish(self, termination: Termination) -> SessionReport {
        let total = all_outcomes(self.model).len();
        let ratio = |n: usize| if total == 0 { 1.0 } else { n as f64 / total as f64 };
        let (switch_at, reason, covered_at_switch, preceding_tests) =
            self.switch.clone().unwrap_or((Duration::ZERO, SwitchReason::SourceExhausted, BTreeSet::new(), 0));
        let llm: Vec<&TestCase> = self.state.pool.iter().filter(|t| t.origin == Origin::Llm).collect();
        let valid = llm.iter().filter(|t| t.report.as_ref().is_some_and(|r| r.syntactically_valid)).count();
        let passed = llm.iter().filter(|t| t.report.as_ref().is_some_and(|r| r.execution_passed)).count();
        let elapsed = self.clock.elapsed();
        let grace_used = self
            .state
            .log
            .last()
            .is_some_and(|r| r.started_s < self.config.time_budget_s && r.ended_s > self.config.time_budget_s);
        SessionReport {
            module_path: self.model.module_path.clone(),
            config: self.config.clone(),
            total_outcomes: total,
            preceding_tests,
            new_branch_events_s: self.plateau.events().iter().map(Duration::as_secs_f64).collect(),
            switch_s: switch_at.as_secs_f64(),
            switch_reason: reason,
            covered_at_switch: covered_at_switch.len(),
            coverage_at_switch: ratio(covered_at_switch.len()),
            final_covered: self.state.covered.len(),
            final_coverage: ratio(self.state.covered.len()),
            methods_at_switch: self.coverage_table(&covered_at_switch),
            methods_final: self.coverage_table(&self.state.covered),
            iterations: self.state.log.clone(),
            termination,
            rq4: Rq4Metrics::new(llm.len() + self.state.unparsable_blocks, valid, passed),
            elapsed_s: elapsed.as_secs_f64(),
            grace_used,
        }
    }

    /// Runs iterations until the budget, the sequences or the uncovered
    /// branches run out.
    pub fn run_iterations(&mut self) -> Result<Termination, SessionError> {
        loop {
            match self.run_iteration()? {
                IterationOutcome::Ran => {}
                IterationOutcome::BudgetExhausted => return Ok(Termination::BudgetExhausted),
                IterationOutcome::SequencesExhausted => return Ok(Termination::SequencesExhausted),
                IterationOutcome::FullyCovered => return Ok(Termination::FullyCovered),
            }
        }
    }
}

enum IterationError {
    /// Recorded in the iteration log; the session continues.
    Logged(String),
    Fatal(SessionError),
}

/// Unused filtered sequences for `target`, computed on first use.
fn sequences_for<'s>(
    unused: &'s mut BTreeMap<String, Vec<InvocationSequence>>,
    graph: &CallGraph,
    model: &ProgramModel,
    target: &str,
) -> &'s mut Vec<InvocationSequence> {
    unused.entry(target.to_string()).or_insert_with(|| {
        let public = model.method(target).is_some_and(|m| m.is_public);
        filter_shortest(&extract_sequences(graph, target, public).unwrap_or_default())
    })
}

/// Everything a session needs besides the module itself.
pub struct SessionParts<'a> {
    pub preceding: &'a mut dyn PrecedingSource,
    pub backend: &'a mut dyn ChatBackend,
    pub runner: &'a mut dyn TestRunner,
    pub clock: &'a dyn Clock,
    pub artifacts: Option<&'a Artifacts>,
}

/// Preceding phase, then LLM iterations; writes `session.json` when an
/// artifact directory is given.
pub fn run_session(
    config: &SessionConfig,
    model: &ProgramModel,
    parts: SessionParts<'_>,
) -> Result<SessionReport, SessionError> {
    let SessionParts { preceding, backend, runner, clock, artifacts } = parts;
    let mut session = Session::new(config, model, backend, runner, clock, artifacts)?;
    session.run_preceding(preceding)?;
    let termination = session.run_iterations()?;
    let report = session.finish(termination);
    if let Some(a) = artifacts {
        a.write_report(&report)?;
    }
    info!(
        final_coverage = report.final_coverage,
        iterations = report.iterations.len(),
        ?termination,
        "session finished"
    );
    Ok(report)
}

/// Reads and parses the module at `path`.
pub fn load_module(path: &std::path::Path) -> Result<ProgramModel, SessionError> {
    let source = std::fs::read_to_string(path)?;
    Ok(crate::model::parse_module(&source, PathBuf::from(path))?)
}
