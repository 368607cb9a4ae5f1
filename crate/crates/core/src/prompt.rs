//! Two-stage prompt assembly.
//!
//! Stage 1 shows the code context of a target method (the methods of the
//! selected invocation sequence, its dependency methods, the target itself,
//! and the declarations and constructors of their classes) and asks for a
//! summary of the target's functionality. Stage 2 repeats that summary,
//! shows the sampled counter-examples and asks for tests that diverge from
//! them.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::deps::{ContextPolicy, DependencySet};
use crate::model::ProgramModel;
use crate::paths::InvocationSequence;
use crate::sampler::TestCase;

pub const DEFAULT_PROMPT_CHAR_BUDGET: usize = 24_000;

pub const DIVERGENCE_INSTRUCTION: &str = "These counter-examples enter the target method via the selected sequence of method invocations. They can cover different parts of the method. Please generate new test cases that cover different scenarios or edge cases.";

pub const NO_COUNTEREXAMPLES_MARKER: &str = "(no existing tests reach this method)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("no method body for `{0}`")]
    MissingMethodBody(String),
    #[error("sequence ends at `{sequence}` but the dependency set is for `{depset}`")]
    TargetMismatch { sequence: String, depset: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1 {
    pub text: String,
    /// Classes and methods in order of appearance.
    pub context_manifest: Vec<String>,
}

/// Builds the context-and-summarize prompt. With an all-false `policy` (every
/// remaining branch is easy) only the target body is shown.
pub fn build_stage1(
    sequence: &InvocationSequence,
    depset: &DependencySet,
    model: &ProgramModel,
    policy: ContextPolicy,
) -> Result<Stage1, PromptError> {
    build_stage1_with(sequence, &depset.methods, &depset.target, model, policy)
}

fn build_stage1_with(
    sequence: &InvocationSequence,
    dependencies: &[String],
    depset_target: &str,
    model: &ProgramModel,
    policy: ContextPolicy,
) -> Result<Stage1, PromptError> {
    let target = sequence.target();
    if target != depset_target {
        return Err(PromptError::TargetMismatch { sequence: target.to_string(), depset: depset_target.to_string() });
    }
    let mut order: Vec<&str> = Vec::new();
    if policy.include_sequence {
        order.extend(sequence.callers().iter().map(String::as_str));
    }
    if policy.include_dependencies {
        order.extend(dependencies.iter().map(String::as_str));
    }
    order.push(target);
    let mut seen_methods = BTreeSet::new();
    order.retain(|m| *m == target || seen_methods.insert(*m));
    order.dedup();
    let show_classes = policy != ContextPolicy::default();

    let mut text = String::new();
    let mut manifest = Vec::new();
    let mut shown_classes: BTreeSet<&str> = BTreeSet::new();
    let _ = writeln!(text, "The following code is from the Python module `{}`.\n", model.module_name());
    for (i, name) in order.iter().enumerate() {
        if *name == target && i + 1 != order.len() {
            continue;
        }
        let method = model.method(name).filter(|m| !m.body_text.trim().is_empty());
        let method = method.ok_or_else(|| PromptError::MissingMethodBody(name.to_string()))?;
        if let Some(class) = method.class_name.as_deref().and_then(|c| model.class(c)) {
            if show_classes && shown_classes.insert(class.qualified_name.as_str()) {
                let _ = writeln!(text, "# Class `{}`\n{}", class.qualified_name, fence(&class.declaration_text));
                let is_ctor = method.simple_name() == "__init__";
                if let Some(ctor) = class.constructor_text.as_deref().filter(|_| !is_ctor) {
                    let _ = writeln!(text, "# Constructor of `{}`\n{}", class.qualified_name, fence(ctor));
                }
                manifest.push(class.qualified_name.clone());
            }
        }
        let heading = if *name == target { "Target method" } else { "Method" };
        let _ = writeln!(text, "# {heading} `{name}`\n{}", fence(&method.body_text));
        manifest.push(name.to_string());
    }
    let _ = writeln!(text, "Please summarize the functionality of the method `{target}`.");
    Ok(Stage1 { text, context_manifest: manifest })
}

fn fence(code: &str) -> String {
    let mut out = String::from("```python\n");
    out.push_str(code);
    if !code.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
    out
}

/// Builds the generation prompt. Counter-example sources appear verbatim in
/// the given order.
pub fn build_stage2(target: &str, module_name: &str, summary: &str, counterexamples: &[&str]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "Functionality of `{target}`:\n{}\n", summary.trim_end());
    let _ = writeln!(text, "Existing tests (counter-examples):\n");
    if counterexamples.is_empty() {
        let _ = writeln!(text, "{NO_COUNTEREXAMPLES_MARKER}\n");
    }
    for source in counterexamples {
        let _ = writeln!(text, "{}", fence(source));
    }
    let _ = writeln!(text, "{DIVERGENCE_INSTRUCTION}");
    let _ = writeln!(
        text,
        "Write them as pytest functions named `test_*` in a single ```python block that imports from `{module_name}`."
    );
    text
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub target: String,
    pub module_name: String,
    pub stage1_text: String,
    pub context_manifest: Vec<String>,
    /// Counter-examples kept after budgeting, in sampler order.
    pub counterexample_ids: Vec<String>,
    #[serde(skip)]
    counterexample_sources: Vec<String>,
    pub dropped_dependencies: Vec<String>,
    pub dropped_counterexamples: Vec<String>,
    /// Set when even the minimal prompt exceeds the budget.
    pub over_budget: bool,
}

impl PromptBundle {
    /// Stage 2 text once the stage-1 summary is known.
    pub fn stage2_text(&self, summary: &str) -> String {
        let sources: Vec<&str> = self.counterexample_sources.iter().map(String::as_str).collect();
        build_stage2(&self.target, &self.module_name, summary, &sources)
    }

    /// Prompt length counted against the budget (the summary is excluded,
    /// as it is not known until stage 1 has been answered).
    pub fn budgeted_len(&self) -> usize {
        self.stage1_text.len() + self.stage2_text("").len()
    }
}

/// Builds both stages within `char_budget`. On overflow, dependency methods
/// are dropped last-discovered-first, then counter-examples from the end of
/// the sampler order (lowest gain).
pub fn build_bundle(
    sequence: &InvocationSequence,
    depset: &DependencySet,
    model: &ProgramModel,
    policy: ContextPolicy,
    counterexamples: &[&TestCase],
    char_budget: usize,
) -> Result<PromptBundle, PromptError> {
    let mut deps = depset.methods.clone();
    let mut kept: Vec<&TestCase> = counterexamples.to_vec();
    let mut dropped_dependencies = Vec::new();
    let mut dropped_counterexamples = Vec::new();
    loop {
        let stage1 = build_stage1_with(sequence, &deps, &depset.target, model, policy)?;
        let bundle = PromptBundle {
            target: sequence.target().to_string(),
            module_name: model.module_name(),
            stage1_text: stage1.text,
            context_manifest: stage1.context_manifest,
            counterexample_ids: kept.iter().map(|t| t.test_id.clone()).collect(),
            counterexample_sources: kept.iter().map(|t| t.source_text.clone()).collect(),
            dropped_dependencies: dropped_dependencies.clone(),
            dropped_counterexamples: dropped_counterexamples.clone(),
            over_budget: false,
        };
        let len = bundle.budgeted_len();
        if len <= char_budget {
            return Ok(bundle);
        }
        if policy.include_dependencies && !deps.is_empty() {
            dropped_dependencies.push(deps.pop().expect("non-empty"));
        } else if let Some(t) = kept.pop() {
            dropped_counterexamples.push(t.test_id.clone());
        } else {
            debug!(len, char_budget, "prompt exceeds budget with nothing left to drop");
            return Ok(PromptBundle { over_budget: true, ..bundle });
        }
    }
}
