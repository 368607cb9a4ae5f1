//! Normalized, analysis-ready view of one Python source module.
//!
//! [`parse_module`] turns source text into a [`ProgramModel`]: one
//! [`MethodRecord`] per function, method, nested function and lambda, each
//! carrying its branch sites, call sites, assignments and return statements.
//! Every `*_text` field is an exact slice of the module source.

mod frontend;
mod terms;
mod walk;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::BranchOutcomeId;

pub use terms::{extract_condition_terms, ConditionTerms};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("module contains no functions or methods")]
    EmptyModule,
    #[error("cannot parse expression `{text}`: {message}")]
    ExpressionParse { text: String, message: String },
}

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    If,
    While,
    Ternary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSite {
    /// `<qualified_name>:<line>:<index of the condition on that line>`
    pub branch_id: String,
    pub kind: BranchKind,
    pub line: usize,
    pub condition_text: String,
    pub outcome_ids: [BranchOutcomeId; 2],
    pub referenced_variables: Vec<String>,
    pub invoked_methods: Vec<String>,
    /// In-module methods the condition's calls resolve to.
    pub resolved_methods: Vec<String>,
    pub dereferences_parameter_attribute: bool,
    /// Names passed to `isinstance`/`issubclass`/`type` inside the condition.
    pub type_tested_variables: Vec<String>,
    /// First line executed when the condition holds.
    pub true_target_line: usize,
    /// First line of the `else` part, if the construct has one.
    pub false_target_line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub caller: String,
    pub callee_expression: String,
    pub resolved_callee: Option<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub target_variable: String,
    pub rhs_text: String,
    pub rhs_invoked_methods: Vec<String>,
    pub rhs_resolved_methods: Vec<String>,
    pub rhs_variables: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub value_text: String,
    pub variables: Vec<String>,
    pub invoked_methods: Vec<String>,
    pub resolved_methods: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub qualified_name: String,
    /// Enclosing class, for methods defined directly in a class body.
    pub class_name: Option<String>,
    pub parameters: Vec<Parameter>,
    /// Name of the implicit `self`/`cls` parameter, if any.
    pub receiver: Option<String>,
    pub is_public: bool,
    pub is_lambda: bool,
    pub decorators: Vec<String>,
    pub body_text: String,
    pub branch_sites: Vec<BranchSite>,
    pub call_sites: Vec<CallSite>,
    pub assignments: Vec<AssignmentRecord>,
    pub returns: Vec<ReturnRecord>,
    pub line_span: LineSpan,
}

impl MethodRecord {
    /// Last dotted segment of the qualified name.
    pub fn simple_name(&self) -> &str {
        let name = self.qualified_name.split('#').next().unwrap_or(&self.qualified_name);
        name.rsplit('.').next().unwrap_or(name)
    }

    /// Parameters other than the implicit receiver.
    pub fn explicit_parameters(&self) -> impl Iterator<Item = &Parameter> {
        self.parameters.iter().filter(move |p| Some(p.name.as_str()) != self.receiver.as_deref())
    }

    pub fn outcome_ids(&self) -> impl Iterator<Item = BranchOutcomeId> + '_ {
        self.branch_sites.iter().flat_map(|b| b.outcome_ids.iter().cloned())
    }

    pub fn branch(&self, branch_id: &str) -> Option<&BranchSite> {
        self.branch_sites.iter().find(|b| b.branch_id == branch_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub qualified_name: String,
    pub bases: Vec<String>,
    /// Class header (decorators, `class` line, docstring).
    pub declaration_text: String,
    pub constructor_text: Option<String>,
    pub method_names: Vec<String>,
    pub line_span: LineSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramModel {
    pub module_path: PathBuf,
    pub classes: Vec<ClassRecord>,
    pub methods: Vec<MethodRecord>,
    #[serde(skip)]
    pub source_text: String,
}

impl ProgramModel {
    pub fn method(&self, qualified_name: &str) -> Option<&MethodRecord> {
        self.methods.iter().find(|m| m.qualified_name == qualified_name)
    }

    pub fn class(&self, qualified_name: &str) -> Option<&ClassRecord> {
        self.classes.iter().find(|c| c.qualified_name == qualified_name)
    }

    /// Finds the method owning `branch_id`.
    pub fn branch(&self, branch_id: &str) -> Option<(&MethodRecord, &BranchSite)> {
        self.methods.iter().find_map(|m| m.branch(branch_id).map(|b| (m, b)))
    }

    /// Module name used in `import` statements of generated tests.
    pub fn module_name(&self) -> String {
        self.module_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "module".to_string())
    }

    /// Table consumed by the test runner to map executed arcs onto branch
    /// outcomes.
    pub fn branch_map(&self) -> BranchMap {
        let branches = self
            .methods
            .iter()
            .flat_map(|m| {
                m.branch_sites.iter().map(move |b| BranchMapEntry {
                    branch_id: b.branch_id.clone(),
                    method: m.qualified_name.clone(),
                    kind: b.kind,
                    line: b.line,
                    true_target_line: b.true_target_line,
                    false_target_line: b.false_target_line,
                })
            })
            .collect();
        BranchMap { module_path: self.module_path.clone(), branches }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchMapEntry {
    pub branch_id: String,
    pub method: String,
    pub kind: BranchKind,
    pub line: usize,
    pub true_target_line: usize,
    pub false_target_line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchMap {
    pub module_path: PathBuf,
    pub branches: Vec<BranchMapEntry>,
}

/// Parses a Python module.
pub fn parse_module(source_text: &str, module_path: impl AsRef<Path>) -> Result<ProgramModel, ModelError> {
    frontend::build(source_text, module_path.as_ref())
}

/// Whether `source` parses as a Python module.
pub fn is_valid_python(source: &str) -> bool {
    frontend::parse_suite(source, "<check>").is_ok()
}

/// Whether `source` parses and defines at least one function whose name
/// starts with `test` (module level or inside a class).
pub fn defines_test_function(source: &str) -> Option<bool> {
    frontend::parse_suite(source, "<check>")
        .ok()
        .map(|suite| frontend::function_names(&suite).iter().any(|n| n.starts_with("test")))
}
