//! Branch dependency analysis and hard-to-cover classification.
//!
//! For each branch condition of a target method we collect the in-module
//! methods that can decide its outcome: methods called in the condition,
//! methods whose results are assigned to condition variables, and
//! (recursively, up to a depth bound) the methods feeding those methods'
//! return values. Assignments are matched flow-insensitively: every
//! assignment to a variable in the method body counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BranchSite, MethodRecord, ProgramModel};

pub const DEFAULT_DEPTH_BOUND: usize = 3;

/// Annotation names treated as primitive when deciding whether a type test
/// involves a complex object.
const PRIMITIVE_ANNOTATIONS: [&str; 8] = ["int", "float", "str", "bool", "bytes", "complex", "None", "object"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DepsError {
    #[error("target `{0}` is not a method of the module")]
    TargetNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencySet {
    pub target: String,
    /// Union of `per_branch`, in discovery order.
    pub methods: Vec<String>,
    pub per_branch: BTreeMap<String, Vec<String>>,
    /// Condition variables that are neither parameters nor assigned in the
    /// target, such as module globals. Their definitions are not followed.
    #[serde(default)]
    pub unanalyzed: Vec<String>,
}

impl DependencySet {
    pub fn empty(target: &str) -> Self {
        Self { target: target.to_string(), methods: Vec::new(), per_branch: BTreeMap::new(), unanalyzed: Vec::new() }
    }

    pub fn for_branch(&self, branch_id: &str) -> &[String] {
        self.per_branch.get(branch_id).map(Vec::as_slice).unwrap_or_default()
    }
}

pub fn analyze_dependencies(
    model: &ProgramModel,
    target: &str,
    depth_bound: usize,
) -> Result<DependencySet, DepsError> {
    let method = model.method(target).ok_or_else(|| DepsError::TargetNotFound(target.to_string()))?;
    let mut set = DependencySet::empty(target);
    for branch in &method.branch_sites {
        let found = branch_dependencies(model, method, branch, depth_bound);
        for m in &found {
            if !set.methods.contains(m) {
                set.methods.push(m.clone());
            }
        }
        set.per_branch.insert(branch.branch_id.clone(), found);
        for v in unanalyzed_variables(method, branch) {
            if !set.unanalyzed.contains(&v) {
                set.unanalyzed.push(v);
            }
        }
    }
    Ok(set)
}

fn unanalyzed_variables(method: &MethodRecord, branch: &BranchSite) -> Vec<String> {
    let local = |v: &str| {
        let root = v.split('.').next().unwrap_or(v);
        method.receiver.as_deref() == Some(root)
            || method.parameters.iter().any(|p| p.name == root)
            || method.assignments.iter().any(|a| a.target_variable == v || a.target_variable == root)
    };
    branch.referenced_variables.iter().filter(|v| !local(v)).cloned().collect()
}

fn push_new(found: &mut Vec<String>, fresh: &mut Vec<String>, methods: &[String]) {
    for m in methods {
        if !found.contains(m) {
            found.push(m.clone());
            fresh.push(m.clone());
        }
    }
}

/// Follows assignments to `seed` variables inside `method`, transitively
/// through the right-hand sides' own variables, adding the methods they call.
fn follow_assignments(method: &MethodRecord, seed: &[String], found: &mut Vec<String>, fresh: &mut Vec<String>) {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut work: Vec<&str> = seed.iter().map(String::as_str).collect();
    while let Some(var) = work.pop() {
        if !seen.insert(var) {
            continue;
        }
        for a in method.assignments.iter().filter(|a| a.target_variable == var) {
            push_new(found, fresh, &a.rhs_resolved_methods);
            work.extend(a.rhs_variables.iter().map(String::as_str));
        }
    }
}

fn branch_dependencies(
    model: &ProgramModel,
    method: &MethodRecord,
    branch: &BranchSite,
    depth_bound: usize,
) -> Vec<String> {
    let mut found = Vec::new();
    if depth_bound == 0 {
        return found;
    }
    let mut frontier = Vec::new();
    push_new(&mut found, &mut frontier, &branch.resolved_methods);
    follow_assignments(method, &branch.referenced_variables, &mut found, &mut frontier);

    let mut expanded: BTreeSet<String> = BTreeSet::new();
    for _ in 1..depth_bound {
        let mut next = Vec::new();
        for name in std::mem::take(&mut frontier) {
            if !expanded.insert(name.clone()) {
                continue;
            }
            let Some(callee) = model.method(&name) else { continue };
            for ret in &callee.returns {
                push_new(&mut found, &mut next, &ret.resolved_methods);
                follow_assignments(callee, &ret.variables, &mut found, &mut next);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKindClass {
    Easy,
    ComplexDependency,
    ComplexObject,
    Both,
}

impl BranchKindClass {
    fn from_flags(dependency: bool, object: bool) -> Self {
        match (dependency, object) {
            (false, false) => Self::Easy,
            (true, false) => Self::ComplexDependency,
            (false, true) => Self::ComplexObject,
            (true, true) => Self::Both,
        }
    }

    pub fn needs_dependencies(self) -> bool {
        matches!(self, Self::ComplexDependency | Self::Both)
    }

    pub fn needs_object_construction(self) -> bool {
        matches!(self, Self::ComplexObject | Self::Both)
    }

    pub fn is_hard(self) -> bool {
        self != Self::Easy
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchClass {
    pub branch_id: String,
    pub kind: BranchKindClass,
}

fn is_primitive(annotation: &str) -> bool {
    let a = annotation.trim().trim_matches(|c| c == '"' || c == '\'');
    PRIMITIVE_ANNOTATIONS.contains(&a)
}

/// Whether the condition type-tests a parameter annotated with a
/// non-primitive type.
fn type_tests_complex_parameter(method: &MethodRecord, branch: &BranchSite) -> bool {
    branch.type_tested_variables.iter().any(|v| {
        method
            .explicit_parameters()
            .find(|p| &p.name == v)
            .and_then(|p| p.annotation.as_deref())
            .is_some_and(|a| !is_primitive(a))
    })
}

pub fn classify_branch(method: &MethodRecord, branch: &BranchSite, depset: &DependencySet) -> BranchClass {
    let dependency = !depset.for_branch(&branch.branch_id).is_empty();
    let object = branch.dereferences_parameter_attribute || type_tests_complex_parameter(method, branch);
    BranchClass { branch_id: branch.branch_id.clone(), kind: BranchKindClass::from_flags(dependency, object) }
}

pub fn classify_method(method: &MethodRecord, depset: &DependencySet) -> Vec<BranchClass> {
    method.branch_sites.iter().map(|b| classify_branch(method, b, depset)).collect()
}

/// Which analyses feed the prompt context for a target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPolicy {
    pub include_sequence: bool,
    pub include_dependencies: bool,
}

impl ContextPolicy {
    pub fn full() -> Self {
        Self { include_sequence: true, include_dependencies: true }
    }

    /// Combines the classes of the branches still to be covered.
    pub fn from_classes<'a>(classes: impl IntoIterator<Item = &'a BranchClass>) -> Self {
        classes.into_iter().fold(Self::default(), |acc, c| Self {
            include_sequence: acc.include_sequence || c.kind.needs_object_construction(),
            include_dependencies: acc.include_dependencies || c.kind.needs_dependencies(),
        })
    }
}

/// Fraction of the model's branch sites classified as hard to cover.
pub fn hard_to_cover_fraction(model: &ProgramModel, depth_bound: usize) -> f64 {
    let mut total = 0usize;
    let mut hard = 0usize;
    for m in &model.methods {
        let depset = analyze_dependencies(model, &m.qualified_name, depth_bound).expect("method exists");
        for class in classify_method(m, &depset) {
            total += 1;
            hard += usize::from(class.kind.is_hard());
        }
    }
    if total == 0 {
        0.0
    } else {
        hard as f64 / total as f64
    }
}
