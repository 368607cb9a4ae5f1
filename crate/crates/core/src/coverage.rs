//! Branch coverage bookkeeping.
//!
//! Coverage is counted per outcome arm: every branch site contributes a true
//! and a false outcome. Reports arrive from the test runner over a small JSON
//! wire format (see [`WireReport`]) and are normalized into [`CoverageReport`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ProgramModel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoverageError {
    #[error("method `{0}` not found in the program model")]
    MethodNotFound(String),
    #[error("inconsistent coverage report `{test_id}`: {reason}")]
    InvalidReport { test_id: String, reason: &'static str },
}

/// Which arm of a branch site was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "T")]
    True,
    #[serde(rename = "F")]
    False,
}

impl Arm {
    pub fn symbol(self) -> &'static str {
        match self {
            Arm::True => "T",
            Arm::False => "F",
        }
    }
}

/// One arm of one branch site. Serialized as `[branch_id, "T"|"F"]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, Arm)", into = "(String, Arm)")]
pub struct BranchOutcomeId {
    pub branch_id: String,
    pub arm: Arm,
}

impl BranchOutcomeId {
    pub fn new(branch_id: impl Into<String>, arm: Arm) -> Self {
        Self { branch_id: branch_id.into(), arm }
    }

    pub fn pair(branch_id: &str) -> [BranchOutcomeId; 2] {
        [Self::new(branch_id, Arm::True), Self::new(branch_id, Arm::False)]
    }
}

impl From<(String, Arm)> for BranchOutcomeId {
    fn from((branch_id, arm): (String, Arm)) -> Self {
        Self { branch_id, arm }
    }
}

impl From<BranchOutcomeId> for (String, Arm) {
    fn from(id: BranchOutcomeId) -> Self {
        (id.branch_id, id.arm)
    }
}

impl fmt::Display for BranchOutcomeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.branch_id, self.arm.symbol())
    }
}

/// The runner's per-test result as it travels over the wire.
///
/// `invoked` is optional: when the runner cannot trace entered methods the
/// field is omitted and [`CoverageReport::from_wire`] falls back to a static
/// scan of the test source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireReport {
    pub test_id: String,
    pub syntactically_valid: bool,
    pub execution_passed: bool,
    #[serde(default)]
    pub covered: Vec<BranchOutcomeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invoked: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub test_id: String,
    pub covered_outcomes: BTreeSet<BranchOutcomeId>,
    pub invoked_methods: BTreeSet<String>,
    pub syntactically_valid: bool,
    pub execution_passed: bool,
}

impl CoverageReport {
    /// A report for a test that never produced coverage (e.g. it did not parse).
    pub fn empty(test_id: impl Into<String>, syntactically_valid: bool) -> Self {
        Self {
            test_id: test_id.into(),
            covered_outcomes: BTreeSet::new(),
            invoked_methods: BTreeSet::new(),
            syntactically_valid,
            execution_passed: false,
        }
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        let bad = |reason| Err(CoverageError::InvalidReport { test_id: self.test_id.clone(), reason });
        if !self.covered_outcomes.is_empty() && !self.syntactically_valid {
            return bad("coverage reported for a syntactically invalid test");
        }
        if self.execution_passed && !self.syntactically_valid {
            return bad("execution passed for a syntactically invalid test");
        }
        Ok(())
    }

    /// Normalizes a wire report. Outcomes for branch ids unknown to `model`
    /// are dropped; a missing `invoked` list is replaced by a name scan of
    /// `test_source`.
    pub fn from_wire(wire: WireReport, model: &ProgramModel, test_source: &str) -> Result<Self, CoverageError> {
        let known: BTreeSet<&str> =
            model.methods.iter().flat_map(|m| m.branch_sites.iter().map(|b| b.branch_id.as_str())).collect();
        let covered_outcomes = wire.covered.into_iter().filter(|o| known.contains(o.branch_id.as_str())).collect();
        let invoked_methods = match wire.invoked {
            Some(names) => names.into_iter().filter(|n| model.method(n).is_some()).collect(),
            None => static_invoked_methods(model, test_source),
        };
        let report = Self {
            test_id: wire.test_id,
            covered_outcomes,
            invoked_methods,
            syntactically_valid: wire.syntactically_valid,
            execution_passed: wire.execution_passed,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn to_wire(&self) -> WireReport {
        WireReport {
            test_id: self.test_id.clone(),
            syntactically_valid: self.syntactically_valid,
            execution_passed: self.execution_passed,
            covered: self.covered_outcomes.iter().cloned().collect(),
            invoked: Some(self.invoked_methods.iter().cloned().collect()),
        }
    }
}

/// Methods whose simple name occurs as a whole word in `test_source`.
pub fn static_invoked_methods(model: &ProgramModel, test_source: &str) -> BTreeSet<String> {
    let words: BTreeSet<&str> =
        test_source.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|w| !w.is_empty()).collect();
    model
        .methods
        .iter()
        .filter(|m| {
            let simple = m.simple_name();
            // constructors are entered through the class name
            if simple == "__init__" {
                m.class_name.as_deref().is_some_and(|c| words.contains(c.rsplit('.').next().unwrap_or(c)))
            } else {
                words.contains(simple)
            }
        })
        .map(|m| m.qualified_name.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: String,
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
}

impl MethodCoverage {
    pub fn is_complete(&self) -> bool {
        self.covered == self.total
    }
}

pub fn merge<'a, I>(reports: I) -> BTreeSet<BranchOutcomeId>
where
    I: IntoIterator<Item = &'a CoverageReport>,
{
    let mut out = BTreeSet::new();
    for r in reports {
        out.extend(r.covered_outcomes.iter().cloned());
    }
    out
}

/// Coverage of a single method against an already merged outcome set.
pub fn method_coverage_in(
    method: &str,
    model: &ProgramModel,
    covered: &BTreeSet<BranchOutcomeId>,
) -> Result<MethodCoverage, CoverageError> {
    let record = model.method(method).ok_or_else(|| CoverageError::MethodNotFound(method.to_string()))?;
    let total = 2 * record.branch_sites.len();
    let hit = record.outcome_ids().filter(|o| covered.contains(o)).count();
    let ratio = if total == 0 { 0.0 } else { hit as f64 / total as f64 };
    Ok(MethodCoverage { method: method.to_string(), covered: hit, total, ratio })
}

pub fn method_coverage(
    method: &str,
    model: &ProgramModel,
    pool: &[CoverageReport],
) -> Result<MethodCoverage, CoverageError> {
    method_coverage_in(method, model, &merge(pool))
}

/// Methods that still have an uncovered outcome, least covered first.
/// Ties are broken by qualified name.
pub fn rank_targets_ascending(model: &ProgramModel, covered: &BTreeSet<BranchOutcomeId>) -> Vec<String> {
    let mut open: Vec<MethodCoverage> = model
        .methods
        .iter()
        .filter_map(|m| method_coverage_in(&m.qualified_name, model, covered).ok())
        .filter(|c| c.total > 0 && !c.is_complete())
        .collect();
    open.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then_with(|| a.method.cmp(&b.method)));
    open.into_iter().map(|c| c.method).collect()
}

/// Every outcome the model defines.
pub fn all_outcomes(model: &ProgramModel) -> BTreeSet<BranchOutcomeId> {
    model.methods.iter().flat_map(|m| m.outcome_ids()).collect()
}

/// Fraction of the model's outcomes contained in `covered` (0 for a model
/// without branches).
pub fn branch_coverage_ratio(model: &ProgramModel, covered: &BTreeSet<BranchOutcomeId>) -> f64 {
    let all = all_outcomes(model);
    if all.is_empty() {
        return 0.0;
    }
    all.intersection(covered).count() as f64 / all.len() as f64
}
