//! Coverage-guided, analysis-enhanced LLM test generation for Python modules.
//!
//! The pipeline: parse a module into a [`model::ProgramModel`], build its
//! [`callgraph::CallGraph`], extract invocation sequences
//! ([`paths`]) and branch dependency sets ([`deps`]) for methods with
//! uncovered branches, sample counter-example tests ([`sampler`]), assemble
//! prompts ([`prompt`]), query a chat endpoint ([`llm`]) and feed executed
//! tests back into the pool ([`session`]).

pub mod callgraph;
pub mod coverage;
pub mod deps;
pub mod llm;
pub mod model;
pub mod paths;
pub mod prompt;
pub mod sampler;
pub mod session;

pub use callgraph::{build_call_graph, CallGraph};
pub use coverage::{Arm, BranchOutcomeId, CoverageReport, MethodCoverage, WireReport};
pub use deps::{analyze_dependencies, classify_branch, BranchClass, BranchKindClass, DependencySet};
pub use model::{parse_module, BranchMap, ModelError, ProgramModel};
pub use paths::{extract_sequences, filter_shortest, InvocationSequence};
pub use prompt::{build_bundle, PromptBundle};
pub use sampler::{candidates_for, sample, Origin, TestCase};
pub use session::{run_session, SessionConfig, SessionReport};
