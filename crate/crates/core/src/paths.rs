//! Invocation sequences ending at a target method.
//!
//! Sequences are simple call-graph paths from an entry node (a method with
//! no in-module callers) to the target. Traversal that would revisit a node
//! on the current path stops there, so cycles never produce infinite paths.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::callgraph::CallGraph;

/// Enumeration stops after this many paths for one target.
pub const MAX_PATHS_PER_TARGET: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("target `{0}` is not a node of the call graph")]
    TargetNotInGraph(String),
}

/// Entry method first, target last. Serialized as an array of names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InvocationSequence {
    methods: Vec<String>,
}

impl InvocationSequence {
    pub fn new(methods: Vec<String>) -> Self {
        assert!(!methods.is_empty(), "an invocation sequence has at least one method");
        Self { methods }
    }

    pub fn singleton(target: &str) -> Self {
        Self { methods: vec![target.to_string()] }
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn entry(&self) -> &str {
        &self.methods[0]
    }

    pub fn target(&self) -> &str {
        self.methods.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_singleton(&self) -> bool {
        self.methods.len() == 1
    }

    /// Methods before the target.
    pub fn callers(&self) -> &[String] {
        &self.methods[..self.methods.len() - 1]
    }

    fn joined(&self) -> String {
        self.methods.join("->")
    }

    /// Checks the path against `graph`: consecutive edges, no repeats.
    pub fn is_valid_in(&self, graph: &CallGraph) -> bool {
        let distinct: BTreeSet<&String> = self.methods.iter().collect();
        distinct.len() == self.methods.len()
            && self.methods.iter().all(|m| graph.contains(m))
            && self.methods.windows(2).all(|w| graph.has_edge(&w[0], &w[1]))
    }
}

impl fmt::Display for InvocationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.methods.join(" -> "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub sequences: Vec<InvocationSequence>,
    /// Set when enumeration hit the path limit.
    pub truncated: bool,
}

pub fn extract_sequences(
    graph: &CallGraph,
    target: &str,
    target_is_public: bool,
) -> Result<Vec<InvocationSequence>, PathError> {
    extract_sequences_bounded(graph, target, target_is_public, MAX_PATHS_PER_TARGET).map(|e| e.sequences)
}

/// Every simple path from an entry node to `target`, in entry order then DFS
/// order, followed by `[target]` when the target is public (unless it is
/// itself an entry node, in which case `[target]` is already present).
pub fn extract_sequences_bounded(
    graph: &CallGraph,
    target: &str,
    target_is_public: bool,
    limit: usize,
) -> Result<Extraction, PathError> {
    if !graph.contains(target) {
        return Err(PathError::TargetNotInGraph(target.to_string()));
    }
    let adjacency = graph.adjacency();
    let mut search =
        Dfs { adjacency: &adjacency, target, limit, path: Vec::new(), found: Vec::new(), truncated: false };
    for entry in graph.entry_nodes() {
        if search.truncated {
            break;
        }
        search.visit(graph.nodes().get(&entry).expect("entry is a node"));
    }
    if search.truncated {
        warn!(target, limit, "invocation sequence enumeration truncated");
    }
    let mut sequences: Vec<InvocationSequence> = search
        .found
        .into_iter()
        .map(|p| InvocationSequence::new(p.into_iter().map(str::to_string).collect()))
        .collect();
    let singleton = InvocationSequence::singleton(target);
    if target_is_public && !sequences.contains(&singleton) {
        sequences.push(singleton);
    }
    Ok(Extraction { sequences, truncated: search.truncated })
}

struct Dfs<'g> {
    adjacency: &'g std::collections::BTreeMap<&'g str, Vec<&'g str>>,
    target: &'g str,
    limit: usize,
    path: Vec<&'g str>,
    found: Vec<Vec<&'g str>>,
    truncated: bool,
}

impl<'g> Dfs<'g> {
    fn visit(&mut self, node: &'g str) {
        if self.truncated {
            return;
        }
        self.path.push(node);
        if node == self.target {
            if self.found.len() >= self.limit {
                self.truncated = true;
            } else {
                self.found.push(self.path.clone());
            }
        } else {
            for &next in &self.adjacency[node] {
                // cycle: stop this branch
                if self.path.contains(&next) {
                    continue;
                }
                self.visit(next);
            }
        }
        self.path.pop();
    }
}

/// Keeps one sequence per entry: the shortest, ties broken by the
/// lexicographically smallest joined name list. Entries keep their first
/// appearance order.
pub fn filter_shortest(sequences: &[InvocationSequence]) -> Vec<InvocationSequence> {
    let mut kept: Vec<InvocationSequence> = Vec::new();
    for seq in sequences {
        match kept.iter_mut().find(|k| k.entry() == seq.entry()) {
            Some(current) => {
                let better = (seq.len(), seq.joined()) < (current.len(), current.joined());
                if better {
                    *current = seq.clone();
                }
            }
            None => kept.push(seq.clone()),
        }
    }
    kept
}
