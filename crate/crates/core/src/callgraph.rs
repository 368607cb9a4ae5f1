//! Directed method-invocation graph of a single module.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ProgramModel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge {0} -> {1} references a node outside the graph")]
    DanglingEdge(String, String),
}

/// Nodes are qualified method names. Edges are deduplicated; self-loops are
/// kept (recursion) and reported by [`CallGraph::self_loops`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl CallGraph {
    pub fn from_parts<N, E>(nodes: N, edges: E) -> Result<Self, GraphError>
    where
        N: IntoIterator<Item = String>,
        E: IntoIterator<Item = (String, String)>,
    {
        let nodes: BTreeSet<String> = nodes.into_iter().collect();
        let edges: BTreeSet<(String, String)> = edges.into_iter().collect();
        if let Some((a, b)) = edges.iter().find(|(a, b)| !nodes.contains(a) || !nodes.contains(b)) {
            return Err(GraphError::DanglingEdge(a.clone(), b.clone()));
        }
        Ok(Self { nodes, edges })
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_string(), to.to_string()))
    }

    pub fn successors<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |(a, _)| a == node).map(|(_, b)| b.as_str())
    }

    pub fn in_degree(&self, node: &str) -> usize {
        self.edges.iter().filter(|(_, b)| b == node).count()
    }

    /// Sorted adjacency lists, one entry per node.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (a, b) in &self.edges {
            adj.get_mut(a.as_str()).expect("edge endpoints are nodes").push(b.as_str());
        }
        adj
    }

    pub fn self_loops(&self) -> Vec<&str> {
        self.edges.iter().filter(|(a, b)| a == b).map(|(a, _)| a.as_str()).collect()
    }

    /// Nodes without callers.
    pub fn entry_nodes(&self) -> BTreeSet<String> {
        let called: BTreeSet<&str> = self.edges.iter().map(|(_, b)| b.as_str()).collect();
        self.nodes.iter().filter(|n| !called.contains(n.as_str())).cloned().collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "    {n:?};");
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "    {a:?} -> {b:?};");
        }
        out.push('}');
        out.push('\n');
        out
    }
}

pub fn build_call_graph(model: &ProgramModel) -> CallGraph {
    let nodes = model.methods.iter().map(|m| m.qualified_name.clone());
    let edges = model.methods.iter().flat_map(|m| {
        m.call_sites.iter().filter_map(|c| c.resolved_callee.clone()).map(|callee| (m.qualified_name.clone(), callee))
    });
    CallGraph::from_parts(nodes, edges).expect("resolved callees name methods of the same model")
}

pub fn entry_nodes(graph: &CallGraph) -> BTreeSet<String> {
    graph.entry_nodes()
}
