//! Connected undirected communication graphs.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sim::rng::derive_seed;

pub type NodeId = u32;

/// Attempts `random_multihop` makes before giving up.
pub const RANDOM_RETRY_BUDGET: u64 = 64;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("no connected graph with min degree >= 1 after {attempts} attempts (n={n}, p={p})")]
    GenerationFailed { n: usize, p: f64, attempts: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("node {0} has no neighbors")]
    IsolatedNode(NodeId),
    #[error("designated node {0} is out of range")]
    InvalidDesignated(NodeId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable graph over dense ids `0..n`.
///
/// Every constructor validates: connected, symmetric, irreflexive, and every
/// node has at least one neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
    designated: Option<NodeId>,
}

impl Topology {
    /// Build from an edge list. Duplicate edges collapse; self-loops are rejected.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        designated: Option<NodeId>,
    ) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::InvalidSize(format!("need at least 2 nodes, got {n}")));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u == v {
                return Err(TopologyError::Parse { line: 0, msg: format!("self-loop on {u}") });
            }
            if u as usize >= n || v as usize >= n {
                return Err(TopologyError::InvalidSize(format!("edge ({u},{v}) outside 0..{n}")));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for row in &mut adjacency {
            row.sort_unstable();
            row.dedup();
        }
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        let topology = Topology { adjacency, edge_count, designated };
        topology.validate()?;
        Ok(topology)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        if let Some(w) = self.designated {
            if w as usize >= self.node_count() {
                return Err(TopologyError::InvalidDesignated(w));
            }
        }
        if let Some(u) = self.adjacency.iter().position(Vec::is_empty) {
            return Err(TopologyError::IsolatedNode(u as NodeId));
        }
        if !self.is_connected() {
            return Err(TopologyError::DisconnectedGraph);
        }
        Ok(())
    }

    /// Complete graph on `n >= 2` nodes.
    pub fn clique(n: usize) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::InvalidSize(format!("clique needs n >= 2, got {n}")));
        }
        let adjacency = (0..n)
            .map(|u| (0..n as NodeId).filter(|&v| v as usize != u).collect())
            .collect();
        let topology = Topology { adjacency, edge_count: n * (n - 1) / 2, designated: None };
        topology.validate()?;
        Ok(topology)
    }

    /// Star with node 0 as the designated center.
    pub fn star(leaves: usize) -> Result<Self, TopologyError> {
        if leaves < 1 {
            return Err(TopologyError::InvalidSize("star needs at least one leaf".into()));
        }
        let edges = (1..=leaves as NodeId).map(|v| (0, v));
        Self::from_edges(leaves + 1, edges, Some(0))
    }

    /// Erdős–Rényi G(n, p) conditioned on connectivity. Attempt `k` draws its
    /// edges from `derive_seed(seed, k)`.
    pub fn random_multihop(n: usize, edge_prob: f64, seed: u64) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::InvalidSize(format!("need n >= 2, got {n}")));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(TopologyError::InvalidSize(format!("edge_prob {edge_prob} not in (0, 1]")));
        }
        for attempt in 0..RANDOM_RETRY_BUDGET {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
            let mut edges = Vec::new();
            for u in 0..n as NodeId {
                for v in (u + 1)..n as NodeId {
                    if rng.gen_bool(edge_prob) {
                        edges.push((u, v));
                    }
                }
            }
            match Self::from_edges(n, edges, None) {
                Ok(t) => return Ok(t),
                Err(TopologyError::IsolatedNode(_) | TopologyError::DisconnectedGraph) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(TopologyError::GenerationFailed { n, p: edge_prob, attempts: RANDOM_RETRY_BUDGET })
    }

    /// Parse the edge-list format: one `u v` pair per line, blank lines
    /// ignored, and an optional `# designated w` header. Other `#` lines are
    /// comments. Node count is one past the largest id mentioned.
    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        let mut designated = None;
        let mut max_id: Option<NodeId> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut words = rest.split_whitespace();
                if words.next() == Some("designated") {
                    let w = words
                        .next()
                        .ok_or_else(|| parse_err(line_no, "missing designated id"))?
                        .parse::<NodeId>()
                        .map_err(|e| parse_err(line_no, &e.to_string()))?;
                    designated = Some(w);
                    max_id = max_id.max(Some(w));
                }
                continue;
            }
            let mut words = line.split_whitespace();
            let mut next_id = || -> Result<NodeId, TopologyError> {
                words
                    .next()
                    .ok_or_else(|| parse_err(line_no, "expected two node ids"))?
                    .parse::<NodeId>()
                    .map_err(|e| parse_err(line_no, &e.to_string()))
            };
            let (u, v) = (next_id()?, next_id()?);
            if words.next().is_some() {
                return Err(parse_err(line_no, "trailing tokens"));
            }
            if u == v {
                return Err(parse_err(line_no, "self-loop"));
            }
            max_id = max_id.max(Some(u.max(v)));
            edges.push((u, v));
        }
        let n = max_id.map_or(0, |m| m as usize + 1);
        Self::from_edges(n, edges, designated)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list(&text)
    }

    /// Serialize in the edge-list format accepted by [`Topology::parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        if let Some(w) = self.designated {
            let _ = writeln!(out, "# designated {w}");
        }
        for (u, row) in self.adjacency.iter().enumerate() {
            for &v in row.iter().filter(|&&v| v as usize > u) {
                let _ = writeln!(out, "{u} {v}");
            }
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), TopologyError> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn with_designated(mut self, w: NodeId) -> Result<Self, TopologyError> {
        if w as usize >= self.node_count() {
            return Err(TopologyError::InvalidDesignated(w));
        }
        self.designated = Some(w);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u as usize]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn designated(&self) -> Option<NodeId> {
        self.designated
    }

    pub fn is_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u as usize].binary_search(&v).is_ok()
    }

    /// Every pair of distinct nodes is adjacent (single-hop).
    pub fn is_complete(&self) -> bool {
        let n = self.node_count();
        self.edge_count == n * (n - 1) / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, row)| {
            row.iter().filter(move |&&v| v as usize > u).map(move |&v| (u as NodeId, v))
        })
    }

    fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0 as NodeId]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    visited += 1;
                    queue.push_back(v);
                }
            }
        }
        visited == n
    }
}

fn parse_err(line: usize, msg: &str) -> TopologyError {
    TopologyError::Parse { line, msg: msg.to_string() }
}
