//! Undirected graphs from edge-list files and their structure vectors.
//!
//! Edge-list format: one `u v` pair per line, whitespace separated. Lines
//! starting with `#` are comments; a `# nodes: N` comment fixes the node
//! count (otherwise it is one past the largest endpoint).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::bits::{BitVector, Label, StructureVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    /// Sorted `(u, v)` pairs with `u < v`.
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(num_nodes: usize) -> Self {
        Self { num_nodes, edges: BTreeSet::new(), adjacency: vec![BTreeSet::new(); num_nodes] }
    }

    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(num_nodes);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Adds `{u, v}`; returns false if it was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        if u == v {
            return Err(Error::OutOfRange(format!("self-loop on node {u}")));
        }
        for x in [u, v] {
            if x >= self.num_nodes {
                return Err(Error::OutOfRange(format!("endpoint {x} >= node count {}", self.num_nodes)));
            }
        }
        let key = (u.min(v), u.max(v));
        if !self.edges.insert(key) {
            return Ok(false);
        }
        self.adjacency[u].insert(v);
        self.adjacency[v].insert(u);
        Ok(true)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[u].iter().copied()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn nodes_header(comment: &str) -> Option<&str> {
    let body = comment.trim_start_matches('#').trim();
    let (key, value) = body.split_once(':')?;
    key.trim().eq_ignore_ascii_case("nodes").then(|| value.trim())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    parse_graph(&text, path)
}

pub fn parse_graph(text: &str, path: &Path) -> Result<Graph> {
    let mut declared = None;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = nodes_header(line) {
                declared = Some(v.parse::<usize>().map_err(|_| parse_err(path, lineno, format!("bad node count `{v}`")))?);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(path, lineno, format!("expected `u v`, got `{line}`")));
        };
        let u: usize = a.parse().map_err(|_| parse_err(path, lineno, format!("bad node id `{a}`")))?;
        let v: usize = b.parse().map_err(|_| parse_err(path, lineno, format!("bad node id `{b}`")))?;
        if u == v {
            return Err(parse_err(path, lineno, format!("self-loop on node {u}")));
        }
        pairs.push((lineno, u, v));
    }
    let inferred = pairs.iter().map(|&(_, u, v)| u.max(v) + 1).max().unwrap_or(0);
    let num_nodes = declared.unwrap_or(inferred);
    let mut g = Graph::new(num_nodes);
    for (lineno, u, v) in pairs {
        if u.max(v) >= num_nodes {
            return Err(parse_err(path, lineno, format!("endpoint {} out of range for {num_nodes} nodes", u.max(v))));
        }
        g.add_edge(u, v)?;
    }
    Ok(g)
}

/// Row `u` of the adjacency matrix without the diagonal entry: bit `j` is
/// the edge to the `j`-th other node in ascending id order.
pub fn structure_vector_for_node(g: &Graph, u: usize) -> Result<StructureVector> {
    let n = g.num_nodes();
    if u >= n {
        return Err(Error::OutOfRange(format!("node {u} >= node count {n}")));
    }
    let mut bits = BitVector::zeros(n - 1);
    for v in g.neighbors(u) {
        bits.set(if v < u { v } else { v - 1 }, true);
    }
    Ok(StructureVector::new(bits))
}

/// Node id for bit `j` of node `u`'s row.
pub fn node_for_bit(u: usize, j: usize) -> usize {
    if j < u {
        j
    } else {
        j + 1
    }
}

/// Upper triangle of the adjacency matrix, pairs `(i, j)` with `i < j` in
/// lexicographic order.
pub fn structure_vector_for_graph(g: &Graph) -> StructureVector {
    let n = g.num_nodes();
    let mut bits = BitVector::zeros(n * n.saturating_sub(1) / 2);
    for (u, v) in g.edges() {
        bits.set(pair_index(n, u, v), true);
    }
    StructureVector::new(bits)
}

/// Position of pair `(i, j)`, `i < j`, in the upper-triangle order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Recovers the graph from an upper-triangle structure vector.
pub fn graph_from_structure_vector(s: &StructureVector) -> Result<Graph> {
    let len = s.dim();
    // Solve n(n-1)/2 = len.
    let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    if n * n.saturating_sub(1) / 2 != len {
        return Err(Error::OutOfRange(format!("{len} is not a triangular number of node pairs")));
    }
    let mut g = Graph::new(n);
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            if s.get(idx) {
                g.add_edge(i, j)?;
            }
            idx += 1;
        }
    }
    Ok(g)
}

/// Reads `id label` lines (with `#` comments) into a dense vector.
pub fn load_labels(path: impl AsRef<Path>, num_nodes: usize) -> Result<Vec<Option<Label>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut out = vec![None; num_nodes];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(path, i + 1, format!("expected `id label`, got `{line}`")));
        };
        let id: usize = a.parse().map_err(|_| parse_err(path, i + 1, format!("bad id `{a}`")))?;
        let label: u32 = b.parse().map_err(|_| parse_err(path, i + 1, format!("bad label `{b}`")))?;
        if id >= num_nodes {
            return Err(parse_err(path, i + 1, format!("id {id} out of range for {num_nodes} items")));
        }
        out[id] = Some(Label(label));
    }
    Ok(out)
}

/// Reads one id per line (with `#` comments).
pub fn load_ids(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|_| parse_err(path, i + 1, format!("bad id `{line}`")))?);
    }
    Ok(out)
}
