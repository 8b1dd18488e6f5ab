//! Undirected graph stored in CSR form with self-loops already added, the
//! representation every propagation operator in this crate normalizes.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};

/// CSR adjacency of the self-augmented graph: each row lists the node's
/// neighbors plus the node itself, sorted and deduplicated. Immutable after
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds from an undirected edge list over nodes `0..n`. Duplicate
    /// edges, reversed duplicates and explicit self-loops collapse; a
    /// self-loop per node is always present in the result.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::EdgeOutOfRange { i, j, n });
            }
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        row_offsets.push(0);
        for neighbors in &mut adj {
            neighbors.sort_unstable();
            neighbors.dedup();
            degrees.push(neighbors.len());
            col_indices.extend_from_slice(neighbors);
            row_offsets.push(col_indices.len());
        }
        let m = (col_indices.len() - n) / 2;
        Ok(Graph {
            n,
            m,
            row_offsets,
            col_indices,
            degrees,
        })
    }

    /// Parses a plain-text edge list: one `i j` pair per line, `#` starts a
    /// comment, blank lines ignored.
    pub fn from_edge_list_file(path: &Path, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let edges = parse_edge_list(&text, path)?;
        Graph::from_edges(&edges, n)
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected non-loop edges.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Neighbors of `i` in the self-augmented graph (always contains `i`).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Position of row `i` inside the flat CSR arrays, for structures that
    /// store per-entry values aligned with the adjacency.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Degree in the self-augmented graph: neighbor count plus one for the
    /// self-loop. Equals the CSR row length by construction.
    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Sum of self-augmented degrees, `2m + n`.
    pub fn degree_sum(&self) -> f64 {
        self.degrees.iter().sum::<usize>() as f64
    }

    /// Fraction of possible directed pairs that carry an edge, `2m / n^2`.
    pub fn edge_density(&self) -> f64 {
        (2 * self.m) as f64 / (self.n * self.n) as f64
    }

    /// Component label per node. Labels are assigned in increasing order of
    /// each component's smallest node index, so the labeling is canonical.
    pub fn connected_components(&self) -> Vec<usize> {
        let mut labels = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            if labels[start] != usize::MAX {
                continue;
            }
            labels[start] = next;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in self.neighbors(v) {
                    if labels[w] == usize::MAX {
                        labels[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        labels
    }

    pub fn component_count(&self) -> usize {
        self.connected_components()
            .into_iter()
            .max()
            .map_or(0, |v| v + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Undirected non-loop edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.m);
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub(crate) fn parse_edge_list(text: &str, path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("expected two node ids, got {line:?}"),
                })
            }
        };
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("invalid node id {s:?}"),
            })
        };
        edges.push((parse(a)?, parse(b)?));
    }
    Ok(edges)
}
