//! Simple undirected graphs with a fixed edge order.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::format::{FormatError, Lines};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge {index} is a self-loop on vertex {vertex}")]
    SelfLoop { index: usize, vertex: usize },
    #[error("edge {index} ({u}, {v}) repeats an earlier edge")]
    Duplicate { index: usize, u: usize, v: usize },
    #[error("edge {index} endpoint {vertex} out of range for {n} vertices")]
    OutOfRange { index: usize, vertex: usize, n: usize },
    #[error("vertex {vertex} out of range for {n} vertices")]
    UnknownVertex { vertex: usize, n: usize },
    #[error("graph text: {0}")]
    Format(#[from] FormatError),
}

/// Vertices `0..n` and an ordered edge list `e_1..e_m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for (index, &(u, v)) in edges.iter().enumerate() {
            for vertex in [u, v] {
                if vertex >= n {
                    return Err(GraphError::OutOfRange { index, vertex, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { index, vertex: u });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::Duplicate { index, u, v });
            }
        }
        Ok(Self { n, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Endpoints of edge `e` ordered by vertex index, which is also the phase order.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        let (u, v) = self.edges[e];
        (u.min(v), u.max(v))
    }

    /// Indices of the edges incident with `v`, in edge order.
    pub fn incident(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let (a, b) = self.edges[e];
                a == v || b == v
            })
            .collect()
    }

    pub fn is_independent(&self, set: &[usize]) -> Result<bool, GraphError> {
        let mut member = vec![false; self.n];
        for &v in set {
            if v >= self.n {
                return Err(GraphError::UnknownVertex { vertex: v, n: self.n });
            }
            member[v] = true;
        }
        Ok(self.edges.iter().all(|&(u, v)| !(member[u] && member[v])))
    }

    /// Parses `n m` followed by `m` lines `u v`.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = Lines::new(text);
        let header = lines.next_tokens("`n m` header")?;
        let [n, m] = header.as_slice() else {
            return Err(lines.err("expected `n m`").into());
        };
        let n: usize = lines.number(n)?;
        let m: usize = lines.number(m)?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let tokens = lines.next_tokens("edge line")?;
            let [u, v] = tokens.as_slice() else {
                return Err(lines.err("expected `u v`").into());
            };
            edges.push((lines.number(u)?, lines.number(v)?));
        }
        if lines.try_next_tokens()?.is_some() {
            return Err(lines.err("more edge lines than announced").into());
        }
        Graph::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}
