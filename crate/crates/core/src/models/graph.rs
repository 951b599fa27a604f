use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 0/1 adjacency matrix with zero diagonal.
///
/// Serializes as `{"n": .., "edges": [[i, j], ..]}` with `i < j`, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "EdgeList", try_from = "EdgeList")]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct EdgeList {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl From<AdjacencyMatrix> for EdgeList {
    fn from(a: AdjacencyMatrix) -> Self {
        EdgeList {
            n: a.n,
            edges: a.edges().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl TryFrom<EdgeList> for AdjacencyMatrix {
    type Error = Error;

    fn try_from(list: EdgeList) -> Result<Self> {
        AdjacencyMatrix::from_edges(list.n, list.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            entries: vec![false; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut a = Self::empty(n);
        for (i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::invalid(format!("invalid edge ({i}, {j}) for {n} nodes")));
            }
            a.add_edge(i, j);
        }
        Ok(a)
    }

    /// Two nodes joined by one edge.
    pub fn pair() -> Self {
        Self::from_edges(2, [(0, 1)]).expect("valid edge")
    }

    fn add_edge(&mut self, i: usize, j: usize) {
        self.entries[i * self.n + j] = true;
        self.entries[j * self.n + i] = true;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    /// Edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i + 1..self.n)
                .filter(move |&j| self.has_edge(i, j))
                .map(move |j| (i, j))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| !self.has_edge(i, i) && (0..self.n).all(|j| self.has_edge(i, j) == self.has_edge(j, i)))
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Barabási–Albert preferential attachment graph.
///
/// Starts from a clique on nodes `0..=m`; every later node attaches to `m`
/// distinct existing nodes chosen with probability proportional to their
/// current degree. Deterministic for a given seed.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<AdjacencyMatrix> {
    if m < 1 || m >= n {
        return Err(Error::invalid(format!(
            "Barabasi-Albert needs 1 <= m < n, got n = {n}, m = {m}"
        )));
    }
    let mut adj = AdjacencyMatrix::empty(n);
    // every edge contributes both endpoints, so uniform draws from this
    // list are degree-proportional
    let mut endpoints = Vec::with_capacity(2 * (m * (m + 1) / 2 + (n - m - 1) * m));
    for i in 0..=m {
        for j in i + 1..=m {
            adj.add_edge(i, j);
            endpoints.extend([i, j]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let c = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&c) {
                targets.push(c);
            }
        }
        for &c in &targets {
            adj.add_edge(v, c);
            endpoints.extend([v, c]);
        }
    }
    debug_assert!(adj.is_connected());
    Ok(adj)
}
