//! Undirected simple graphs with dense `1..=n` vertex identifiers, vertex
//! sets with cached volume, and exact combinatorial conductance.

mod conductance;
mod generate;
mod io;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conductance::{
    cheeger_constant_lazy, cut_conductance, find_low_conductance_set, min_conductance_bruteforce,
    BRUTE_FORCE_MAX_N,
};
pub use generate::{generate, Family};
pub use io::{read_edge_list, read_edge_list_file, write_edge_list, LoadError};

/// Vertex identifier in `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    /// Zero-based storage index.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        VertexId(index as u32 + 1)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("parallel edge between {0} and {1}")]
    ParallelEdge(VertexId, VertexId),
    #[error("adjacency is not symmetric: {0} lists {1} but not vice versa")]
    AsymmetricAdjacency(VertexId, VertexId),
    #[error("vertex {0} has degree 0")]
    IsolatedVertex(VertexId),
    #[error("graph is disconnected: vertex {0} unreachable from vertex 1")]
    Disconnected(VertexId),
    #[error("vertex {0} outside 1..={1}")]
    VertexOutOfRange(u32, usize),
    #[error("cut side is empty or covers every vertex")]
    EmptySide,
    #[error("brute-force enumeration supports at most {max} vertices, graph has {n}")]
    TooLarge { n: usize, max: usize },
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParameters(String),
}

/// Checks every structural invariant of a zero-indexed adjacency list and
/// reports the first one violated.
///
/// Order of checks: self-loops, parallel edges, symmetry, isolated
/// vertices, connectivity.
pub fn validate(adjacency: &[Vec<usize>]) -> Result<(), GraphError> {
    let n = adjacency.len();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    for (v, nbrs) in adjacency.iter().enumerate() {
        for &w in nbrs {
            if w >= n {
                return Err(GraphError::VertexOutOfRange(w as u32 + 1, n));
            }
            if w == v {
                return Err(GraphError::SelfLoop(VertexId::from_index(v)));
            }
        }
    }
    for (v, nbrs) in adjacency.iter().enumerate() {
        let mut sorted = nbrs.clone();
        sorted.sort_unstable();
        if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
            return Err(GraphError::ParallelEdge(
                VertexId::from_index(v),
                VertexId::from_index(pair[0]),
            ));
        }
    }
    for (v, nbrs) in adjacency.iter().enumerate() {
        for &w in nbrs {
            if !adjacency[w].contains(&v) {
                return Err(GraphError::AsymmetricAdjacency(
                    VertexId::from_index(v),
                    VertexId::from_index(w),
                ));
            }
        }
    }
    if let Some(v) = adjacency.iter().position(|nbrs| nbrs.is_empty()) {
        return Err(GraphError::IsolatedVertex(VertexId::from_index(v)));
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(GraphError::Disconnected(VertexId::from_index(v)));
    }
    Ok(())
}

/// A validated, immutable, connected simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
    m: usize,
}

impl Graph {
    /// Builds a graph on vertices `1..=n` from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            for x in [u, v] {
                if x.0 == 0 || x.index() >= n {
                    return Err(GraphError::VertexOutOfRange(x.0, n));
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u.index()].push(v.index());
            adjacency[v.index()].push(u.index());
        }
        Self::from_adjacency(adjacency)
    }

    /// Builds a graph from zero-indexed adjacency lists, validating all
    /// invariants (including symmetry).
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        validate(&adjacency)?;
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let degrees: Vec<usize> = adjacency.iter().map(Vec::len).collect();
        let m = degrees.iter().sum::<usize>() / 2;
        Ok(Graph { adjacency, degrees, m })
    }

    /// Re-runs the full invariant check.
    pub fn validate(&self) -> Result<(), GraphError> {
        validate(&self.adjacency)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total volume `2m`.
    pub fn total_volume(&self) -> usize {
        2 * self.m
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.degrees[v.index()]
    }

    /// Degrees indexed by zero-based vertex index.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Sorted zero-based neighbor indices of the vertex at `index`.
    pub fn neighbors_of_index(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.adjacency[v.index()].iter().map(|&w| VertexId::from_index(w))
    }

    pub fn is_adjacent(&self, u: VertexId, v: VertexId) -> bool {
        self.adjacency[u.index()].binary_search(&v.index()).is_ok()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.n()).map(VertexId::from_index)
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, nbrs)| {
            nbrs.iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (VertexId::from_index(u), VertexId::from_index(v)))
        })
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    /// Neighbor bitmasks for graphs with at most 64 vertices.
    pub(crate) fn neighbor_masks(&self) -> Vec<u64> {
        debug_assert!(self.n() <= 64);
        self.adjacency
            .iter()
            .map(|nbrs| nbrs.iter().fold(0u64, |acc, &w| acc | (1 << w)))
            .collect()
    }
}

/// A subset of `1..=n` with its volume (sum of degrees) cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    members: Vec<bool>,
    len: usize,
    volume: usize,
}

impl VertexSet {
    /// `degrees` is indexed by zero-based vertex index and fixes `n`.
    pub fn from_vertices<I>(degrees: &[usize], vertices: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = VertexId>,
    {
        let n = degrees.len();
        let mut members = vec![false; n];
        for v in vertices {
            if v.0 == 0 || v.index() >= n {
                return Err(GraphError::VertexOutOfRange(v.0, n));
            }
            members[v.index()] = true;
        }
        Ok(Self::from_membership(degrees, members))
    }

    pub fn from_membership(degrees: &[usize], members: Vec<bool>) -> Self {
        assert_eq!(degrees.len(), members.len(), "membership length mismatch");
        let len = members.iter().filter(|&&b| b).count();
        let volume = members
            .iter()
            .zip(degrees)
            .filter_map(|(&b, &d)| b.then_some(d))
            .sum();
        VertexSet { members, len, volume }
    }

    /// Bit `i` of `mask` is vertex `i + 1`.
    pub fn from_mask(degrees: &[usize], mask: u64) -> Self {
        let members = (0..degrees.len()).map(|i| mask >> i & 1 == 1).collect();
        Self::from_membership(degrees, members)
    }

    pub fn empty(degrees: &[usize]) -> Self {
        Self::from_membership(degrees, vec![false; degrees.len()])
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.0 != 0 && self.members.get(v.index()).copied().unwrap_or(false)
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.members[index]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of the ground set `n`.
    pub fn universe(&self) -> usize {
        self.members.len()
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b)
            .map(|(i, _)| VertexId::from_index(i))
    }

    pub fn complement(&self, degrees: &[usize]) -> Self {
        Self::from_membership(degrees, self.members.iter().map(|b| !b).collect())
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.members.len() == other.members.len()
            && self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    pub fn without(&self, degrees: &[usize], v: VertexId) -> Self {
        let mut members = self.members.clone();
        if let Some(slot) = members.get_mut(v.index()) {
            *slot = false;
        }
        Self::from_membership(degrees, members)
    }

    /// Membership bitmask; only meaningful for `n <= 64`.
    pub fn mask(&self) -> u64 {
        self.members
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| if b { acc | 1 << i } else { acc })
    }

    /// The `D^{1/2} 1_S` vector.
    pub fn sqrt_degree_indicator(&self, degrees: &[usize]) -> Vec<f64> {
        self.members
            .iter()
            .zip(degrees)
            .map(|(&b, &d)| if b { (d as f64).sqrt() } else { 0.0 })
            .collect()
    }
}

impl Serialize for VertexSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

/// A cut `(S, V \ S)` with its crossing-edge count and conductance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub side: VertexSet,
    pub crossing_edges: usize,
    pub conductance: f64,
}

impl Cut {
    pub fn new(graph: &Graph, side: VertexSet) -> Result<Self, GraphError> {
        if side.universe() != graph.n() {
            return Err(GraphError::VertexOutOfRange(side.universe() as u32, graph.n()));
        }
        if side.is_empty() || side.len() == graph.n() {
            return Err(GraphError::EmptySide);
        }
        let crossing_edges = crossing_edges(graph, &side);
        let small = side.volume().min(graph.total_volume() - side.volume());
        Ok(Cut {
            conductance: crossing_edges as f64 / small as f64,
            crossing_edges,
            side,
        })
    }
}

/// `E(S, V \ S)`.
pub fn crossing_edges(graph: &Graph, side: &VertexSet) -> usize {
    (0..graph.n())
        .filter(|&v| side.contains_index(v))
        .map(|v| {
            graph
                .neighbors_of_index(v)
                .iter()
                .filter(|&&w| !side.contains_index(w))
                .count()
        })
        .sum()
}
