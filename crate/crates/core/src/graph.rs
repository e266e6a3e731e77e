//! Weighted undirected graphs, partitions and edge deltas.
//!
//! Weights are nonnegative integers: an unweighted graph uses weight 1 per
//! edge, and parallel edges accumulate into a single pair weight. Self-loops
//! are rejected at construction so `adj[i][i]` is always zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<u64>,
    degree: Vec<u64>,
    total: u64,
}

impl Graph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: vec![0; n * n],
            degree: vec![0; n],
            total: 0,
        }
    }

    /// Builds a graph from `(i, j, weight)` triples. Duplicate pairs
    /// accumulate their weights.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(i, j, w) in edges {
            g.check_pair(i, j)?;
            if w == 0 {
                return Err(Error::ZeroWeight(i, j));
            }
            g.add_weight(i, j, w);
        }
        Ok(g)
    }

    /// Unit-weight convenience constructor.
    pub fn from_unit_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let triples: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1)).collect();
        Graph::from_edges(n, &triples)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        for node in [i, j] {
            if node >= self.n {
                return Err(Error::NodeOutOfRange { node, n: self.n });
            }
        }
        if i == j {
            return Err(Error::LoopEdge(i));
        }
        Ok(())
    }

    fn add_weight(&mut self, i: usize, j: usize, w: u64) {
        self.adj[i * self.n + j] += w;
        self.adj[j * self.n + i] += w;
        self.degree[i] += w;
        self.degree[j] += w;
        self.total += w;
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u64 {
        self.adj[i * self.n + j]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) > 0
    }

    #[inline]
    pub fn degree(&self, i: usize) -> u64 {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[u64] {
        &self.degree
    }

    /// Total edge weight `m`.
    pub fn total_weight(&self) -> u64 {
        self.total
    }

    /// Row `i` of the adjacency matrix.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.adj[i * self.n..(i + 1) * self.n]
    }

    /// Weighted edges `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weight(i, j);
                if w > 0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Number of distinct adjacent pairs (ignores multiplicity).
    pub fn pair_count(&self) -> usize {
        self.edges().len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(j, _)| j)
    }

    /// Returns a new graph with `delta` applied; `self` is left untouched.
    pub fn apply(&self, delta: &EdgeDelta) -> Result<Graph> {
        let mut g = self.clone();
        for &(i, j, dw) in delta.pairs() {
            g.check_pair(i, j)?;
            let cur = g.weight(i, j) as i64;
            let next = cur + dw;
            if next < 0 {
                return Err(Error::NegativeWeight { i, j, weight: next });
            }
            let next = next as u64;
            let n = g.n;
            g.adj[i * n + j] = next;
            g.adj[j * n + i] = next;
            g.degree[i] = (g.degree[i] as i64 + dw) as u64;
            g.degree[j] = (g.degree[j] as i64 + dw) as u64;
            g.total = (g.total as i64 + dw) as u64;
        }
        Ok(g)
    }

    /// Non-adjacent pairs `(i, j)`, `i < j`, that share a neighbor.
    pub fn distance2_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.is_adjacent(i, j) {
                    continue;
                }
                if (0..self.n).any(|k| self.is_adjacent(i, k) && self.is_adjacent(k, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut comps = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![s];
            let mut comp = Vec::new();
            label[s] = id;
            while let Some(x) = stack.pop() {
                comp.push(x);
                for y in self.neighbors(x) {
                    if label[y] == usize::MAX {
                        label[y] = id;
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Induced subgraph on `nodes` (relabelled densely in the given order).
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        let mut g = Graph::empty(nodes.len());
        for (a, &x) in nodes.iter().enumerate() {
            for (b, &y) in nodes.iter().enumerate().skip(a + 1) {
                let w = self.weight(x, y);
                if w > 0 {
                    g.add_weight(a, b, w);
                }
            }
        }
        g
    }

    /// Whether the nodes in `set` induce a connected subgraph. Empty and
    /// single-node sets count as connected.
    pub fn is_connected_within(&self, set: &[usize]) -> bool {
        if set.len() <= 1 {
            return true;
        }
        let mut inside = vec![false; self.n];
        for &x in set {
            inside[x] = true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![set[0]];
        seen[set[0]] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for y in self.neighbors(x) {
                if inside[y] && !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == set.len()
    }
}

/// A set partition of `0..n` in canonical form: cluster ids are assigned in
/// order of first appearance when scanning nodes by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    assign: Vec<usize>,
    k: usize,
}

/// Relabels arbitrary cluster labels into canonical form.
pub fn canonicalize(labels: &[usize]) -> Partition {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut assign = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        assign.push(*map.entry(l).or_insert(next));
    }
    let k = map.len();
    Partition { assign, k }
}

impl Partition {
    pub fn from_labels(labels: &[usize]) -> Self {
        canonicalize(labels)
    }

    /// Builds a partition from explicit clusters. Every node in `0..n` must
    /// appear exactly once.
    pub fn from_clusters(n: usize, clusters: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (c, members) in clusters.iter().enumerate() {
            for &v in members {
                if v >= n {
                    return Err(Error::NodeOutOfRange { node: v, n });
                }
                if labels[v] != usize::MAX {
                    return Err(Error::Config(format!("node {v} listed twice")));
                }
                labels[v] = c;
            }
        }
        if let Some(v) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Config(format!("node {v} not covered")));
        }
        Ok(canonicalize(&labels))
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assign: (0..n).collect(),
            k: n,
        }
    }

    pub fn whole(n: usize) -> Self {
        Partition {
            assign: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn cluster_of(&self, v: usize) -> usize {
        self.assign[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.assign
    }

    pub fn same_cluster(&self, u: usize, v: usize) -> bool {
        self.assign[u] == self.assign[v]
    }

    /// Members of every cluster, indexed by cluster id, each sorted.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (v, &c) in self.assign.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assign.len())
            .filter(|&v| self.assign[v] == c)
            .collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.assign.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: self.assign.len(),
            });
        }
        Ok(())
    }
}

/// A signed change to pair weights, pairs normalised to `i < j`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDelta {
    pairs: Vec<(usize, usize, i64)>,
}

impl EdgeDelta {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a delta, normalising pair orientation. Zero entries are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize, i64)>) -> Self {
        let mut d = EdgeDelta::new();
        for (i, j, w) in pairs {
            d.push(i, j, w);
        }
        d
    }

    pub fn push(&mut self, i: usize, j: usize, dw: i64) {
        if dw == 0 {
            return;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs.push((a, b, dw));
    }

    pub fn pairs(&self) -> &[(usize, usize, i64)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Sum of absolute weight changes (edges added or removed, counting
    /// multiplicity).
    pub fn magnitude(&self) -> u64 {
        self.pairs.iter().map(|p| p.2.unsigned_abs()).sum()
    }

    pub fn negate(&self) -> EdgeDelta {
        EdgeDelta {
            pairs: self.pairs.iter().map(|&(i, j, w)| (i, j, -w)).collect(),
        }
    }

    /// Merges entries on the same pair and drops zeros, sorted by pair.
    pub fn consolidated(&self) -> EdgeDelta {
        let mut acc: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for &(i, j, w) in &self.pairs {
            *acc.entry((i, j)).or_default() += w;
        }
        EdgeDelta {
            pairs: acc
                .into_iter()
                .filter(|&(_, w)| w != 0)
                .map(|((i, j), w)| (i, j, w))
                .collect(),
        }
    }

    pub fn extend(&mut self, other: &EdgeDelta) {
        self.pairs.extend_from_slice(&other.pairs);
    }
}
