//! Modularity maximisation: exact set-partition search for small graphs and
//! a seeded Louvain heuristic for everything else.
//!
//! Zero-degree nodes never affect modularity. Both backends leave them in
//! singleton clusters so that a returned optimum is well defined.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonicalize, Graph, Partition};
use crate::modularity::{from_scaled, scaled_score, ModularityValue};

/// Largest node count the exact backend accepts.
pub const MAX_EXACT_NODES: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exact,
    Heuristic,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub exact_n_limit: usize,
    pub seed: u64,
    pub heuristic_restarts: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: SearchMode::Auto,
            exact_n_limit: 12,
            seed: 0,
            heuristic_restarts: 20,
        }
    }
}

impl SearchConfig {
    pub fn exact() -> Self {
        SearchConfig {
            mode: SearchMode::Exact,
            ..Default::default()
        }
    }

    pub fn heuristic(seed: u64) -> Self {
        SearchConfig {
            mode: SearchMode::Heuristic,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exact_n_limit > MAX_EXACT_NODES {
            return Err(Error::Config(format!(
                "exact_n_limit {} exceeds {MAX_EXACT_NODES}",
                self.exact_n_limit
            )));
        }
        if self.mode != SearchMode::Exact && self.heuristic_restarts == 0 {
            return Err(Error::Config("heuristic_restarts must be positive".into()));
        }
        Ok(())
    }

    /// Whether a graph with `n` nodes would be solved exactly.
    pub fn uses_exact(&self, n: usize) -> bool {
        match self.mode {
            SearchMode::Exact => true,
            SearchMode::Heuristic => false,
            SearchMode::Auto => n <= self.exact_n_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub partition: Partition,
    pub value: ModularityValue,
    /// `true` when `partition` is a proven global maximiser.
    pub exact: bool,
}

/// Restricted-growth-string enumeration of all set partitions of `0..n`.
#[derive(Debug, Clone)]
pub struct PartitionEnumerator {
    rgs: Vec<usize>,
    // max label among rgs[0..=i]
    prefix_max: Vec<usize>,
    done: bool,
}

pub fn enumerate_partitions(n: usize) -> Result<PartitionEnumerator> {
    if n > MAX_EXACT_NODES {
        return Err(Error::TooLargeForExact {
            n,
            limit: MAX_EXACT_NODES,
        });
    }
    Ok(PartitionEnumerator {
        rgs: vec![0; n],
        prefix_max: vec![0; n],
        done: false,
    })
}

impl Iterator for PartitionEnumerator {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let out = Partition::from_labels(&self.rgs);
        // Advance: rightmost position that may still grow.
        let n = self.rgs.len();
        let mut i = n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= self.prefix_max[i - 1] {
                self.rgs[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.rgs[i]);
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                break;
            }
        }
        Some(out)
    }
}

/// Maximises modularity with the configured backend.
pub fn maximize_modularity(g: &Graph, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    if g.total_weight() == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = g.node_count();
    match cfg.mode {
        SearchMode::Exact => {
            if n > cfg.exact_n_limit {
                return Err(Error::TooLargeForExact {
                    n,
                    limit: cfg.exact_n_limit,
                });
            }
            Ok(exact_maximum(g))
        }
        SearchMode::Auto if n <= cfg.exact_n_limit => Ok(exact_maximum(g)),
        _ => Ok(best_louvain(g, cfg.seed, cfg.heuristic_restarts)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimality {
    /// Exact backend: `t` attains the maximum. Heuristic backend: no partition
    /// with larger modularity was found.
    pub optimal: bool,
    pub witness: Option<Partition>,
    pub exact: bool,
    pub value: ModularityValue,
    pub best: ModularityValue,
}

pub fn is_optimal(g: &Graph, t: &Partition, cfg: &SearchConfig) -> Result<Optimality> {
    t.check_len(g.node_count())?;
    let best = maximize_modularity(g, cfg)?;
    let m = g.total_weight() as i128;
    let value = from_scaled(scaled_score(g, t), m);
    let optimal = value >= best.value;
    Ok(Optimality {
        optimal,
        witness: (!optimal).then(|| best.partition.clone()),
        exact: best.exact,
        value,
        best: best.value,
    })
}

/// Exact maximiser. Ties are resolved towards the lexicographically smallest
/// canonical labelling of the positive-degree nodes; zero-degree nodes become
/// singletons.
fn exact_maximum(g: &Graph) -> SearchResult {
    let active: Vec<usize> = (0..g.node_count()).filter(|&v| g.degree(v) > 0).collect();
    let h = g.induced(&active);
    let m = g.total_weight() as i128;
    let mut bb = BranchAndBound::new(&h);
    bb.run();
    let mut labels = vec![0usize; g.node_count()];
    let mut next = bb.best_clusters;
    for v in 0..g.node_count() {
        labels[v] = match active.binary_search(&v) {
            Ok(pos) => bb.best_labels[pos],
            Err(_) => {
                next += 1;
                next - 1
            }
        };
    }
    let partition = canonicalize(&labels);
    debug_assert_eq!(scaled_score(g, &partition), bb.best_score);
    SearchResult {
        value: from_scaled(bb.best_score, m),
        partition,
        exact: true,
    }
}

/// Depth-first search over restricted growth strings with an upper bound on
/// the scaled score and connectivity pruning. All nodes have positive degree.
struct BranchAndBound<'a> {
    g: &'a Graph,
    n: usize,
    four_m: i128,
    deg: Vec<i128>,
    /// weight of edges with at least one endpoint >= x
    tail_weight: Vec<i128>,
    /// Σ_{y >= x} d_y²
    tail_deg_sq: Vec<i128>,
    /// number of neighbours with larger index
    later_neighbors: Vec<usize>,
    labels: Vec<usize>,
    internal: Vec<i128>,
    degsum: Vec<i128>,
    size: Vec<usize>,
    open: Vec<usize>,
    best_score: i128,
    best_labels: Vec<usize>,
    best_clusters: usize,
    found: bool,
}

impl<'a> BranchAndBound<'a> {
    fn new(g: &'a Graph) -> Self {
        let n = g.node_count();
        let deg: Vec<i128> = g.degrees().iter().map(|&d| d as i128).collect();
        let mut tail_weight = vec![0i128; n + 1];
        let mut tail_deg_sq = vec![0i128; n + 1];
        let mut later_neighbors = vec![0usize; n];
        for x in (0..n).rev() {
            // edges whose larger endpoint is x get counted when x is placed
            let down: i128 = (0..x).map(|y| g.weight(x, y) as i128).sum();
            tail_weight[x] = tail_weight[x + 1] + down;
            tail_deg_sq[x] = tail_deg_sq[x + 1] + deg[x] * deg[x];
            later_neighbors[x] = (x + 1..n).filter(|&y| g.weight(x, y) > 0).count();
        }
        BranchAndBound {
            g,
            n,
            four_m: 4 * g.total_weight() as i128,
            deg,
            tail_weight,
            tail_deg_sq,
            later_neighbors,
            labels: vec![0; n],
            internal: vec![0; n],
            degsum: vec![0; n],
            size: vec![0; n],
            open: vec![0; n],
            best_score: i128::MIN,
            best_labels: vec![0; n],
            best_clusters: 0,
            found: false,
        }
    }

    fn run(&mut self) {
        if self.n == 0 {
            self.best_score = 0;
            self.found = true;
            return;
        }
        self.dfs(0, 0, 0);
    }

    fn dfs(&mut self, x: usize, k: usize, score: i128) {
        if x == self.n {
            if !self.found || score > self.best_score {
                self.found = true;
                self.best_score = score;
                self.best_labels.copy_from_slice(&self.labels);
                self.best_clusters = k;
            }
            return;
        }
        if self.found {
            let bound = score + self.four_m * self.tail_weight[x] - self.tail_deg_sq[x];
            if bound < self.best_score {
                return;
            }
        }
        let mut link = vec![0i128; k + 1];
        for y in 0..x {
            link[self.labels[y]] += self.g.weight(x, y) as i128;
        }
        let dx = self.deg[x];
        for c in 0..=k {
            let new_cluster = c == k;
            if !new_cluster {
                // joining a cluster with no remaining frontier can never connect
                if self.open[c] == 0 {
                    continue;
                }
                if link[c] == 0 && self.later_neighbors[x] == 0 {
                    continue;
                }
            }
            let gain = self.four_m * link[c] - (2 * self.degsum[c] * dx + dx * dx);
            // assign
            self.labels[x] = c;
            self.internal[c] += link[c];
            self.degsum[c] += dx;
            self.size[c] += 1;
            self.open[c] += self.later_neighbors[x];
            let mut pruned = false;
            for y in 0..x {
                if self.g.weight(x, y) > 0 {
                    let cy = self.labels[y];
                    self.open[cy] -= 1;
                    if self.open[cy] == 0 && self.size[cy] == 1 && self.deg[y] == 1 && cy != c {
                        // sealed singleton of a degree-one node
                        pruned = true;
                    }
                }
            }
            if !pruned {
                self.dfs(x + 1, if new_cluster { k + 1 } else { k }, score + gain);
            }
            // undo
            for y in 0..x {
                if self.g.weight(x, y) > 0 {
                    self.open[self.labels[y]] += 1;
                }
            }
            self.open[c] -= self.later_neighbors[x];
            self.size[c] -= 1;
            self.degsum[c] -= dx;
            self.internal[c] -= link[c];
        }
    }
}

/// Single Louvain run; node visiting order is shuffled with `seed`.
pub fn louvain_partition(g: &Graph, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    louvain_with_rng(g, &mut rng)
}

/// Best of `restarts` Louvain runs with seeds drawn from `seed`.
pub fn best_louvain(g: &Graph, seed: u64, restarts: usize) -> SearchResult {
    let m = g.total_weight() as i128;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(i128, Partition)> = None;
    for _ in 0..restarts.max(1) {
        let run_seed = master.next_u64();
        let p = louvain_partition(g, run_seed);
        let s = scaled_score(g, &p);
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, p));
        }
    }
    let (score, partition) = best.expect("at least one restart");
    SearchResult {
        value: from_scaled(score, m),
        partition,
        exact: false,
    }
}

/// Weighted graph with self-loops used during aggregation.
struct Level {
    adj: Vec<Vec<(usize, i128)>>,
    /// total incident weight per node, loops counted twice
    strength: Vec<i128>,
}

impl Level {
    fn from_graph(g: &Graph) -> Self {
        let n = g.node_count();
        let adj = (0..n)
            .map(|i| {
                g.neighbors(i)
                    .map(|j| (j, g.weight(i, j) as i128))
                    .collect()
            })
            .collect();
        let strength = g.degrees().iter().map(|&d| d as i128).collect();
        Level { adj, strength }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns community labels and whether any node moved.
    fn local_moves(&self, two_m: i128, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot: Vec<i128> = self.strength.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut moved_any = false;
        let mut link = vec![0i128; n];
        let mut touched: Vec<usize> = Vec::new();
        loop {
            let mut moved = false;
            for &i in &order {
                let ki = self.strength[i];
                if ki == 0 {
                    continue;
                }
                let own = comm[i];
                for &(j, w) in &self.adj[i] {
                    if j == i {
                        continue;
                    }
                    let c = comm[j];
                    if link[c] == 0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    link[c] += w;
                }
                tot[own] -= ki;
                // gain ∝ 2m·k_{i,c} − Σ_c·k_i
                let gain = |c: usize, link_c: i128| two_m * link_c - tot[c] * ki;
                let mut best_c = own;
                let mut best_gain = gain(own, link[own]);
                let mut cands = touched.clone();
                cands.sort_unstable();
                for &c in &cands {
                    let gc = gain(c, link[c]);
                    if gc > best_gain {
                        best_gain = gc;
                        best_c = c;
                    }
                }
                tot[best_c] += ki;
                if best_c != own {
                    comm[i] = best_c;
                    moved = true;
                    moved_any = true;
                }
                for &c in &touched {
                    link[c] = 0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        (comm, moved_any)
    }

    fn aggregate(&self, comm: &[usize]) -> (Level, Vec<usize>) {
        let relabel = canonicalize(comm);
        let k = relabel.cluster_count();
        let mut weights: Vec<std::collections::BTreeMap<usize, i128>> = vec![Default::default(); k];
        let mut strength = vec![0i128; k];
        for i in 0..self.len() {
            let ci = relabel.cluster_of(i);
            strength[ci] += self.strength[i];
            for &(j, w) in &self.adj[i] {
                let cj = relabel.cluster_of(j);
                *weights[ci].entry(cj).or_default() += w;
            }
        }
        let adj = weights.into_iter().map(|m| m.into_iter().collect()).collect();
        (Level { adj, strength }, relabel.labels().to_vec())
    }
}

fn louvain_with_rng(g: &Graph, rng: &mut ChaCha8Rng) -> Partition {
    let n = g.node_count();
    let two_m = 2 * g.total_weight() as i128;
    if two_m == 0 {
        return Partition::singletons(n);
    }
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = Level::from_graph(g);
    loop {
        let (comm, moved) = level.local_moves(two_m, rng);
        if !moved {
            break;
        }
        let (next, map) = level.aggregate(&comm);
        for c in membership.iter_mut() {
            *c = map[*c];
        }
        level = next;
    }
    refine(g, &mut membership, two_m);
    canonicalize(&membership)
}

/// Single-node improvement sweep on the original graph, in index order.
fn refine(g: &Graph, membership: &mut [usize], two_m: i128) {
    let n = g.node_count();
    let mut tot = vec![0i128; n];
    for v in 0..n {
        tot[membership[v]] += g.degree(v) as i128;
    }
    loop {
        let mut moved = false;
        for v in 0..n {
            let kv = g.degree(v) as i128;
            if kv == 0 {
                continue;
            }
            let own = membership[v];
            let mut link = vec![0i128; n];
            for u in g.neighbors(v) {
                link[membership[u]] += g.weight(u, v) as i128;
            }
            tot[own] -= kv;
            let mut best_c = own;
            let mut best_gain = two_m * link[own] - tot[own] * kv;
            for c in 0..n {
                if link[c] > 0 {
                    let gc = two_m * link[c] - tot[c] * kv;
                    if gc > best_gain {
                        best_gain = gc;
                        best_c = c;
                    }
                }
            }
            tot[best_c] += kv;
            if best_c != own {
                membership[v] = best_c;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modularity::modularity;

    fn two_triangles() -> Graph {
        Graph::from_unit_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    fn brute_max(g: &Graph) -> (ModularityValue, Partition) {
        let mut best: Option<(ModularityValue, Partition)> = None;
        for p in enumerate_partitions(g.node_count()).unwrap() {
            let q = modularity(g, &p).unwrap();
            if best.as_ref().is_none_or(|(b, _)| q > *b) {
                best = Some((q, p));
            }
        }
        best.unwrap()
    }

    #[test]
    fn bell_numbers() {
        assert_eq!(enumerate_partitions(1).unwrap().count(), 1);
        assert_eq!(enumerate_partitions(3).unwrap().count(), 5);
        assert_eq!(enumerate_partitions(10).unwrap().count(), 115_975);
        assert!(enumerate_partitions(MAX_EXACT_NODES + 1).is_err());
    }

    #[test]
    fn enumeration_is_canonical_and_distinct() {
        let all: Vec<_> = enumerate_partitions(5).unwrap().collect();
        let set: std::collections::BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), 52);
        for p in &all {
            assert_eq!(&canonicalize(p.labels()), p);
        }
        assert!(all.windows(2).all(|w| w[0].labels() < w[1].labels()));
    }

    #[test]
    fn triangle_single_cluster() {
        let g = Graph::from_unit_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let r = maximize_modularity(&g, &SearchConfig::exact()).unwrap();
        assert_eq!(r.partition, Partition::whole(3));
        assert_eq!(r.value, ModularityValue::zero());
        assert!(r.exact);
    }

    #[test]
    fn two_triangles_components() {
        let g = two_triangles();
        let r = maximize_modularity(&g, &SearchConfig::exact()).unwrap();
        assert_eq!(r.partition.labels(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(r.value, ModularityValue::new(1, 2));
        assert_eq!(r.value, brute_max(&g).0);
        for seed in 0..5 {
            assert_eq!(louvain_partition(&g, seed).labels(), &[0, 0, 0, 1, 1, 1]);
        }
    }

    #[test]
    fn exact_limit_enforced() {
        let g = Graph::from_unit_edges(13, &[(0, 1)]).unwrap();
        let cfg = SearchConfig::exact();
        assert!(matches!(
            maximize_modularity(&g, &cfg),
            Err(Error::TooLargeForExact { n: 13, limit: 12 })
        ));
        let bad = SearchConfig {
            exact_n_limit: 15,
            ..SearchConfig::exact()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_edge_with_isolated_nodes() {
        let g = Graph::from_unit_edges(4, &[(1, 2)]).unwrap();
        let r = maximize_modularity(&g, &SearchConfig::exact()).unwrap();
        assert_eq!(r.partition.labels(), &[0, 1, 1, 2]);
        assert_eq!(r.value, ModularityValue::zero());
        let h = louvain_partition(&g, 3);
        assert_eq!(h.labels(), &[0, 1, 1, 2]);
    }

    #[test]
    fn optimality_checks() {
        let g = two_triangles();
        let comps = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        let r = is_optimal(&g, &comps, &SearchConfig::exact()).unwrap();
        assert!(r.optimal && r.witness.is_none());
        let r = is_optimal(&g, &Partition::whole(6), &SearchConfig::exact()).unwrap();
        assert!(!r.optimal);
        assert_eq!(r.witness, Some(comps));
    }

    #[test]
    fn exact_matches_brute_force_with_lexicographic_ties() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..150 {
            let n = rng.gen_range(2..=8);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.4) {
                        edges.push((i, j, rng.gen_range(1..=3)));
                    }
                }
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            if g.total_weight() == 0 || (0..n).any(|v| g.degree(v) == 0) {
                continue;
            }
            let r = maximize_modularity(&g, &SearchConfig::exact()).unwrap();
            let (bq, bp) = brute_max(&g);
            assert_eq!(r.value, bq);
            // brute force keeps the first maximiser in RGS (lexicographic) order
            assert_eq!(r.partition, bp);
            let h = best_louvain(&g, 1, 5);
            assert!(h.value <= r.value);
        }
    }

    #[test]
    fn heuristic_is_deterministic() {
        let g = Graph::from_unit_edges(
            8,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (3, 4)],
        )
        .unwrap();
        let cfg = SearchConfig::heuristic(42);
        let a = maximize_modularity(&g, &cfg).unwrap();
        let b = maximize_modularity(&g, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.exact);
    }
}
