//! Brute-force oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use modforce::{Graph, Partition};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

/// Every set partition of `0..n` as restricted growth strings.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn rec(k: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == labels.len() {
            out.push(labels.clone());
            return;
        }
        for c in 0..=max + 1 {
            labels[k] = c;
            rec(k + 1, max.max(c), labels, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    rec(1, 0, &mut labels, &mut out);
    out
}

/// `4m · (weight inside clusters) − Σ (cluster degree)²`, computed naively.
pub fn scaled(g: &Graph, labels: &[usize]) -> i128 {
    let n = g.node_count();
    let m = g.total_weight() as i128;
    let mut inside = 0i128;
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                inside += g.weight(i, j) as i128;
            }
        }
    }
    let k = labels.iter().max().map_or(0, |x| x + 1);
    let mut vol = vec![0i128; k];
    for i in 0..n {
        vol[labels[i]] += g.degree(i) as i128;
    }
    4 * m * inside - vol.iter().map(|d| d * d).sum::<i128>()
}

/// Modularity from the pairwise definition.
pub fn q_exact(g: &Graph, labels: &[usize]) -> Ratio<i128> {
    let n = g.node_count();
    let two_m = 2 * g.total_weight() as i128;
    let mut acc = Ratio::from_integer(0);
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                let a = g.weight(i, j) as i128;
                let expect = Ratio::new(g.degree(i) as i128 * g.degree(j) as i128, two_m);
                acc += Ratio::from_integer(a) - expect;
            }
        }
    }
    acc / Ratio::from_integer(two_m)
}

/// Checks whether a partition is modularity-optimal by enumeration. Partitions
/// that beat the target once are tried first on later calls.
pub struct OptimalityOracle {
    parts: Vec<Vec<usize>>,
    killers: Vec<usize>,
}

impl OptimalityOracle {
    pub fn new(n: usize) -> Self {
        OptimalityOracle { parts: all_partitions(n), killers: Vec::new() }
    }

    pub fn is_optimal(&mut self, g: &Graph, t: &Partition) -> bool {
        if g.total_weight() == 0 {
            return false;
        }
        let st = scaled(g, t.labels());
        for &k in &self.killers {
            if scaled(g, &self.parts[k]) > st {
                return false;
            }
        }
        for (idx, p) in self.parts.iter().enumerate() {
            if scaled(g, p) > st {
                self.killers.push(idx);
                return false;
            }
        }
        true
    }

    pub fn best(&self, g: &Graph) -> i128 {
        self.parts.iter().map(|p| scaled(g, p)).max().unwrap_or(0)
    }
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64, max_w: u64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j, rng.gen_range(1..=max_w)));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Random labels with exactly `k` clusters, each of size at least `min_size`.
pub fn planted_labels(rng: &mut impl Rng, n: usize, k: usize, min_size: usize) -> Vec<usize> {
    assert!(k * min_size <= n);
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k * min_size { i % k } else { rng.gen_range(0..k) }).collect();
    labels.shuffle(rng);
    labels
}

/// Graph denser inside the clusters of `labels` than between them.
pub fn planted_graph(rng: &mut impl Rng, labels: &[usize], p_in: f64, p_out: f64) -> Graph {
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_unit_edges(n, &edges).unwrap()
}

/// Graph with the unit edges of `pairs[e]` added for each set bit `e` of `mask`.
pub fn with_mask(g: &Graph, pairs: &[(usize, usize)], mask: u32) -> Graph {
    let delta = modforce::EdgeDelta::from_pairs(
        pairs
            .iter()
            .enumerate()
            .filter(|(e, _)| mask >> e & 1 == 1)
            .map(|(_, &(i, j))| (i, j, 1)),
    );
    g.apply(&delta).unwrap()
}

pub fn mask_to_bools(mask: u32, len: usize) -> Vec<bool> {
    (0..len).map(|e| mask >> e & 1 == 1).collect()
}

/// An edge-addition instance: a base graph, a target partition that is not yet
/// optimal, and unit candidate pairs that are non-edges of the base graph.
pub struct AdditionInstance {
    pub graph: Graph,
    pub target: Partition,
    pub pairs: Vec<(usize, usize)>,
}

pub fn addition_instance(rng: &mut impl Rng, max_n: usize, max_cand: usize) -> AdditionInstance {
    loop {
        let n = rng.gen_range(5..=max_n);
        let k = rng.gen_range(2..=3.min(n / 2));
        let labels = planted_labels(rng, n, k, 2);
        let g = planted_graph(rng, &labels, 0.45, 0.3);
        if g.total_weight() == 0 {
            continue;
        }
        let t = Partition::from_labels(&labels);
        let mut oracle = OptimalityOracle::new(n);
        if oracle.is_optimal(&g, &t) {
            continue;
        }
        let mut within = Vec::new();
        let mut between = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !g.is_adjacent(i, j) {
                    if t.same_cluster(i, j) { within.push((i, j)) } else { between.push((i, j)) }
                }
            }
        }
        within.shuffle(rng);
        between.shuffle(rng);
        let size = rng.gen_range(4..=max_cand);
        let take_within = within.len().min(size - size / 4);
        let mut pairs: Vec<(usize, usize)> = within[..take_within].to_vec();
        pairs.extend(between.iter().take(size - take_within));
        if pairs.is_empty() {
            continue;
        }
        pairs.sort_unstable();
        return AdditionInstance { graph: g, target: t, pairs };
    }
}

/// Brute-force feasibility of every candidate subset and the smallest
/// feasible subset size.
pub struct AdditionOracle {
    pub feasible: Vec<u32>,
    pub minimum: Option<u32>,
}

pub fn solve_addition_by_enumeration(inst: &AdditionInstance) -> AdditionOracle {
    let mut oracle = OptimalityOracle::new(inst.graph.node_count());
    let mut feasible = Vec::new();
    for mask in 0..(1u32 << inst.pairs.len()) {
        if oracle.is_optimal(&with_mask(&inst.graph, &inst.pairs, mask), &inst.target) {
            feasible.push(mask);
        }
    }
    let minimum = feasible.iter().map(|m| m.count_ones()).min();
    AdditionOracle { feasible, minimum }
}
