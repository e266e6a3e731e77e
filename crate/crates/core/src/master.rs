//! Linearised master problem: candidate edges, partition rows, McCormick
//! couplings, swap partitions and disjunctive cuts.
//!
//! Candidate `e` owns binary variable `e` in every assembled program.
//! Product variables follow the candidates and indicator variables of
//! disjunctive cuts come last.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bip::{BinaryProgram, Coupling, LinearRow};
use crate::error::{Error, Result};
use crate::graph::{EdgeDelta, Graph, Partition};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateEdgeSet {
    pairs: Vec<(usize, usize)>,
    capacity: Vec<u64>,
    #[serde(skip)]
    index: HashMap<(usize, usize), usize>,
}

impl CandidateEdgeSet {
    /// Pairs with their capacities; pairs are normalised to `i < j`.
    pub fn new(n: usize, pairs: &[(usize, usize)], capacity: &[u64]) -> Result<Self> {
        if pairs.len() != capacity.len() {
            return Err(Error::SizeMismatch {
                expected: pairs.len(),
                got: capacity.len(),
            });
        }
        let mut out = CandidateEdgeSet {
            pairs: Vec::with_capacity(pairs.len()),
            capacity: Vec::with_capacity(pairs.len()),
            index: HashMap::new(),
        };
        for (&(a, b), &cap) in pairs.iter().zip(capacity) {
            if a == b {
                return Err(Error::LoopEdge(a));
            }
            for x in [a, b] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { node: x, n });
                }
            }
            let key = (a.min(b), a.max(b));
            if out.index.insert(key, out.pairs.len()).is_some() {
                return Err(Error::Config(format!("duplicate candidate pair {key:?}")));
            }
            out.pairs.push(key);
            out.capacity.push(cap);
        }
        Ok(out)
    }

    /// Unit-capacity candidates that must all be non-edges of `g`.
    pub fn for_addition(g: &Graph, pairs: &[(usize, usize)]) -> Result<Self> {
        let cand = Self::new(g.node_count(), pairs, &vec![1; pairs.len()])?;
        if let Some(&(a, b)) = cand.pairs.iter().find(|&&(a, b)| g.is_adjacent(a, b)) {
            return Err(Error::Config(format!("candidate ({a}, {b}) is already an edge")));
        }
        Ok(cand)
    }

    /// Every edge of `g` with its weight as capacity.
    pub fn from_graph_edges(g: &Graph) -> Self {
        let edges = g.edges();
        let pairs: Vec<_> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let caps: Vec<_> = edges.iter().map(|e| e.2).collect();
        Self::new(g.node_count(), &pairs, &caps).expect("graph edges are valid candidates")
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn capacity(&self, e: usize) -> u64 {
        self.capacity[e]
    }

    pub fn total_capacity(&self) -> u64 {
        self.capacity.iter().sum()
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(i.min(j), i.max(j))).copied()
    }

    /// The unit additions selected by `z` (only the first `len()` entries are read).
    pub fn delta_for(&self, z: &[bool]) -> EdgeDelta {
        EdgeDelta::from_pairs(
            self.pairs
                .iter()
                .zip(z)
                .filter(|(_, &on)| on)
                .map(|(&(i, j), _)| (i, j, 1)),
        )
    }
}

/// The scaled comparison `4m̄²(Q_T − Q_P)` on the augmented graph as a
/// quadratic function of the candidate indicators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionRow {
    pub constant: i64,
    pub linear: Vec<i64>,
    /// Cross terms `(e, f)` with `e < f`; squares are folded into `linear`.
    pub quadratic: BTreeMap<(usize, usize), i64>,
}

impl PartitionRow {
    pub fn value(&self, z: &[bool]) -> i64 {
        let mut v = self.constant;
        for (e, &c) in self.linear.iter().enumerate() {
            if z[e] {
                v += c;
            }
        }
        for (&(e, f), &c) in &self.quadratic {
            if z[e] && z[f] {
                v += c;
            }
        }
        v
    }

    /// `value ≥ rhs` as a linear row, creating product variables on demand.
    pub fn to_linear_row(&self, rhs: i64, products: &mut ProductIndex<'_>) -> LinearRow {
        let mut terms: Vec<(usize, i64)> = self
            .linear
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(e, &c)| (e, c))
            .collect();
        for (&(e, f), &c) in &self.quadratic {
            terms.push((products.get(e, f), c));
        }
        LinearRow::new(terms, rhs - self.constant)
    }
}

/// Lazily allocates one product variable per candidate pair.
pub struct ProductIndex<'a> {
    bp: &'a mut BinaryProgram,
    map: BTreeMap<(usize, usize), usize>,
}

impl<'a> ProductIndex<'a> {
    pub fn new(bp: &'a mut BinaryProgram) -> Self {
        ProductIndex {
            bp,
            map: BTreeMap::new(),
        }
    }

    pub fn get(&mut self, e: usize, f: usize) -> usize {
        let key = (e.min(f), e.max(f));
        if let Some(&w) = self.map.get(&key) {
            return w;
        }
        let w = self.bp.add_product(key.0, key.1);
        self.map.insert(key, w);
        w
    }
}

/// Row comparing `t` against competitor `p` over the candidate set.
pub fn build_partition_row(
    g: &Graph,
    t: &Partition,
    p: &Partition,
    cand: &CandidateEdgeSet,
) -> Result<PartitionRow> {
    let n = g.node_count();
    t.check_len(n)?;
    p.check_len(n)?;
    if t == p {
        return Err(Error::VacuousRow);
    }
    let m = g.total_weight() as i64;
    let d: Vec<i64> = g.degrees().iter().map(|&x| x as i64).collect();
    let c = |i: usize, j: usize| t.same_cluster(i, j) as i64 - p.same_cluster(i, j) as i64;

    let mut constant = 0i64;
    let mut adjacency_sum = 0i64;
    // col[j] = Σ_{i≠j} c_ij d_i
    let mut col = vec![0i64; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let cij = c(i, j);
            if cij == 0 {
                continue;
            }
            let a = g.weight(i, j) as i64;
            constant += cij * (2 * m * a - d[i] * d[j]);
            adjacency_sum += cij * a;
            col[j] += cij * d[i];
        }
    }
    let pairs = cand.pairs();
    let linear: Vec<i64> = pairs
        .iter()
        .map(|&(a, b)| {
            let ce = c(a, b);
            // z² = z folds the square term 2·c_ab into the linear part
            2 * adjacency_sum + 4 * m * ce - 2 * (col[a] + col[b]) + 2 * ce
        })
        .collect();
    let mut quadratic = BTreeMap::new();
    for e in 0..pairs.len() {
        for f in e + 1..pairs.len() {
            let (a, b) = pairs[e];
            let (x, y) = pairs[f];
            let mut cross = 0;
            for i in [a, b] {
                for j in [x, y] {
                    if i != j {
                        cross += c(i, j);
                    }
                }
            }
            let coef = 4 * c(a, b) + 4 * c(x, y) - 2 * cross;
            if coef != 0 {
                quadratic.insert((e, f), coef);
            }
        }
    }
    Ok(PartitionRow {
        constant,
        linear,
        quadratic,
    })
}

/// One coupling per unordered candidate pair, self pairs included, with
/// product variables numbered after the candidates.
pub fn mccormick_couplings(cand: &CandidateEdgeSet) -> Vec<Coupling> {
    let c = cand.len();
    let mut out = Vec::new();
    for e in 0..c {
        for f in e..c {
            out.push(Coupling {
                product: c + out.len(),
                left: e,
                right: f,
            });
        }
    }
    out
}

/// Competitor built from `t` and a better partition `pbar` around a node
/// `v` whose `pbar` cluster differs from its ground-truth cluster: either `v` moves to the ground-truth cluster of
/// the smallest node it shares a `pbar` cluster with, or (when its `pbar`
/// cluster sits inside its ground-truth cluster) that cluster is split.
pub fn derive_swap_partition(t: &Partition, pbar: &Partition, v: usize) -> Result<Partition> {
    let n = t.len();
    pbar.check_len(n)?;
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    let same_set = (0..n).all(|x| t.same_cluster(v, x) == pbar.same_cluster(v, x));
    if same_set {
        return Err(Error::NotMisclassified(v));
    }
    let home = t.cluster_of(v);
    let outside = (0..n).find(|&w| pbar.same_cluster(v, w) && t.cluster_of(w) != home);
    let mut labels = t.labels().to_vec();
    match outside {
        Some(w) => labels[v] = t.cluster_of(w),
        None => {
            let fresh = t.cluster_count();
            let mut rest = 0;
            for x in 0..n {
                if t.cluster_of(x) == home {
                    if pbar.same_cluster(v, x) {
                        labels[x] = fresh;
                    } else {
                        rest += 1;
                    }
                }
            }
            if rest == 0 {
                return Err(Error::NotMisclassified(v));
            }
        }
    }
    Ok(Partition::from_labels(&labels))
}

/// `t` with cluster `home` split into `home \ part` and `part`; `None` when
/// that would not change `t`.
pub fn split_partition(t: &Partition, part: &[usize]) -> Option<Partition> {
    let home = t.cluster_of(*part.first()?);
    if part.iter().any(|&x| t.cluster_of(x) != home) || part.len() == t.members(home).len() {
        return None;
    }
    let mut labels = t.labels().to_vec();
    for &x in part {
        labels[x] = t.cluster_count();
    }
    Some(Partition::from_labels(&labels))
}

/// Either-or condition on the augmented graph: at least one alternative
/// must hold. Alternatives are rows over candidate variables only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisjunctiveCut {
    pub node: usize,
    /// ground-truth cluster of `node`, without `node`
    pub source: Vec<usize>,
    /// cluster `node` joins in the competing partition
    pub target: Vec<usize>,
    pub rest: Vec<usize>,
    pub alternatives: [LinearRow; 2],
    pub big_m: i64,
}

impl DisjunctiveCut {
    pub fn is_satisfied(&self, z: &[bool]) -> bool {
        self.alternatives.iter().any(|r| r.is_satisfied(z))
    }

    /// Big-M rows with indicator `y`: `y = 0` enforces the first
    /// alternative, `y = 1` the second.
    pub fn indicator_rows(&self, y: usize) -> [LinearRow; 2] {
        let [a, b] = &self.alternatives;
        let mut first = a.terms.clone();
        first.push((y, self.big_m));
        let mut second = b.terms.clone();
        second.push((y, -self.big_m));
        [
            LinearRow::new(first, a.rhs),
            LinearRow::new(second, b.rhs - self.big_m),
        ]
    }
}

/// Which of the two single-move conditions to encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutKind {
    /// `e₁ ≥ e₂ + 1` or `X₂ ≥ X₁`; needs `d_v > 0`.
    StrictEdges,
    /// `e₁ ≥ e₂` or `X₂ ≥ X₁ + 1`.
    StrictVolume,
}

/// Disjunctive cut for the single-node move from `t` to `p_prime`.
pub fn build_disjunctive_cut(
    g: &Graph,
    t: &Partition,
    p_prime: &Partition,
    v: usize,
    cand: &CandidateEdgeSet,
    kind: CutKind,
) -> Result<DisjunctiveCut> {
    let n = g.node_count();
    t.check_len(n)?;
    p_prime.check_len(n)?;
    let home = t.cluster_of(v);
    let target_cluster = (0..n)
        .find(|&x| x != v && p_prime.same_cluster(v, x) && t.cluster_of(x) != home)
        .map(|x| t.cluster_of(x))
        .ok_or(Error::NotSingleMove)?;
    for x in (0..n).filter(|&x| x != v) {
        for y in (x + 1..n).filter(|&y| y != v) {
            if t.same_cluster(x, y) != p_prime.same_cluster(x, y) {
                return Err(Error::NotSingleMove);
            }
        }
        let expect = t.cluster_of(x) == target_cluster;
        if p_prime.same_cluster(v, x) != expect {
            return Err(Error::NotSingleMove);
        }
    }
    if kind == CutKind::StrictEdges && g.degree(v) == 0 {
        return Err(Error::Config(format!(
            "node {v} has degree 0; the strict-edge cut needs a positive degree"
        )));
    }
    // role: 0 = v, 1 = source, 2 = target, 3 = rest
    let role: Vec<u8> = (0..n)
        .map(|x| {
            if x == v {
                0
            } else if t.cluster_of(x) == home {
                1
            } else if t.cluster_of(x) == target_cluster {
                2
            } else {
                3
            }
        })
        .collect();
    // e1 − e2
    let edge_gap = |x: usize, y: usize| -> i64 {
        match (role[x], role[y]) {
            (0, 1) | (1, 0) => 1,
            (0, 2) | (2, 0) => -1,
            _ => 0,
        }
    };
    // X2 − X1 with X = 2E(C) + E(C, rest)
    let volume_gap = |x: usize, y: usize| -> i64 {
        match (role[x], role[y]) {
            (2, 2) => 2,
            (2, 3) | (3, 2) => 1,
            (1, 1) => -2,
            (1, 3) | (3, 1) => -1,
            _ => 0,
        }
    };
    let affine = |f: &dyn Fn(usize, usize) -> i64| -> (i64, Vec<(usize, i64)>) {
        let constant: i64 = g
            .edges()
            .iter()
            .map(|&(x, y, w)| f(x, y) * w as i64)
            .sum();
        let terms = cand
            .pairs()
            .iter()
            .enumerate()
            .map(|(e, &(x, y))| (e, f(x, y)))
            .filter(|t| t.1 != 0)
            .collect();
        (constant, terms)
    };
    let (ec, et) = affine(&edge_gap);
    let (vc, vt) = affine(&volume_gap);
    let (edge_rhs, volume_rhs) = match kind {
        CutKind::StrictEdges => (1, 0),
        CutKind::StrictVolume => (0, 1),
    };
    let members = |r: u8| (0..n).filter(|&x| role[x] == r).collect::<Vec<_>>();
    Ok(DisjunctiveCut {
        node: v,
        source: members(1),
        target: members(2),
        rest: members(3),
        alternatives: [
            LinearRow::new(et, edge_rhs - ec),
            LinearRow::new(vt, volume_rhs - vc),
        ],
        big_m: 2 * (g.total_weight() + cand.total_capacity()) as i64 + 1,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MasterOptions {
    /// Require `t` to beat every pooled partition by a positive margin.
    pub strict: bool,
}

/// Minimise the number of selected candidates subject to one row per pooled
/// partition, the given cuts, extra plain rows and the objective floor.
pub fn assemble_master(
    g: &Graph,
    t: &Partition,
    pool: &[Partition],
    cuts: &[DisjunctiveCut],
    extra_rows: &[LinearRow],
    cand: &CandidateEdgeSet,
    floor: i64,
    opts: MasterOptions,
) -> Result<BinaryProgram> {
    let mut bp = BinaryProgram::with_unit_objective(cand.len());
    bp.objective_floor = floor;
    let rhs = if opts.strict { 1 } else { 0 };
    let mut rows = Vec::with_capacity(pool.len());
    {
        let mut products = ProductIndex::new(&mut bp);
        for p in pool {
            let row = build_partition_row(g, t, p, cand)?;
            rows.push(row.to_linear_row(rhs, &mut products));
        }
    }
    bp.rows = rows;
    bp.rows.extend(extra_rows.iter().cloned());
    for cut in cuts {
        let y = bp.add_var(0);
        bp.rows.extend(cut.indicator_rows(y));
    }
    Ok(bp)
}
