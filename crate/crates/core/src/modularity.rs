//! Exact modularity evaluation.
//!
//! All values are exact rationals. Internally most routines work with the
//! integer *scaled score* `4m² Q = Σ_C (4m·E(C) − D(C)²)`, where `E(C)` is
//! the weight inside cluster `C` and `D(C)` its degree total.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};

/// Exact modularity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModularityValue(Ratio<i128>);

impl ModularityValue {
    pub fn new(numer: i128, denom: i128) -> Self {
        ModularityValue(Ratio::new(numer, denom))
    }

    pub fn from_ratio(r: Ratio<i128>) -> Self {
        ModularityValue(r)
    }

    pub fn zero() -> Self {
        ModularityValue(Ratio::from_integer(0))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<i128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl PartialOrd for ModularityValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ModularityValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl std::ops::Sub for ModularityValue {
    type Output = ModularityValue;
    fn sub(self, rhs: Self) -> Self {
        ModularityValue(self.0 - rhs.0)
    }
}

impl fmt::Display for ModularityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.6})", self.numer(), self.denom(), self.to_f64())
    }
}

impl Serialize for ModularityValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ModularityValue", 3)?;
        st.serialize_field("numer", &self.numer().to_string())?;
        st.serialize_field("denom", &self.denom().to_string())?;
        st.serialize_field("value", &self.to_f64())?;
        st.end()
    }
}

fn require_edges(g: &Graph) -> Result<i128> {
    match g.total_weight() {
        0 => Err(Error::EmptyGraph),
        m => Ok(m as i128),
    }
}

/// Per-cluster internal weight `E(C)` and degree total `D(C)`.
pub(crate) fn cluster_stats(g: &Graph, p: &Partition) -> (Vec<i128>, Vec<i128>) {
    let k = p.cluster_count();
    let mut internal = vec![0i128; k];
    let mut degree = vec![0i128; k];
    let n = g.node_count();
    for i in 0..n {
        let ci = p.cluster_of(i);
        degree[ci] += g.degree(i) as i128;
        for j in i + 1..n {
            if p.cluster_of(j) == ci {
                internal[ci] += g.weight(i, j) as i128;
            }
        }
    }
    (internal, degree)
}

/// `4m² Q` as an integer. Requires a partition of matching length; does not
/// check `m > 0`.
pub fn scaled_score(g: &Graph, p: &Partition) -> i128 {
    let four_m = 4 * g.total_weight() as i128;
    let (internal, degree) = cluster_stats(g, p);
    internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| four_m * e - d * d)
        .sum()
}

/// Scaled score as a modularity value.
pub(crate) fn from_scaled(score: i128, m: i128) -> ModularityValue {
    ModularityValue::new(score, 4 * m * m)
}

/// Modularity in the cluster-sum form
/// `Σ_C ( E(C)/m − ((E(C) + Σ_C' E(C,C')) / 2m)² )`, where the inner sum
/// counts `E(C)` once more through `C' = C`.
pub fn modularity(g: &Graph, p: &Partition) -> Result<ModularityValue> {
    let m = require_edges(g)?;
    p.check_len(g.node_count())?;
    let k = p.cluster_count();
    // between[a][b]: weight between clusters a and b (a != b); diagonal holds E(C).
    let mut between = vec![vec![0i128; k]; k];
    for (i, j, w) in g.edges() {
        let (a, b) = (p.cluster_of(i), p.cluster_of(j));
        between[a][b] += w as i128;
        if a != b {
            between[b][a] += w as i128;
        }
    }
    let mut q = Ratio::from_integer(0i128);
    for c in 0..k {
        let e_c = between[c][c];
        let touching: i128 = e_c + between[c].iter().sum::<i128>();
        q += Ratio::new(e_c, m) - Ratio::new(touching * touching, 4 * m * m);
    }
    Ok(ModularityValue(q))
}

/// Modularity in the pairwise form
/// `(1/2m) Σ_{i,j} (A_ij − d_i d_j / 2m)(1 − x_ij)`.
pub fn modularity_pairwise(g: &Graph, p: &Partition) -> Result<ModularityValue> {
    let m = require_edges(g)?;
    p.check_len(g.node_count())?;
    let n = g.node_count();
    let two_m = 2 * m;
    let mut acc = 0i128;
    for i in 0..n {
        for j in 0..n {
            if p.same_cluster(i, j) {
                acc += two_m * g.weight(i, j) as i128 - g.degree(i) as i128 * g.degree(j) as i128;
            }
        }
    }
    Ok(ModularityValue::new(acc, two_m * two_m))
}

/// Modularity matrix `M_ij = A_ij − d_i d_j / 2m`, stored as integer
/// numerators over the common denominator `2m`.
#[derive(Debug, Clone)]
pub struct ModularityMatrix {
    n: usize,
    two_m: i128,
    scaled: Vec<i128>,
}

impl ModularityMatrix {
    pub fn entry(&self, i: usize, j: usize) -> Ratio<i128> {
        Ratio::new(self.scaled[i * self.n + j], self.two_m)
    }

    /// `2m · M_ij`, convenient for exact ordering.
    pub fn scaled(&self, i: usize, j: usize) -> i128 {
        self.scaled[i * self.n + j]
    }

    pub fn size(&self) -> usize {
        self.n
    }
}

pub fn modularity_matrix(g: &Graph) -> Result<ModularityMatrix> {
    let m = require_edges(g)?;
    let n = g.node_count();
    let two_m = 2 * m;
    let mut scaled = vec![0i128; n * n];
    for i in 0..n {
        for j in 0..n {
            scaled[i * n + j] =
                two_m * g.weight(i, j) as i128 - g.degree(i) as i128 * g.degree(j) as i128;
        }
    }
    Ok(ModularityMatrix { n, two_m, scaled })
}

/// `Σ_C Σ_{x,y∈C} ((−8m² − 8m) A_xy + (8m + 4) d_x d_y)`, the term shared by
/// both closed forms.
fn global_cluster_term(g: &Graph, p: &Partition, m: i128) -> i128 {
    let a_coef = -8 * m * m - 8 * m;
    let d_coef = 8 * m + 4;
    let mut acc = 0i128;
    for members in p.clusters() {
        for &x in &members {
            for &y in &members {
                acc += a_coef * g.weight(x, y) as i128
                    + d_coef * g.degree(x) as i128 * g.degree(y) as i128;
            }
        }
    }
    acc
}

fn closed_form_denominator(m: i128) -> i128 {
    let two_m = 2 * m;
    two_m * two_m * (two_m + 2) * (two_m + 2)
}

fn check_nodes(g: &Graph, p: &Partition, u: usize, v: usize) -> Result<()> {
    p.check_len(g.node_count())?;
    for node in [u, v] {
        if node >= g.node_count() {
            return Err(Error::NodeOutOfRange {
                node,
                n: g.node_count(),
            });
        }
    }
    if u == v {
        return Err(Error::LoopEdge(u));
    }
    Ok(())
}

/// Change in `Q_p` from adding one unit of weight between `u` and `v`, both in
/// the same cluster, via the closed form over `(2m)²(2m+2)²`.
pub fn delta_q_within(g: &Graph, p: &Partition, u: usize, v: usize) -> Result<ModularityValue> {
    let m = require_edges(g)?;
    check_nodes(g, p, u, v)?;
    if !p.same_cluster(u, v) {
        return Err(Error::DifferentClusters(u, v));
    }
    let c1 = p.cluster_of(u);
    let deg_c1: i128 = p.members(c1).iter().map(|&x| g.degree(x) as i128).sum();
    let numer = 16 * m * m * m - 16 * m * m * deg_c1 + global_cluster_term(g, p, m);
    Ok(ModularityValue::new(numer, closed_form_denominator(m)))
}

/// Change in `Q_p` from adding one unit of weight between `u` and `v` in
/// different clusters.
pub fn delta_q_between(g: &Graph, p: &Partition, u: usize, v: usize) -> Result<ModularityValue> {
    let m = require_edges(g)?;
    check_nodes(g, p, u, v)?;
    if p.same_cluster(u, v) {
        return Err(Error::SameCluster(u, v));
    }
    let deg_of = |c: usize| -> i128 { p.members(c).iter().map(|&x| g.degree(x) as i128).sum() };
    let d1 = deg_of(p.cluster_of(u));
    let d2 = deg_of(p.cluster_of(v));
    let numer = -8 * m * m - 8 * m * m * d1 - 8 * m * m * d2 + global_cluster_term(g, p, m);
    Ok(ModularityValue::new(numer, closed_form_denominator(m)))
}

/// Dispatches to the within- or between-cluster closed form.
pub fn delta_q(g: &Graph, p: &Partition, u: usize, v: usize) -> Result<ModularityValue> {
    if p.same_cluster(u, v) {
        delta_q_within(g, p, u, v)
    } else {
        delta_q_between(g, p, u, v)
    }
}

/// Local endpoint score for choosing `v` when adding an edge at `u`:
///
/// `δ_v = (−8m² − 8m)A_vv − 16m² d_v + 2 Σ_{y∈C, y≠v} ((−8m² − 8m)A_vy + (8m+4) d_v d_y − 4m² d_y)`
///
/// with `C` the cluster of `u` in `t`. The constant `16m³ + 4m²` is dropped.
/// Smaller is better.
pub fn delta_v_score(g: &Graph, t: &Partition, u: usize, v: usize) -> i128 {
    let m = g.total_weight() as i128;
    let a_coef = -8 * m * m - 8 * m;
    let dv = g.degree(v) as i128;
    let c = t.cluster_of(u);
    let mut sum = 0i128;
    for y in (0..g.node_count()).filter(|&y| y != v && t.cluster_of(y) == c) {
        let dy = g.degree(y) as i128;
        sum += a_coef * g.weight(v, y) as i128 + (8 * m + 4) * dv * dy - 4 * m * m * dy;
    }
    a_coef * g.weight(v, v) as i128 - 16 * m * m * dv + 2 * sum
}
