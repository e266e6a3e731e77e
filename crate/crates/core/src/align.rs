//! Matching ground-truth clusters to the clusters of a competing partition
//! and extracting the nodes the competitor gets wrong.

use serde::Serialize;

use crate::error::Result;
use crate::graph::Partition;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterMatching {
    /// `(t_cluster, p_cluster)` pairs with positive overlap, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_t: Vec<usize>,
    pub unmatched_p: Vec<usize>,
    pub weight: u64,
}

impl ClusterMatching {
    /// The `p` cluster matched to t-cluster `c`, if any.
    pub fn partner_of_t(&self, c: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == c).map(|p| p.1)
    }
}

/// Overlap counts `|C^T_i ∩ C^P_j|`.
pub fn overlap_matrix(t: &Partition, p: &Partition) -> Vec<Vec<u64>> {
    let mut w = vec![vec![0u64; p.cluster_count()]; t.cluster_count()];
    for v in 0..t.len() {
        w[t.cluster_of(v)][p.cluster_of(v)] += 1;
    }
    w
}

/// Maximum-weight matching between the clusters of `t` and `p`. Among all
/// maximum matchings (restricted to positive-overlap pairs) the
/// lexicographically smallest sorted pair list is returned.
pub fn match_clusters(t: &Partition, p: &Partition) -> Result<ClusterMatching> {
    p.check_len(t.len())?;
    let w = overlap_matrix(t, p);
    let (kt, kp) = (t.cluster_count(), p.cluster_count());
    let target = max_weight(&w, 0, &vec![false; kp]);

    let mut pairs = Vec::new();
    let mut used_col = vec![false; kp];
    let mut fixed = 0u64;
    let mut next_row = 0;
    while fixed < target {
        let mut chosen = None;
        'rows: for i in next_row..kt {
            for j in 0..kp {
                if used_col[j] || w[i][j] == 0 {
                    continue;
                }
                used_col[j] = true;
                let rest = max_weight(&w, i + 1, &used_col);
                used_col[j] = false;
                if fixed + w[i][j] + rest == target {
                    chosen = Some((i, j));
                    break 'rows;
                }
            }
        }
        let (i, j) = chosen.expect("maximum matching must be reachable");
        used_col[j] = true;
        fixed += w[i][j];
        pairs.push((i, j));
        next_row = i + 1;
    }
    let unmatched_t = (0..kt).filter(|&i| !pairs.iter().any(|p| p.0 == i)).collect();
    let unmatched_p = (0..kp).filter(|&j| !used_col[j]).collect();
    Ok(ClusterMatching {
        pairs,
        unmatched_t,
        unmatched_p,
        weight: target,
    })
}

/// Nodes whose `t`-cluster and `p`-cluster are not matched to each other,
/// in ascending order. This includes every member of an unmatched cluster
/// on either side.
pub fn misclassified(t: &Partition, p: &Partition, mm: &ClusterMatching) -> Vec<usize> {
    let mut partner = vec![None; t.cluster_count()];
    for &(i, j) in &mm.pairs {
        partner[i] = Some(j);
    }
    (0..t.len())
        .filter(|&v| partner[t.cluster_of(v)] != Some(p.cluster_of(v)))
        .collect()
}

/// Convenience wrapper running both steps.
pub fn misclassified_nodes(t: &Partition, p: &Partition) -> Result<Vec<usize>> {
    let mm = match_clusters(t, p)?;
    Ok(misclassified(t, p, &mm))
}

/// Maximum matching weight using rows `from..` and the columns not in `used`.
fn max_weight(w: &[Vec<u64>], from: usize, used: &[bool]) -> u64 {
    let rows: Vec<usize> = (from..w.len()).collect();
    let cols: Vec<usize> = (0..used.len()).filter(|&j| !used[j]).collect();
    if rows.is_empty() || cols.is_empty() {
        return 0;
    }
    let size = rows.len().max(cols.len());
    let mut cost = vec![vec![0i64; size]; size];
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            cost[a][b] = -(w[i][j] as i64);
        }
    }
    let assignment = hungarian(&cost);
    assignment
        .iter()
        .enumerate()
        .map(|(a, &b)| -cost[a][b])
        .sum::<i64>() as u64
}

/// Minimum-cost perfect assignment on a square matrix; returns the column
/// assigned to each row.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = i64::MAX / 4;
    // 1-based potentials and matching as in the classic shortest
    // augmenting path formulation.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0usize; n];
    for j in 1..=n {
        ans[p[j] - 1] = j - 1;
    }
    ans
}
