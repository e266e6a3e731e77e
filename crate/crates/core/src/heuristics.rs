//! Greedy edge addition, greedy edge removal under several orderings,
//! post-processing of added edges, and the star lower bound.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{match_clusters, misclassified};
use crate::error::{Error, Result};
use crate::graph::{EdgeDelta, Graph, Partition};
use crate::modularity::{delta_v_score, modularity, modularity_matrix};
use crate::rowgen::{PhaseTimings, RunStatus, SolveReport};
use crate::search::{is_optimal, maximize_modularity, SearchConfig};

/// Upper bounds on pair weights in weighted mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Uniform(u64),
    /// Pairs missing from the map cannot receive weight.
    PerPair(BTreeMap<(usize, usize), u64>),
}

impl Capacity {
    pub fn limit(&self, i: usize, j: usize) -> u64 {
        match self {
            Capacity::Uniform(u) => *u,
            Capacity::PerPair(map) => map.get(&(i.min(j), i.max(j))).copied().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalRule {
    /// Lexicographic edge order every pass.
    InputOrder,
    /// Fresh seeded shuffle every pass.
    Shuffled,
    /// Descending modularity-matrix entry of the original graph.
    StaticModularity,
    /// Descending modularity-matrix entry, recomputed at the start of each pass.
    DynamicModularity,
}

impl RemovalRule {
    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            1 => Ok(RemovalRule::InputOrder),
            2 => Ok(RemovalRule::Shuffled),
            3 => Ok(RemovalRule::StaticModularity),
            4 => Ok(RemovalRule::DynamicModularity),
            _ => Err(Error::Config(format!("removal rule must be 1-4, got {k}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            RemovalRule::InputOrder => 1,
            RemovalRule::Shuffled => 2,
            RemovalRule::StaticModularity => 3,
            RemovalRule::DynamicModularity => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub weighted: bool,
    pub capacity: Capacity,
    pub removal_rule: RemovalRule,
    pub seed: u64,
    pub search: SearchConfig,
    /// Stop the addition loop after this many additions.
    pub max_steps: Option<usize>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            weighted: false,
            capacity: Capacity::Uniform(10),
            removal_rule: RemovalRule::InputOrder,
            seed: 0,
            search: SearchConfig::default(),
            max_steps: None,
        }
    }
}

impl HeuristicConfig {
    pub fn exact() -> Self {
        HeuristicConfig {
            search: SearchConfig::exact(),
            ..Default::default()
        }
    }
}

/// `n − k`: edges needed for every cluster to be a star.
pub fn star_lower_bound(t: &Partition) -> usize {
    t.len() - t.cluster_count()
}

/// Orders `m` by the share of ground-truth co-members missing from the
/// node's cluster in `p`, largest first, ties by node index.
pub fn order_misclassified(t: &Partition, p: &Partition, m: &[usize]) -> Result<Vec<usize>> {
    p.check_len(t.len())?;
    let mut keyed = Vec::with_capacity(m.len());
    for &u in m {
        let home = t.members(t.cluster_of(u));
        if home.len() == 1 {
            return Err(Error::SingletonTruth(u));
        }
        let missing = home.iter().filter(|&&x| !p.same_cluster(u, x)).count() as u64;
        keyed.push((u, missing, home.len() as u64 - 1));
    }
    keyed.sort_by(|a, b| match (b.1 * a.2).cmp(&(a.1 * b.2)) {
        Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    Ok(keyed.into_iter().map(|k| k.0).collect())
}

/// Adds one unit at a time until `t` is optimal.
pub fn heuristic_edge_addition(
    g: &Graph,
    t: &Partition,
    cfg: &HeuristicConfig,
) -> Result<(EdgeDelta, SolveReport)> {
    if g.total_weight() == 0 {
        return Err(Error::EmptyGraph);
    }
    t.check_len(g.node_count())?;
    if cfg.weighted {
        if let Some((i, j, w)) = g.edges().into_iter().find(|&(i, j, w)| w > cfg.capacity.limit(i, j)) {
            return Err(Error::Config(format!(
                "edge ({i}, {j}) weight {w} exceeds its capacity"
            )));
        }
    }
    let started = Instant::now();
    let mut current = g.clone();
    let mut delta = EdgeDelta::new();
    let mut pool = Vec::new();
    let mut trace = Vec::new();
    let mut sub_secs = 0.0;
    let mut iterations = 0;
    let status = loop {
        iterations += 1;
        let t0 = Instant::now();
        let best = maximize_modularity(&current, &cfg.search)?;
        let q_t = modularity(&current, t)?;
        sub_secs += t0.elapsed().as_secs_f64();
        trace.push(delta.magnitude() as i64);
        if q_t >= best.value {
            let status = if best.exact {
                RunStatus::Optimal
            } else {
                RunStatus::HeuristicallyVerified
            };
            break (status, Some((q_t, best.value, best.exact)));
        }
        if cfg.max_steps.is_some_and(|k| delta.len() >= k) {
            break (RunStatus::Limit, Some((q_t, best.value, best.exact)));
        }
        let p = best.partition;
        let mm = match_clusters(t, &p)?;
        let m = misclassified(t, &p, &mm);
        pool.push(p.clone());
        let order = match order_misclassified(t, &p, &m) {
            Ok(o) => o,
            Err(Error::SingletonTruth(_)) => break (RunStatus::Infeasible, None),
            Err(e) => return Err(e),
        };
        let open = |u: usize, v: usize| {
            if cfg.weighted {
                current.weight(u, v) < cfg.capacity.limit(u, v)
            } else {
                !current.is_adjacent(u, v)
            }
        };
        let mut choice = None;
        for relaxed in [false, true] {
            for &u in &order {
                let cands: Vec<usize> = (0..current.node_count())
                    .filter(|&v| v != u && t.same_cluster(u, v))
                    .filter(|&v| relaxed || !p.same_cluster(u, v))
                    .filter(|&v| open(u, v))
                    .collect();
                // min_by_key keeps the first minimum, i.e. the lowest index
                if let Some(v) = cands.into_iter().min_by_key(|&v| delta_v_score(&current, t, u, v)) {
                    choice = Some((u, v));
                    break;
                }
            }
            if choice.is_some() {
                break;
            }
        }
        let Some((u, v)) = choice else {
            break (RunStatus::Infeasible, None);
        };
        delta.push(u, v, 1);
        current = current.apply(&EdgeDelta::from_pairs([(u, v, 1)]))?;
    };
    let (status, qs) = status;
    let report = SolveReport {
        status,
        target: t.clone(),
        delta: delta.clone(),
        iterations,
        partition_pool: pool,
        cut_count: 0,
        cuts: Vec::new(),
        bound: 0,
        objective_trace: trace,
        q_t_final: qs.map(|q| q.0),
        q_best_final: qs.map(|q| q.1),
        exact: qs.is_some_and(|q| q.2),
        timings: PhaseTimings {
            master_secs: 0.0,
            subproblem_secs: sub_secs,
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    Ok((delta, report))
}

/// Whether `t` is the partition the subproblem returns on `g`.
fn is_argmax(g: &Graph, t: &Partition, search: &SearchConfig) -> Result<bool> {
    if g.total_weight() == 0 {
        return Ok(false);
    }
    Ok(maximize_modularity(g, search)?.partition == *t)
}

/// Removes edges (or weight units) while the subproblem keeps returning `t`.
pub fn heuristic_edge_removal(
    g: &Graph,
    t: &Partition,
    cfg: &HeuristicConfig,
) -> Result<(EdgeDelta, SolveReport)> {
    if g.total_weight() == 0 {
        return Err(Error::EmptyGraph);
    }
    t.check_len(g.node_count())?;
    let started = Instant::now();
    let first = maximize_modularity(g, &cfg.search)?;
    if first.partition != *t {
        return Err(Error::NotOptimal);
    }
    let static_scores = modularity_matrix(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = g.clone();
    let mut removed = EdgeDelta::new();
    let mut trace = Vec::new();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut order: Vec<(usize, usize)> = current.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        match cfg.removal_rule {
            RemovalRule::InputOrder => {}
            RemovalRule::Shuffled => order.shuffle(&mut rng),
            RemovalRule::StaticModularity => {
                order.sort_by(|a, b| static_scores.scaled(b.0, b.1).cmp(&static_scores.scaled(a.0, a.1)).then(a.cmp(b)));
            }
            RemovalRule::DynamicModularity => {
                let mm = modularity_matrix(&current)?;
                order.sort_by(|a, b| mm.scaled(b.0, b.1).cmp(&mm.scaled(a.0, a.1)).then(a.cmp(b)));
            }
        }
        let mut progress = false;
        for (i, j) in order {
            let amount = if cfg.weighted { 1 } else { current.weight(i, j) as i64 };
            let step = EdgeDelta::from_pairs([(i, j, -amount)]);
            let trial = current.apply(&step)?;
            if is_argmax(&trial, t, &cfg.search)? {
                current = trial;
                removed.push(i, j, -amount);
                progress = true;
            }
        }
        trace.push(current.total_weight() as i64);
        if !progress {
            break;
        }
    }
    let q = modularity(&current, t)?;
    let report = SolveReport {
        status: if first.exact {
            RunStatus::Optimal
        } else {
            RunStatus::HeuristicallyVerified
        },
        target: t.clone(),
        delta: removed.clone(),
        iterations: passes,
        partition_pool: Vec::new(),
        cut_count: 0,
        cuts: Vec::new(),
        bound: star_lower_bound(t) as i64,
        objective_trace: trace,
        q_t_final: Some(q),
        q_best_final: Some(q),
        exact: first.exact,
        timings: PhaseTimings {
            master_secs: 0.0,
            subproblem_secs: 0.0,
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    Ok((removed, report))
}

/// Drops added units that are not needed, scanning them in the order they
/// were added and repeating until a full scan removes nothing.
pub fn post_process(
    g: &Graph,
    t: &Partition,
    added: &EdgeDelta,
    cfg: &HeuristicConfig,
) -> Result<EdgeDelta> {
    let mut current = g.apply(added)?;
    if !is_optimal(&current, t, &cfg.search)?.optimal {
        return Err(Error::NotOptimal);
    }
    let mut units: Vec<(usize, usize)> = Vec::new();
    for &(i, j, w) in added.pairs() {
        if w < 0 {
            return Err(Error::Config("post-processing expects additions only".into()));
        }
        units.extend(std::iter::repeat((i, j)).take(w as usize));
    }
    loop {
        let mut progress = false;
        let mut k = 0;
        while k < units.len() {
            let (i, j) = units[k];
            let trial = current.apply(&EdgeDelta::from_pairs([(i, j, -1)]))?;
            if trial.total_weight() > 0 && is_optimal(&trial, t, &cfg.search)?.optimal {
                current = trial;
                units.remove(k);
                progress = true;
            } else {
                k += 1;
            }
        }
        if !progress {
            break;
        }
    }
    Ok(EdgeDelta::from_pairs(units.into_iter().map(|(i, j)| (i, j, 1))))
}

/// Removes edges joining different clusters of `t`. Unless `bulk` is set, a
/// removal is only kept when `t` remains the subproblem's answer: first all
/// at once, then edge by edge in lexicographic order.
pub fn cross_cluster_preprocess(
    g: &Graph,
    t: &Partition,
    search: &SearchConfig,
    bulk: bool,
) -> Result<EdgeDelta> {
    t.check_len(g.node_count())?;
    let cross: Vec<(usize, usize, i64)> = g
        .edges()
        .into_iter()
        .filter(|&(i, j, _)| !t.same_cluster(i, j))
        .map(|(i, j, w)| (i, j, -(w as i64)))
        .collect();
    let all = EdgeDelta::from_pairs(cross.iter().copied());
    if bulk || all.is_empty() {
        return Ok(all);
    }
    if !is_argmax(g, t, search)? {
        return Err(Error::NotOptimal);
    }
    if is_argmax(&g.apply(&all)?, t, search)? {
        return Ok(all);
    }
    let mut current = g.clone();
    let mut kept = EdgeDelta::new();
    for (i, j, w) in cross {
        let step = EdgeDelta::from_pairs([(i, j, w)]);
        let trial = current.apply(&step)?;
        if is_argmax(&trial, t, search)? {
            current = trial;
            kept.push(i, j, w);
        }
    }
    Ok(kept)
}
