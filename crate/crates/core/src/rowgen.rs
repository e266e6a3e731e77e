//! Row generation: alternate between the master program (cheapest edge set
//! under the rows found so far) and modularity maximisation on the edited
//! graph until the ground truth is confirmed optimal.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::align::{match_clusters, misclassified};
use crate::bip::{solve_min, Budget, LinearRow, SolveStatus};
use crate::error::{Error, Result};
use crate::graph::{EdgeDelta, Graph, Partition};
use crate::heuristics::star_lower_bound;
use crate::master::{
    assemble_master, build_disjunctive_cut, derive_swap_partition, split_partition,
    CandidateEdgeSet, CutKind, DisjunctiveCut, MasterOptions,
};
use crate::modularity::{modularity, ModularityValue};
use crate::search::{is_optimal, maximize_modularity, SearchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Certified with the exact subproblem.
    Optimal,
    /// Converged, but the last check used the heuristic subproblem.
    HeuristicallyVerified,
    Infeasible,
    Limit,
}

impl RunStatus {
    pub fn is_success(self) -> bool {
        matches!(self, RunStatus::Optimal | RunStatus::HeuristicallyVerified)
    }
}

#[derive(Debug, Clone)]
pub struct RowGenConfig {
    /// Add swap partitions, split partitions and disjunctive cuts each round.
    pub augmented: bool,
    pub search: SearchConfig,
    pub master_options: MasterOptions,
    /// Node limit handed to every master solve.
    pub master_nodes: Option<u64>,
    pub max_iterations: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Partitions placed in the pool before the first master solve.
    pub initial_pool: Vec<Partition>,
}

impl Default for RowGenConfig {
    fn default() -> Self {
        RowGenConfig {
            augmented: false,
            search: SearchConfig::default(),
            master_options: MasterOptions::default(),
            master_nodes: None,
            max_iterations: None,
            time_limit: None,
            initial_pool: Vec::new(),
        }
    }
}

impl RowGenConfig {
    pub fn exact(augmented: bool) -> Self {
        RowGenConfig {
            augmented,
            search: SearchConfig::exact(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub master_secs: f64,
    pub subproblem_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: RunStatus,
    pub target: Partition,
    pub delta: EdgeDelta,
    pub iterations: usize,
    pub partition_pool: Vec<Partition>,
    pub cut_count: usize,
    #[serde(skip)]
    pub cuts: Vec<DisjunctiveCut>,
    pub objective_trace: Vec<i64>,
    /// Proven lower bound on the optimal objective.
    pub bound: i64,
    pub q_t_final: Option<ModularityValue>,
    pub q_best_final: Option<ModularityValue>,
    pub exact: bool,
    pub timings: PhaseTimings,
}

impl SolveReport {
    pub fn objective(&self) -> Option<i64> {
        self.status.is_success().then(|| self.delta.magnitude() as i64)
    }
}

/// Adds as few candidate edges as possible so that `t` maximises modularity.
pub fn solve_edge_addition(
    g: &Graph,
    t: &Partition,
    cand: &CandidateEdgeSet,
    cfg: &RowGenConfig,
) -> Result<SolveReport> {
    if g.total_weight() == 0 {
        return Err(Error::EmptyGraph);
    }
    t.check_len(g.node_count())?;
    if let Some(e) = (0..cand.len()).find(|&e| cand.capacity(e) != 1) {
        return Err(Error::Config(format!(
            "candidate {:?} has capacity {}; the exact method handles unit additions only",
            cand.pairs()[e],
            cand.capacity(e)
        )));
    }
    let driver = Driver {
        base: g,
        t,
        cand,
        cfg,
        lazy: &|_| Vec::new(),
        to_delta: &|z| cand.delta_for(z),
    };
    driver.run(0)
}

/// Removes as many edges as possible from a unit-weight graph while its
/// optimal partition stays optimal and every cluster stays connected.
pub fn solve_sparsification(g: &Graph, cfg: &RowGenConfig) -> Result<SolveReport> {
    if g.total_weight() == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some((i, j, w)) = g.edges().into_iter().find(|e| e.2 != 1) {
        return Err(Error::Config(format!(
            "edge ({i}, {j}) has weight {w}; exact sparsification needs unit weights"
        )));
    }
    let t = maximize_modularity(g, &cfg.search)?.partition;
    let cand = CandidateEdgeSet::from_graph_edges(g);
    let base = Graph::empty(g.node_count());
    let clusters = t.clusters();
    let connectivity = |z: &[bool]| connectivity_rows(&base, &cand, &clusters, z);
    let removal = |z: &[bool]| {
        EdgeDelta::from_pairs(
            cand.pairs()
                .iter()
                .zip(z)
                .filter(|(_, &keep)| !keep)
                .map(|(&(i, j), _)| (i, j, -1)),
        )
    };
    let driver = Driver {
        base: &base,
        t: &t,
        cand: &cand,
        cfg,
        lazy: &connectivity,
        to_delta: &removal,
    };
    driver.run(star_lower_bound(&t) as i64)
}

/// Whether `t` is optimal after applying `delta` to `g`.
pub fn verify_certificate(
    g: &Graph,
    t: &Partition,
    delta: &EdgeDelta,
    search: &SearchConfig,
) -> Result<bool> {
    let g2 = g.apply(delta)?;
    if g2.total_weight() == 0 {
        return Ok(false);
    }
    Ok(is_optimal(&g2, t, search)?.optimal)
}

/// For each cluster split into several components by the kept edges, one
/// row per component asking for a kept edge leaving it inside the cluster.
fn connectivity_rows(
    base: &Graph,
    cand: &CandidateEdgeSet,
    clusters: &[Vec<usize>],
    z: &[bool],
) -> Vec<LinearRow> {
    let kept = base
        .apply(&cand.delta_for(z))
        .expect("adding candidate edges cannot fail");
    let mut rows = Vec::new();
    for members in clusters.iter().filter(|c| c.len() > 1) {
        let local = kept.induced(members).components();
        if local.len() < 2 {
            continue;
        }
        for comp in &local {
            let inside: Vec<usize> = comp.iter().map(|&x| members[x]).collect();
            let terms: Vec<(usize, i64)> = cand
                .pairs()
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| {
                    let (ia, ib) = (inside.contains(&a), inside.contains(&b));
                    ia != ib && members.contains(&a) && members.contains(&b)
                })
                .map(|(e, _)| (e, 1))
                .collect();
            rows.push(LinearRow::new(terms, 1));
        }
    }
    rows
}

struct Driver<'a> {
    base: &'a Graph,
    t: &'a Partition,
    cand: &'a CandidateEdgeSet,
    cfg: &'a RowGenConfig,
    lazy: &'a dyn Fn(&[bool]) -> Vec<LinearRow>,
    to_delta: &'a dyn Fn(&[bool]) -> EdgeDelta,
}

struct State {
    pool: Vec<Partition>,
    cuts: Vec<DisjunctiveCut>,
    cut_keys: Vec<(usize, usize, CutKind)>,
    lazy_rows: Vec<LinearRow>,
    trace: Vec<i64>,
    timings: PhaseTimings,
}

impl Driver<'_> {
    fn run(&self, floor0: i64) -> Result<SolveReport> {
        let started = Instant::now();
        let c = self.cand.len();
        let mut st = State {
            pool: Vec::new(),
            cuts: Vec::new(),
            cut_keys: Vec::new(),
            lazy_rows: Vec::new(),
            trace: Vec::new(),
            timings: PhaseTimings::default(),
        };
        for p in &self.cfg.initial_pool {
            p.check_len(self.t.len())?;
            if p != self.t && !st.pool.contains(p) {
                st.pool.push(p.clone());
            }
        }
        let mut floor = floor0;
        let mut iterations = 0;
        loop {
            let remaining = self
                .cfg
                .time_limit
                .map(|lim| lim.saturating_sub(started.elapsed()));
            let out_of_iters = self.cfg.max_iterations.is_some_and(|k| iterations >= k);
            if out_of_iters || remaining == Some(Duration::ZERO) {
                return Ok(self.finish(st, RunStatus::Limit, EdgeDelta::new(), iterations, floor, None, started));
            }
            iterations += 1;

            let t0 = Instant::now();
            let bp = assemble_master(
                self.base,
                self.t,
                &st.pool,
                &st.cuts,
                &st.lazy_rows,
                self.cand,
                floor,
                self.cfg.master_options,
            )?;
            let out = solve_min(
                &bp,
                Budget {
                    max_nodes: self.cfg.master_nodes,
                    time_limit: remaining,
                },
            )?;
            st.timings.master_secs += t0.elapsed().as_secs_f64();
            match out.status {
                SolveStatus::Infeasible => {
                    return Ok(self.finish(st, RunStatus::Infeasible, EdgeDelta::new(), iterations, out.bound, None, started));
                }
                SolveStatus::Limit => {
                    return Ok(self.finish(st, RunStatus::Limit, EdgeDelta::new(), iterations, out.bound.max(floor), None, started));
                }
                SolveStatus::Optimal => {}
            }
            let z = &out.assignment[..c];
            st.trace.push(out.objective_value);
            floor = out.objective_value;

            let extra = (self.lazy)(z);
            if !extra.is_empty() {
                st.lazy_rows.extend(extra);
                continue;
            }

            let t1 = Instant::now();
            let delta = (self.to_delta)(z);
            let gk = self.base.apply(&self.cand.delta_for(z))?;
            let best = maximize_modularity(&gk, &self.cfg.search)?;
            let q_t = modularity(&gk, self.t)?;
            st.timings.subproblem_secs += t1.elapsed().as_secs_f64();
            if q_t >= best.value {
                let status = if best.exact {
                    RunStatus::Optimal
                } else {
                    RunStatus::HeuristicallyVerified
                };
                let qs = Some((q_t, best.value, best.exact));
                return Ok(self.finish(st, status, delta, iterations, floor, qs, started));
            }
            let pbar = best.partition;
            if st.pool.contains(&pbar) {
                return Err(Error::Config(
                    "subproblem returned a partition the master already excludes".into(),
                ));
            }
            st.pool.push(pbar.clone());
            if self.cfg.augmented {
                self.augment(&mut st, &pbar)?;
            }
        }
    }

    fn augment(&self, st: &mut State, pbar: &Partition) -> Result<()> {
        let t = self.t;
        let mm = match_clusters(t, pbar)?;
        for v in misclassified(t, pbar, &mm) {
            let inside = (0..t.len())
                .filter(|&x| pbar.same_cluster(v, x))
                .all(|x| t.same_cluster(v, x));
            if inside {
                continue;
            }
            let moved = derive_swap_partition(t, pbar, v)?;
            if moved == *t {
                continue;
            }
            let target = moved.labels()[v];
            let target_t = (0..t.len())
                .find(|&x| x != v && moved.labels()[x] == target)
                .map(|x| t.cluster_of(x))
                .expect("moved node joins an existing cluster");
            let mut kinds = vec![CutKind::StrictVolume];
            if self.base.degree(v) > 0 {
                kinds.insert(0, CutKind::StrictEdges);
            }
            for kind in kinds {
                let key = (v, target_t, kind);
                if !st.cut_keys.contains(&key) {
                    let cut = build_disjunctive_cut(self.base, t, &moved, v, self.cand, kind)?;
                    st.cut_keys.push(key);
                    st.cuts.push(cut);
                }
            }
            if !st.pool.contains(&moved) {
                st.pool.push(moved);
            }
        }
        for cluster in pbar.clusters() {
            if let Some(split) = split_partition(t, &cluster) {
                if !st.pool.contains(&split) {
                    st.pool.push(split);
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        st: State,
        status: RunStatus,
        delta: EdgeDelta,
        iterations: usize,
        bound: i64,
        qs: Option<(ModularityValue, ModularityValue, bool)>,
        started: Instant,
    ) -> SolveReport {
        let mut timings = st.timings;
        timings.total_secs = started.elapsed().as_secs_f64();
        SolveReport {
            status,
            target: self.t.clone(),
            delta,
            iterations,
            partition_pool: st.pool,
            cut_count: st.cuts.len(),
            cuts: st.cuts,
            objective_trace: st.trace,
            bound,
            q_t_final: qs.map(|q| q.0),
            q_best_final: qs.map(|q| q.1),
            exact: qs.is_some_and(|q| q.2),
            timings,
        }
    }
}
