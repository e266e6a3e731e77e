//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any hard criterion fails. Criterion 10 is report-only.

mod common;

use common::*;
use modforce::align::misclassified_nodes;
use modforce::bip::{solve_min, BinaryProgram, Budget, LinearRow, SolveStatus};
use modforce::heuristics::{
    cross_cluster_preprocess, heuristic_edge_addition, heuristic_edge_removal, post_process,
    star_lower_bound, HeuristicConfig, RemovalRule,
};
use modforce::io::{demo_fixture, figure1_from, karate, karate_optimum, FixtureName};
use modforce::master::{build_partition_row, CandidateEdgeSet};
use modforce::modularity::{delta_q_between, delta_q_within};
use modforce::rowgen::{solve_edge_addition, verify_certificate, RowGenConfig};
use modforce::search::maximize_modularity;
use modforce::{modularity, EdgeDelta, Graph, Partition, RunStatus, SearchConfig, SolveReport};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Verdict {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Verdict { passed, detail: detail.into(), notes: Vec::new() }
    }
}

/// Karate's best-known four-community split, as 1-based node labels.
const KARATE_FOUR: [&[usize]; 4] = [
    &[1, 2, 3, 4, 8, 12, 13, 14, 18, 20, 22],
    &[5, 6, 7, 11, 17],
    &[9, 10, 15, 16, 19, 21, 23, 27, 30, 31, 33, 34],
    &[24, 25, 26, 28, 29, 32],
];

fn canonical_karate() -> Partition {
    let clusters: Vec<Vec<usize>> = KARATE_FOUR.iter().map(|c| c.iter().map(|x| x - 1).collect()).collect();
    Partition::from_clusters(34, &clusters).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn figure2_values() -> Verdict {
    let fx = demo_fixture(FixtureName::Figure2).unwrap();
    let g = &fx.graph.graph;
    let q = modularity(g, &fx.partition).unwrap().to_f64();
    let g2 = g.apply(&EdgeDelta::from_pairs([(12, 15, 1)])).unwrap();
    let q2 = modularity(&g2, &fx.partition).unwrap().to_f64();
    Verdict::new(
        close(q, 0.1424, 5e-5) && close(q2, 0.1531, 5e-5),
        format!("Q = {q:.5} (target 0.1424), with endpoint edge Q = {q2:.5} (target 0.1531)"),
    )
}

fn figure1_values() -> Verdict {
    let opt = karate_optimum(&SearchConfig::default()).unwrap();
    let canonical = opt == canonical_karate();
    let fx = figure1_from(&opt);
    let g = &fx.graph.graph;
    let q = modularity(g, &fx.partition).unwrap().to_f64();
    let n = g.node_count();
    let mut nearest = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            if fx.partition.same_cluster(i, j) && !g.is_adjacent(i, j) {
                let g2 = g.apply(&EdgeDelta::from_pairs([(i, j, 1)])).unwrap();
                let q2 = modularity(&g2, &fx.partition).unwrap().to_f64();
                if (q2 - 0.6724).abs() < (nearest - 0.6724).abs() {
                    nearest = q2;
                }
            }
        }
    }
    let mut v = Verdict::new(
        canonical && close(q, 0.6753, 5e-5) && close(nearest, 0.6724, 1e-3),
        format!("Q = {q:.5} (target 0.6753), closest within-cluster addition Q = {nearest:.5} (target 0.6724)"),
    );
    if !canonical {
        v.notes.push(format!(
            "computed karate optimum differs from the canonical four-community split: {:?}",
            opt.clusters()
        ));
    }
    v
}

fn star_bound() -> Verdict {
    let opt = karate_optimum(&SearchConfig::default()).unwrap();
    let lb = star_lower_bound(&opt);
    Verdict::new(
        lb == 30,
        format!("star lower bound = {lb} (target 30) with {} clusters", opt.cluster_count()),
    )
}

fn closed_forms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    let mut bad = 0;
    while checked < 600 {
        let n = rng.gen_range(2..=10);
        let g = random_graph(&mut rng, n, 0.4, 3);
        if g.total_weight() == 0 {
            continue;
        }
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n.min(4))).collect();
        let p = Partition::from_labels(&labels);
        let u = rng.gen_range(0..n);
        let v = (u + rng.gen_range(1..n)) % n;
        let g2 = g.apply(&EdgeDelta::from_pairs([(u, v, 1)])).unwrap();
        let direct = q_exact(&g2, p.labels()) - q_exact(&g, p.labels());
        let closed = if p.same_cluster(u, v) {
            delta_q_within(&g, &p, u, v).unwrap()
        } else {
            delta_q_between(&g, &p, u, v).unwrap()
        };
        if closed.ratio() != direct {
            bad += 1;
        }
        checked += 1;
    }
    Verdict::new(bad == 0, format!("{checked} graphs, {bad} mismatches"))
}

fn row_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut bad = 0;
    while checked < 600 {
        let n = rng.gen_range(2..=8);
        let g = random_graph(&mut rng, n, 0.35, 1);
        let t = Partition::from_labels(&(0..n).map(|_| rng.gen_range(0..3)).collect::<Vec<_>>());
        let p = Partition::from_labels(&(0..n).map(|_| rng.gen_range(0..3)).collect::<Vec<_>>());
        if t == p {
            continue;
        }
        let mut free: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.is_adjacent(i, j))
            .collect();
        free.shuffle(&mut rng);
        free.truncate(rng.gen_range(0..=8));
        let cand = CandidateEdgeSet::for_addition(&g, &free).unwrap();
        let z: Vec<bool> = (0..cand.len()).map(|_| rng.gen_bool(0.5)).collect();
        let g2 = g.apply(&cand.delta_for(&z)).unwrap();
        if g2.total_weight() == 0 {
            continue;
        }
        let row = build_partition_row(&g, &t, &p, &cand).unwrap();
        let value = row.value(&z) as i128;
        let m = g2.total_weight() as i128;
        let gap = q_exact(&g2, t.labels()) - q_exact(&g2, p.labels());
        let expected = gap * Ratio::from_integer(4 * m * m);
        let gap_sign = if gap > Ratio::from_integer(0) { 1 } else if gap < Ratio::from_integer(0) { -1 } else { 0 };
        if Ratio::from_integer(value) != expected || value.signum() != gap_sign {
            bad += 1;
        }
        checked += 1;
    }
    Verdict::new(bad == 0, format!("{checked} cases, {bad} mismatches"))
}

struct OracleRun {
    inst: AdditionInstance,
    oracle: AdditionOracle,
    cand: CandidateEdgeSet,
    ip: SolveReport,
    ip_plus: SolveReport,
}

fn addition_family() -> Vec<OracleRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    (0..36)
        .map(|_| {
            let inst = addition_instance(&mut rng, 8, 10);
            let oracle = solve_addition_by_enumeration(&inst);
            let cand = CandidateEdgeSet::for_addition(&inst.graph, &inst.pairs).unwrap();
            let ip = solve_edge_addition(&inst.graph, &inst.target, &cand, &RowGenConfig::exact(false)).unwrap();
            let ip_plus =
                solve_edge_addition(&inst.graph, &inst.target, &cand, &RowGenConfig::exact(true)).unwrap();
            OracleRun { inst, oracle, cand, ip, ip_plus }
        })
        .collect()
}

fn proven_objective(r: &SolveReport) -> Option<i64> {
    match r.status {
        RunStatus::Optimal => r.objective(),
        RunStatus::Infeasible => None,
        _ => Some(-1),
    }
}

fn exact_oracle(runs: &[OracleRun]) -> Verdict {
    let mut bad = 0;
    let mut feasible = 0;
    for r in runs {
        let expect = r.oracle.minimum.map(i64::from);
        if expect.is_some() {
            feasible += 1;
        }
        if proven_objective(&r.ip) != expect || proven_objective(&r.ip_plus) != expect {
            bad += 1;
        }
    }
    Verdict::new(
        bad == 0 && runs.len() >= 30,
        format!("{} instances ({feasible} feasible), {bad} disagreements with enumeration", runs.len()),
    )
}

fn cut_validity(runs: &[OracleRun]) -> Verdict {
    let mut cuts = 0;
    let mut violations = 0;
    let mut checks = 0u64;
    for r in runs {
        assert_eq!(r.cand.pairs(), &r.inst.pairs[..]);
        cuts += r.ip_plus.cuts.len();
        for &mask in &r.oracle.feasible {
            let z = mask_to_bools(mask, r.inst.pairs.len());
            for cut in &r.ip_plus.cuts {
                checks += 1;
                if !cut.is_satisfied(&z) {
                    violations += 1;
                }
            }
        }
    }
    Verdict::new(
        violations == 0 && cuts > 0,
        format!("{cuts} cuts checked against every feasible subset ({checks} checks), {violations} violations"),
    )
}

fn heuristic_feasibility() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let exact = SearchConfig::exact();
    let mut solved = 0;
    let mut unsolved = 0;
    let mut bad = 0;
    for k in 0..40 {
        let n = rng.gen_range(6..=12);
        let clusters = rng.gen_range(2..=3);
        let labels = planted_labels(&mut rng, n, clusters, 2);
        let g = planted_graph(&mut rng, &labels, 0.4, 0.25);
        if g.total_weight() == 0 {
            continue;
        }
        let t = Partition::from_labels(&labels);
        let mut cfg = HeuristicConfig::exact();
        cfg.weighted = k % 4 == 3;
        let (delta, report) = heuristic_edge_addition(&g, &t, &cfg).unwrap();
        if !report.status.is_success() {
            unsolved += 1;
            continue;
        }
        solved += 1;
        if !verify_certificate(&g, &t, &delta, &exact).unwrap() {
            bad += 1;
            continue;
        }
        let kept = post_process(&g, &t, &delta, &cfg).unwrap();
        if kept.magnitude() > delta.magnitude() || !verify_certificate(&g, &t, &kept, &exact).unwrap() {
            bad += 1;
        }
    }
    Verdict::new(
        bad == 0 && solved >= 20,
        format!("{solved} instances certified, {unsolved} reported no solution, {bad} failures"),
    )
}

fn is_one_minimal(g: &Graph, t: &Partition) -> bool {
    let exact = SearchConfig::exact();
    g.edges().iter().all(|&(i, j, w)| {
        let trial = g.apply(&EdgeDelta::from_pairs([(i, j, -(w as i64))])).unwrap();
        trial.total_weight() == 0 || maximize_modularity(&trial, &exact).unwrap().partition != *t
    })
}

fn removal_minimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let exact = SearchConfig::exact();
    let mut runs = 0;
    let mut bad = 0;
    let mut instances = 0;
    while instances < 25 {
        let n = rng.gen_range(5..=9);
        let labels = planted_labels(&mut rng, n, 2, 2);
        let g = planted_graph(&mut rng, &labels, 0.6, 0.2);
        if g.total_weight() == 0 {
            continue;
        }
        let t = maximize_modularity(&g, &exact).unwrap().partition;
        instances += 1;
        let mut oracle = OptimalityOracle::new(n);
        for rule in 1..=4 {
            let cfg = HeuristicConfig {
                removal_rule: RemovalRule::from_index(rule).unwrap(),
                seed: instances as u64,
                ..HeuristicConfig::exact()
            };
            let (delta, _) = heuristic_edge_removal(&g, &t, &cfg).unwrap();
            let kept = g.apply(&delta).unwrap();
            runs += 1;
            let preserved =
                maximize_modularity(&kept, &exact).unwrap().partition == t && oracle.is_optimal(&kept, &t);
            let above_floor = kept.edges().len() >= star_lower_bound(&t);
            if !preserved || !above_floor || !is_one_minimal(&kept, &t) {
                bad += 1;
            }
        }
    }

    let triangles = Graph::from_unit_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let t = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
    let mut tri_counts = Vec::new();
    for rule in 1..=4 {
        let cfg = HeuristicConfig {
            removal_rule: RemovalRule::from_index(rule).unwrap(),
            ..HeuristicConfig::exact()
        };
        let (delta, _) = heuristic_edge_removal(&triangles, &t, &cfg).unwrap();
        tri_counts.push(triangles.apply(&delta).unwrap().total_weight());
    }
    let edges: Vec<(usize, usize)> = triangles.edges().iter().map(|e| (e.0, e.1)).collect();
    let mut oracle = OptimalityOracle::new(6);
    let brute = (0u32..64)
        .filter(|&mask| {
            let sub = with_mask(&Graph::empty(6), &edges, mask);
            t.clusters().iter().all(|c| sub.is_connected_within(c)) && oracle.is_optimal(&sub, &t)
        })
        .map(|mask| mask.count_ones() as u64)
        .min();
    let tri_ok = brute == Some(4) && tri_counts.iter().all(|&c| c == 4);
    Verdict::new(
        bad == 0 && tri_ok,
        format!(
            "{runs} removal runs on {instances} graphs, {bad} failures; two triangles keep {tri_counts:?} (enumerated minimum {brute:?})"
        ),
    )
}

fn soft_line(notes: &mut Vec<String>, label: &str, got: usize, target: usize) -> bool {
    let status = if got == target { "match" } else { "deviation" };
    notes.push(format!("{label}: {got} (target {target}) [{status}]"));
    got == target
}

fn karate_reproduction() -> Verdict {
    let search = SearchConfig::default();
    let k = karate();
    let g = &k.graph.graph;
    let opt = karate_optimum(&search).unwrap();
    let mut notes = Vec::new();
    let mut all = true;
    let m = misclassified_nodes(&k.partition, &opt).unwrap().len();
    all &= soft_line(&mut notes, "initial misclassified nodes", m, 12);

    let cfg = HeuristicConfig { search: search.clone(), ..Default::default() };
    let (added, _) = heuristic_edge_addition(g, &k.partition, &cfg).unwrap();
    let kept = post_process(g, &k.partition, &added, &cfg).unwrap();
    all &= soft_line(&mut notes, "heuristic additions", added.magnitude() as usize, 11);
    all &= soft_line(
        &mut notes,
        "heuristic additions after post-processing",
        kept.magnitude() as usize,
        9,
    );

    let remaining = |graph: &Graph, rule: u8, seed: u64| -> usize {
        let cfg = HeuristicConfig {
            removal_rule: RemovalRule::from_index(rule).unwrap(),
            seed,
            search: search.clone(),
            ..Default::default()
        };
        let (delta, _) = heuristic_edge_removal(graph, &opt, &cfg).unwrap();
        graph.apply(&delta).unwrap().total_weight() as usize
    };
    for rule in [3, 4] {
        let label = format!("removal rule {rule} edges kept");
        all &= soft_line(&mut notes, &label, remaining(g, rule, 0), 31);
    }
    let pre = cross_cluster_preprocess(g, &opt, &search, false).unwrap();
    let g_pre = g.apply(&pre).unwrap();
    all &= soft_line(
        &mut notes,
        "edges after cross-cluster pre-processing",
        g_pre.total_weight() as usize,
        57,
    );
    for rule in [3, 4] {
        let label = format!("pre-processing then removal rule {rule} edges kept");
        all &= soft_line(&mut notes, &label, remaining(&g_pre, rule, 0), 30);
    }
    let mut shuffled: Vec<usize> = (0..100).map(|s| remaining(g, 2, s)).collect();
    shuffled.sort_unstable();
    notes.push(format!(
        "removal rule 2 over 100 seeds: median {} (min {}, max {}) [report only]",
        shuffled[shuffled.len() / 2],
        shuffled[0],
        shuffled[shuffled.len() - 1]
    ));
    let mut v = Verdict::new(all, if all { "all targets matched" } else { "see deviations below" });
    v.notes = notes;
    v
}

fn random_program(rng: &mut impl Rng) -> BinaryProgram {
    let k = rng.gen_range(1..=18);
    let mut bp = BinaryProgram::with_unit_objective(k);
    for c in bp.objective.iter_mut() {
        *c = rng.gen_range(0..=3);
    }
    let products: Vec<usize> = (0..rng.gen_range(0..=3))
        .map(|_| {
            let l = rng.gen_range(0..k);
            let r = rng.gen_range(0..k);
            bp.add_product(l, r)
        })
        .collect();
    for _ in 0..rng.gen_range(1..=6) {
        let mut terms = Vec::new();
        for _ in 0..rng.gen_range(1..=k.min(6)) {
            terms.push((rng.gen_range(0..k), rng.gen_range(-3..=3)));
        }
        if let Some(&w) = products.choose(rng) {
            if rng.gen_bool(0.5) {
                terms.push((w, rng.gen_range(-3..=3)));
            }
        }
        let rhs = rng.gen_range(-3..=4);
        bp.rows.push(LinearRow::new(terms, rhs));
    }
    bp
}

fn enumerate_program(bp: &BinaryProgram, k: usize) -> Option<i64> {
    let mut best: Option<i64> = None;
    let mut x = vec![false; bp.num_vars];
    for mask in 0u32..(1 << k) {
        for (i, xi) in x.iter_mut().enumerate().take(k) {
            *xi = mask >> i & 1 == 1;
        }
        for c in &bp.couplings {
            x[c.product] = x[c.left] && x[c.right];
        }
        if bp.rows.iter().all(|r| r.is_satisfied(&x)) {
            let v = bp.objective_value(&x);
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    best
}

fn bip_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bad = 0;
    let mut infeasible = 0;
    let total = 120;
    for _ in 0..total {
        let bp = random_program(&mut rng);
        let k = bp.num_vars - bp.couplings.len();
        let expect = enumerate_program(&bp, k);
        let out = solve_min(&bp, Budget::unlimited()).unwrap();
        let got = match out.status {
            SolveStatus::Optimal => {
                if !bp.is_feasible(&out.assignment) || bp.objective_value(&out.assignment) != out.objective_value {
                    bad += 1;
                }
                Some(out.objective_value)
            }
            SolveStatus::Infeasible => None,
            SolveStatus::Limit => Some(i64::MIN),
        };
        if expect.is_none() {
            infeasible += 1;
        }
        if got != expect {
            bad += 1;
        }
    }
    Verdict::new(bad == 0, format!("{total} programs ({infeasible} infeasible), {bad} mismatches"))
}

fn main() {
    let mut failed = Vec::new();
    let mut run = |id: u8, name: &str, limit: Option<Duration>, hard: bool, f: &mut dyn FnMut() -> Verdict| {
        let started = Instant::now();
        let v = f();
        let elapsed = started.elapsed();
        let in_time = limit.map_or(true, |l| elapsed <= l);
        let passed = v.passed && in_time;
        let tag = match (passed, hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "DEVIATION",
        };
        let over = if in_time { "" } else { " (over time limit)" };
        println!("[{tag}] {id:>2} {name}: {} [{:.2}s]{over}", v.detail, elapsed.as_secs_f64());
        for note in &v.notes {
            println!("        {note}");
        }
        if !passed && hard {
            failed.push(id);
        }
    };
    let secs = Duration::from_secs;
    run(1, "figure 2 modularity values", Some(secs(1)), true, &mut figure2_values);
    run(2, "figure 1 modularity values", Some(secs(30)), true, &mut figure1_values);
    run(3, "star lower bound on karate", Some(secs(10)), true, &mut star_bound);
    run(4, "closed-form modularity changes", Some(secs(60)), true, &mut closed_forms);
    run(5, "partition row equals scaled modularity gap", Some(secs(60)), true, &mut row_equivalence);
    let started = Instant::now();
    let family = addition_family();
    let family_secs = started.elapsed().as_secs_f64();
    run(6, "exact addition matches enumeration", Some(secs(600)), true, &mut || {
        let mut v = exact_oracle(&family);
        v.detail += &format!(", family solved and enumerated in {family_secs:.2}s");
        v
    });
    run(7, "disjunctive cuts keep every feasible subset", Some(secs(300)), true, &mut || {
        cut_validity(&family)
    });
    run(8, "heuristic addition is certified", Some(secs(120)), true, &mut heuristic_feasibility);
    run(9, "removal is 1-minimal and preserves the optimum", Some(secs(60)), true, &mut removal_minimality);
    run(10, "karate reproduction targets", None, false, &mut karate_reproduction);
    run(11, "binary program solver matches enumeration", Some(secs(120)), true, &mut bip_oracle);
    if !failed.is_empty() {
        println!("acceptance: hard criteria failed: {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all hard criteria passed");
}
