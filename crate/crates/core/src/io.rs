//! Graph and partition readers, candidate sampling and bundled fixtures.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeDelta, Graph, Partition};
use crate::master::CandidateEdgeSet;
use crate::search::{maximize_modularity, SearchConfig};

/// Name of the generator used for every seeded choice in this crate.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.3), seeded with seed_from_u64";

const KARATE_NET: &str = include_str!("../data/karate.net");
const KARATE_FACTIONS: &str = include_str!("../data/karate_factions.csv");

/// A graph together with the external label of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<String>,
}

impl LabeledGraph {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Converts a decimal weight to an integer, rejecting fractional values.
fn integral_weight(text: &str, line: usize) -> Result<u64> {
    let w: f64 = text
        .parse()
        .map_err(|_| parse_err(line, format!("bad weight {text:?}")))?;
    let r = w.round();
    if !w.is_finite() || (w - r).abs() > 1e-6 {
        return Err(parse_err(line, format!("weight {w} is not integral")));
    }
    if r < 0.0 {
        return Err(parse_err(line, format!("weight {w} is negative")));
    }
    Ok(r as u64)
}

/// Pajek `.net` reader: a `*Vertices n` header, optional vertex lines
/// `i "label"`, then `*Edges` or `*Arcs` sections of `i j [w]` (1-based).
/// Arcs are symmetrised by adding weights; repeated lines accumulate.
pub fn parse_pajek(text: &str) -> Result<LabeledGraph> {
    enum Section {
        None,
        Vertices,
        Links,
    }
    let mut n: Option<usize> = None;
    let mut labels: Vec<String> = Vec::new();
    let mut weights: HashMap<(usize, usize), u64> = HashMap::new();
    let mut section = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('%') {
            continue;
        }
        if let Some(header) = s.strip_prefix('*') {
            let mut parts = header.split_whitespace();
            let key = parts.next().unwrap_or("").to_ascii_lowercase();
            match key.as_str() {
                "vertices" => {
                    let count = parts
                        .next()
                        .and_then(|x| x.parse::<usize>().ok())
                        .ok_or_else(|| parse_err(line, "expected `*Vertices <n>`"))?;
                    n = Some(count);
                    labels = (1..=count).map(|i| i.to_string()).collect();
                    section = Section::Vertices;
                }
                "edges" | "arcs" => {
                    if n.is_none() {
                        return Err(parse_err(line, "link section before `*Vertices`"));
                    }
                    section = Section::Links;
                }
                other => return Err(parse_err(line, format!("unsupported section *{other}"))),
            }
            continue;
        }
        let count = n.ok_or_else(|| parse_err(line, "data before `*Vertices`"))?;
        let node = |tok: &str| -> Result<usize> {
            let i: usize = tok
                .parse()
                .map_err(|_| parse_err(line, format!("bad vertex id {tok:?}")))?;
            if i == 0 || i > count {
                return Err(parse_err(line, format!("vertex {i} outside 1..={count}")));
            }
            Ok(i - 1)
        };
        match section {
            Section::None => return Err(parse_err(line, "data outside any section")),
            Section::Vertices => {
                let (id, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
                let i = node(id)?;
                let rest = rest.trim();
                let label = if let Some(stripped) = rest.strip_prefix('"') {
                    stripped.split('"').next().unwrap_or("").to_string()
                } else {
                    rest.split_whitespace().next().unwrap_or(id).to_string()
                };
                labels[i] = label;
            }
            Section::Links => {
                let toks: Vec<&str> = s.split_whitespace().collect();
                if toks.len() < 2 {
                    return Err(parse_err(line, "expected `i j [w]`"));
                }
                let (a, b) = (node(toks[0])?, node(toks[1])?);
                if a == b {
                    return Err(parse_err(line, format!("self-loop on vertex {}", a + 1)));
                }
                let w = match toks.get(2) {
                    Some(t) => integral_weight(t, line)?,
                    None => 1,
                };
                if w == 0 {
                    return Err(parse_err(line, "zero weight"));
                }
                *weights.entry((a.min(b), a.max(b))).or_default() += w;
            }
        }
    }
    let n = n.ok_or_else(|| parse_err(0, "missing `*Vertices` header"))?;
    let mut edges: Vec<(usize, usize, u64)> = weights.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    edges.sort_unstable();
    let graph = Graph::from_edges(n, &edges)?;
    if labels.iter().collect::<HashSet<_>>().len() != n {
        return Err(parse_err(0, "vertex labels are not unique"));
    }
    Ok(LabeledGraph { graph, labels })
}

fn csv_records(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((line, fields));
    }
    Ok(out)
}

fn is_header(fields: &[String], names: &[&str]) -> bool {
    fields
        .iter()
        .all(|f| names.contains(&f.to_ascii_lowercase().as_str()))
}

/// Edge list `u,v[,w]` with arbitrary string labels, numbered in order of
/// first appearance. An optional header row such as `source,target,weight`
/// is skipped.
pub fn parse_edge_csv(text: &str) -> Result<LabeledGraph> {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut weights: HashMap<(usize, usize), u64> = HashMap::new();
    for (k, (line, fields)) in csv_records(text)?.into_iter().enumerate() {
        if k == 0 && is_header(&fields, &["u", "v", "w", "source", "target", "weight"]) {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(line, "expected `u,v[,w]`"));
        }
        let mut id = |label: &str| -> usize {
            *index.entry(label.to_string()).or_insert_with(|| {
                labels.push(label.to_string());
                labels.len() - 1
            })
        };
        let (a, b) = (id(&fields[0]), id(&fields[1]));
        if a == b {
            return Err(parse_err(line, format!("self-loop on {:?}", fields[0])));
        }
        let w = match fields.get(2) {
            Some(t) => integral_weight(t, line)?,
            None => 1,
        };
        if w == 0 {
            return Err(parse_err(line, "zero weight"));
        }
        *weights.entry((a.min(b), a.max(b))).or_default() += w;
    }
    let mut edges: Vec<(usize, usize, u64)> = weights.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    edges.sort_unstable();
    let graph = Graph::from_edges(labels.len(), &edges)?;
    Ok(LabeledGraph { graph, labels })
}

/// `node,cluster` rows covering every label exactly once.
pub fn parse_partition_csv(text: &str, labels: &[String]) -> Result<Partition> {
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut cluster_ids: HashMap<String, usize> = HashMap::new();
    let mut assign: Vec<Option<usize>> = vec![None; labels.len()];
    for (k, (line, fields)) in csv_records(text)?.into_iter().enumerate() {
        if k == 0 && is_header(&fields, &["node", "cluster", "community"]) {
            continue;
        }
        if fields.len() != 2 {
            return Err(parse_err(line, "expected `node,cluster`"));
        }
        let v = *index
            .get(fields[0].as_str())
            .ok_or_else(|| parse_err(line, format!("unknown node {:?}", fields[0])))?;
        if assign[v].is_some() {
            return Err(parse_err(line, format!("node {:?} listed twice", fields[0])));
        }
        let next = cluster_ids.len();
        assign[v] = Some(*cluster_ids.entry(fields[1].clone()).or_insert(next));
    }
    if let Some(v) = assign.iter().position(Option::is_none) {
        return Err(parse_err(0, format!("node {:?} has no cluster", labels[v])));
    }
    let labels: Vec<usize> = assign.into_iter().map(|c| c.expect("checked above")).collect();
    Ok(Partition::from_labels(&labels))
}

/// Keeps the largest connected component (ties: the one with the smallest
/// node). Returns the subgraph and the original index of each kept node.
pub fn largest_component(g: &Graph) -> (Graph, Vec<usize>) {
    let comps = g.components();
    let best = comps
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .cloned()
        .unwrap_or_default();
    (g.induced(&best), best)
}

/// Seed additions first, then a seeded sample of distance-two pairs up to
/// `budget` candidates in total.
pub fn generate_candidates(
    g: &Graph,
    seed_delta: &EdgeDelta,
    budget: usize,
    seed: u64,
) -> Result<CandidateEdgeSet> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &(i, j, w) in seed_delta.consolidated().pairs() {
        if w > 0 {
            pairs.push((i, j));
        }
    }
    if budget < pairs.len() {
        return Err(Error::BudgetTooSmall {
            budget,
            seed: pairs.len(),
        });
    }
    let taken: HashSet<(usize, usize)> = pairs.iter().copied().collect();
    let mut pool: Vec<(usize, usize)> = g
        .distance2_pairs()
        .into_iter()
        .filter(|p| !taken.contains(p))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pairs.extend(pool.into_iter().take(budget - pairs.len()));
    CandidateEdgeSet::for_addition(g, &pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureName {
    Figure1,
    Figure2,
    Karate,
}

impl std::str::FromStr for FixtureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "figure1" => Ok(FixtureName::Figure1),
            "figure2" => Ok(FixtureName::Figure2),
            "karate" => Ok(FixtureName::Karate),
            other => Err(Error::Config(format!("unknown fixture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub graph: LabeledGraph,
    pub partition: Partition,
}

/// Zachary's karate club with its two-faction split.
pub fn karate() -> Fixture {
    let graph = parse_pajek(KARATE_NET).expect("bundled karate graph parses");
    let partition =
        parse_partition_csv(KARATE_FACTIONS, &graph.labels).expect("bundled factions parse");
    Fixture { graph, partition }
}

/// A 10-clique with two 3-node paths, each hanging off a different clique
/// node by one endpoint. Nodes 10–12 and 13–15 are the paths, with 12 and 15
/// their free ends.
pub fn figure2() -> Fixture {
    let mut edges = Vec::new();
    for i in 0..10 {
        for j in i + 1..10 {
            edges.push((i, j));
        }
    }
    edges.extend([(10, 11), (11, 12), (13, 14), (14, 15), (0, 10), (1, 13)]);
    let graph = Graph::from_unit_edges(16, &edges).expect("fixed edge list");
    let mut labels = vec![0; 10];
    labels.extend([1, 1, 1, 2, 2, 2]);
    Fixture {
        graph: LabeledGraph {
            graph,
            labels: (1..=16).map(|i| i.to_string()).collect(),
        },
        partition: Partition::from_labels(&labels),
    }
}

/// The karate graph with every edge between clusters of `optimum` removed;
/// the partition is the resulting connected components.
pub fn figure1_from(optimum: &Partition) -> Fixture {
    let k = karate();
    let g = &k.graph.graph;
    let cross = EdgeDelta::from_pairs(
        g.edges()
            .into_iter()
            .filter(|&(i, j, _)| !optimum.same_cluster(i, j))
            .map(|(i, j, w)| (i, j, -(w as i64))),
    );
    let graph = g.apply(&cross).expect("removing existing edges");
    let comps = graph.components();
    let partition = Partition::from_clusters(graph.node_count(), &comps).expect("components cover all nodes");
    Fixture {
        graph: LabeledGraph {
            graph,
            labels: k.graph.labels,
        },
        partition,
    }
}

/// The karate optimum found by the default heuristic search.
pub fn karate_optimum(search: &SearchConfig) -> Result<Partition> {
    Ok(maximize_modularity(&karate().graph.graph, search)?.partition)
}

pub fn demo_fixture(name: FixtureName) -> Result<Fixture> {
    match name {
        FixtureName::Figure2 => Ok(figure2()),
        FixtureName::Karate => Ok(karate()),
        FixtureName::Figure1 => Ok(figure1_from(&karate_optimum(&SearchConfig::default())?)),
    }
}
