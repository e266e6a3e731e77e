use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("self-loop on node {0} is not allowed")]
    LoopEdge(usize),
    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("edge ({0}, {1}) has zero weight")]
    ZeroWeight(usize, usize),
    #[error("edge ({i}, {j}) would get negative weight {weight}")]
    NegativeWeight { i: usize, j: usize, weight: i64 },
    #[error("graph has no edges; modularity is undefined")]
    EmptyGraph,
    #[error("partition covers {got} nodes, graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("nodes {0} and {1} are in the same cluster")]
    SameCluster(usize, usize),
    #[error("nodes {0} and {1} are in different clusters")]
    DifferentClusters(usize, usize),
    #[error("exact search limited to {limit} nodes, graph has {n}; use the heuristic backend")]
    TooLargeForExact { n: usize, limit: usize },
    #[error("partition equals the ground truth; the row would be vacuous")]
    VacuousRow,
    #[error("node {0} is not misclassified")]
    NotMisclassified(usize),
    #[error("disjunctive cuts only apply to single-node moves")]
    NotSingleMove,
    #[error("node {0} is alone in its ground-truth cluster but has positive degree")]
    SingletonTruth(usize),
    #[error("partition is not modularity-optimal for this graph")]
    NotOptimal,
    #[error("candidate budget {budget} is smaller than the {seed} seed edges")]
    BudgetTooSmall { budget: usize, seed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
