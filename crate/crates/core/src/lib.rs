//! Enforcing and preserving modularity-optimal partitions by editing edge
//! sets: exact row generation over a binary master problem, greedy
//! heuristics, and brute-force checks for small graphs.

pub mod align;
pub mod bip;
pub mod error;
pub mod graph;
pub mod heuristics;
pub mod io;
pub mod master;
pub mod modularity;
pub mod rowgen;
pub mod search;

pub use error::{Error, Result};
pub use graph::{canonicalize, EdgeDelta, Graph, Partition};
pub use modularity::{modularity, ModularityValue};
pub use rowgen::{RunStatus, SolveReport};
pub use search::{maximize_modularity, SearchConfig, SearchMode};
