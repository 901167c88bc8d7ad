//! Temporal edge lists, snapshot slicing, node histories and the graph
//! statistics used by baselines and target selection.

mod centrality;
mod ingest;
mod network;

pub use centrality::{common_neighbors, edge_betweenness, link_degree};
pub use ingest::{ingest_edge_list, parse_edge_list, SnapshotSpec, TemporalEdge};
pub use network::{Adjacency, DynamicNetwork, NetworkStats, NodeHistory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no node is active in the focus window")]
    EmptyNetwork,
    #[error("invalid snapshot spec: {0}")]
    Spec(String),
    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
