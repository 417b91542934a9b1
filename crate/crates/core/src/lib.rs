//! Delegate-partitioned breadth-first search on a simulated cluster.
//!
//! High out-degree vertices ("delegates") are replicated on every worker and
//! their visited state is kept in a globally OR-reduced bitmask; all other
//! vertices have one owner and are exchanged point-to-point. Each worker
//! stores four CSR subgraphs (nn, nd, dn, dd) and runs BFS or
//! direction-optimizing BFS on them in bulk-synchronous iterations, with
//! every edge inspection and every byte of simulated traffic counted.

pub mod bitmask;
pub mod comm;
pub mod cost_model;
pub mod edge_list;
pub mod engine;
pub mod error;
pub mod oracle;
pub mod partition;
pub mod rmat;
pub mod store;
pub mod traversal;

pub use edge_list::{EdgeFormat, EdgeList};
pub use engine::{run_bfs, BfsOptions, BfsRun, Mode};
pub use error::{Error, Result};
pub use partition::{partition, ClusterShape};
pub use rmat::RmatParams;
pub use store::PartitionedGraph;
