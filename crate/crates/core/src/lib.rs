//! Community detection over sequences of social-graph snapshots, tuned for
//! stability: a Louvain optimiser that can pin part of the previous
//! partition and bias new nodes toward communities that already existed,
//! plus the ingestion pipeline and comparison measures around it.

pub mod error;
pub mod graph;
pub mod ingest;
pub mod louvain;
pub mod metrics;
pub mod partition;
pub mod seed;
pub mod sweep;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use graph::{aggregate_by_partition, build_graph, Graph, GraphBuilder};
pub use louvain::{
    louvain_dynamic, louvain_static, modularity, modularity_gain, CommunitySums, Detection, DynamicContext,
    FixedPolicy, LouvainConfig, LouvainReport, NodeOrder,
};
pub use metrics::{compare, matching_communities, mutual_information, ComparisonReport, MatchConfig};
pub use partition::{CommunityLabel, LabelAllocator, Partition};
