//! Directed communication graphs, time-varying sequences and consensus weights.

mod decay;
mod digraph;
mod generate;
mod io;
mod weights;

pub use decay::{fit_log_linear, product_decay_curve, LogLinearFit};
pub use digraph::{check_b_strong_connectivity, is_strongly_connected, Digraph, GraphSequence};
pub use generate::{
    complete_digraph, directed_ring, generate_clustered_digraph, generate_clustered_undirected,
    generate_strongly_connected_clustered, partition_by_source, ClusterSpec, MAX_REJECTION_ATTEMPTS,
};
pub use io::{parse_graph_sequence, read_graph_sequence, write_graph_sequence, format_graph_sequence};
pub use weights::{
    metropolis_hastings_weights, normalize_push_sum, push_sum_weights, WeightKind, WeightMatrix,
    WeightRule, DEFAULT_KAPPA,
};
