//! Compile target graph states into Type-I / Type-II fusion networks, model
//! the adaptive failure-recovery protocol as a finite Markov chain and
//! compute the expected number of fusion attempts until the target exists.

mod canonical;
pub mod fusion;
pub mod graph;
pub mod linalg;
pub mod markov;
pub mod mfpt;
pub mod optimizer;
pub mod pipeline;
pub mod protocol;

pub use fusion::{
    build_network, build_network_sorted, validate_network, FusionError, FusionNetwork, FusionType, NetworkData,
};
pub use graph::{maximum_matching, random_connected_graph, Edge, Graph, GraphData, GraphError, VertexId};
pub use linalg::DenseMatrix;
pub use markov::{canonicalize, enumerate_transitions, to_matrix, TransitionGraph, TransitionMatrix};
pub use mfpt::{ergodize, hitting_time, mfpt_entry, mfpt_matrix, stationary, MfptResult};
pub use optimizer::{contract_non_fusion_edges, greedy_lc_minimize, order_fusions, OrderingPlan};
pub use pipeline::{
    analyze, baseline_rus, chain_mfpt, monte_carlo, monte_carlo_state, run_strategy, rus_closed_form, sweep,
    ExperimentRecord, MonteCarloSummary, PipelineError, Strategy, SweepSpec,
};
pub use protocol::{rebuild_after_failure, run_trajectory, Outcome, ProtocolState};
