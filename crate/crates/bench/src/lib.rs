//! Benchmark fixtures shared by the criterion harnesses.

use fusionnet::{random_connected_graph, Graph};

/// Seeded `G(6, n)` graphs, the instance family used in the experiment sweeps.
pub fn sweep_graphs(n: usize, count: usize) -> Vec<Graph> {
    (0..count).map(|i| random_connected_graph(6, n, i as u64).expect("feasible size")).collect()
}

/// Small named targets that enumerate in well under a millisecond.
pub fn small_targets() -> Vec<(&'static str, Graph)> {
    vec![
        ("path5", Graph::path(5)),
        ("k4", Graph::complete(4)),
        ("g5_6", random_connected_graph(5, 6, 3).expect("feasible size")),
    ]
}
