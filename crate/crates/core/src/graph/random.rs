use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, Graph, GraphError, GraphResult, VertexId};

/// Random connected simple graph on vertices `0..m` with exactly `n` edges.
///
/// A uniformly random labelled spanning tree is drawn from a random Prüfer
/// sequence, then uniformly chosen non-edges are added until `n` edges exist.
/// The same `(m, n, seed)` always yields the same graph.
pub fn random_connected_graph(m: usize, n: usize, seed: u64) -> GraphResult<Graph> {
    let max_edges = m * m.saturating_sub(1) / 2;
    if m == 0 || n + 1 < m || n > max_edges {
        return Err(GraphError::Infeasible { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::with_vertex_count(m as u32);
    for (u, v) in random_tree(m, &mut rng) {
        g.add_edge(u, v)?;
    }
    let mut non_edges: Vec<Edge> = (0..m as u32)
        .flat_map(|u| (u + 1..m as u32).map(move |v| (VertexId(u), VertexId(v))))
        .filter(|&(u, v)| !g.has_edge(u, v))
        .collect();
    non_edges.shuffle(&mut rng);
    for &(u, v) in non_edges.iter().take(n - (m - 1)) {
        g.add_edge(u, v)?;
    }
    Ok(g)
}

fn random_tree<R: Rng>(m: usize, rng: &mut R) -> Vec<Edge> {
    if m < 2 {
        return Vec::new();
    }
    if m == 2 {
        return vec![(VertexId(0), VertexId(1))];
    }
    let prufer: Vec<usize> = (0..m - 2).map(|_| rng.gen_range(0..m)).collect();
    let mut degree = vec![1usize; m];
    for &x in &prufer {
        degree[x] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..m).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(m - 1);
    for &x in &prufer {
        let leaf = *leaves.iter().next().unwrap();
        leaves.remove(&leaf);
        edges.push((VertexId(leaf as u32), VertexId(x as u32)));
        degree[x] -= 1;
        if degree[x] == 1 {
            leaves.insert(x);
        }
    }
    let last: Vec<usize> = leaves.into_iter().collect();
    edges.push((VertexId(last[0] as u32), VertexId(last[1] as u32)));
    edges
}
