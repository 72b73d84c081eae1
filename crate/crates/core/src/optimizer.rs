//! Network optimisations: greedy edge minimisation by local complementation
//! and matching-first fusion ordering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fusion::FusionNetwork;
use crate::graph::{maximum_matching, normalize, Edge, Graph, VertexId};

/// Edge count change caused by complementing the neighbourhood of `u`.
fn lc_delta(g: &Graph, u: VertexId) -> i64 {
    let ns: Vec<VertexId> = g.neighbors(u).unwrap().iter().copied().collect();
    let d = ns.len() as i64;
    let mut inside = 0i64;
    for (i, &a) in ns.iter().enumerate() {
        for &b in &ns[i + 1..] {
            if g.has_edge(a, b) {
                inside += 1;
            }
        }
    }
    d * (d - 1) / 2 - 2 * inside
}

/// Applies local complementations while one strictly lowers the edge count.
///
/// Vertices are scanned in id order and the first improving vertex is
/// taken before rescanning. Returns the reduced graph and the vertices
/// complemented, in application order.
pub fn greedy_lc_minimize(g: &Graph) -> (Graph, Vec<VertexId>) {
    let mut g = g.clone();
    let mut applied = Vec::new();
    'scan: loop {
        let vs: Vec<VertexId> = g.vertices().collect();
        for u in vs {
            if lc_delta(&g, u) < 0 {
                g.local_complement_in_place(u).unwrap();
                applied.push(u);
                continue 'scan;
            }
        }
        return (g, applied);
    }
}

/// The network with every bond contracted: one vertex per connected piece
/// of the current graph state, one edge per pair of pieces joined by at
/// least one fusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractedNetwork {
    pub graph: Graph,
    /// Piece index of every qubit; pieces are numbered by smallest qubit id.
    pub piece_of: BTreeMap<VertexId, VertexId>,
    /// Number of fusions behind each contracted edge.
    pub multiplicity: BTreeMap<Edge, usize>,
    /// Fusions with both ends inside one piece.
    pub internal: Vec<Edge>,
}

pub fn contract_non_fusion_edges(net: &FusionNetwork) -> ContractedNetwork {
    contract(&net.physical().connected_components(), net.fusions())
}

fn contract(pieces: &[BTreeSet<VertexId>], fusions: &[Edge]) -> ContractedNetwork {
    let mut piece_of = BTreeMap::new();
    let mut graph = Graph::new();
    for (i, piece) in pieces.iter().enumerate() {
        let id = VertexId(i as u32);
        graph.add_vertex(id);
        for &q in piece {
            piece_of.insert(q, id);
        }
    }
    let mut multiplicity = BTreeMap::new();
    let mut internal = Vec::new();
    for &(a, b) in fusions {
        let (pa, pb) = (piece_of[&a], piece_of[&b]);
        if pa == pb {
            internal.push((a, b));
        } else {
            graph.add_edge(pa, pb).unwrap();
            *multiplicity.entry(normalize(pa, pb)).or_insert(0) += 1;
        }
    }
    ContractedNetwork { graph, piece_of, multiplicity, internal }
}

/// A fusion order built from successive matching rounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingPlan {
    pub order: Vec<Edge>,
    pub rounds: Vec<Vec<Edge>>,
}

/// Orders fusions so that each round acts on pairwise disjoint pieces.
///
/// Each round takes a maximum matching of the contracted network; for every
/// matched pair of pieces the smallest fusion between them is scheduled and
/// the two pieces are merged. Once every remaining fusion lies inside a
/// single piece, the rest follow one per round in sorted order.
pub fn order_fusions(net: &FusionNetwork) -> OrderingPlan {
    let mut pieces = net.physical().connected_components();
    let mut remaining: Vec<Edge> = net.fusions().to_vec();
    remaining.sort();
    let mut rounds: Vec<Vec<Edge>> = Vec::new();
    loop {
        let c = contract(&pieces, &remaining);
        let matched = maximum_matching(&c.graph);
        if matched.is_empty() {
            break;
        }
        let mut round = Vec::new();
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for (pa, pb) in matched {
            let pick = *remaining
                .iter()
                .find(|&&(a, b)| normalize(c.piece_of[&a], c.piece_of[&b]) == (pa, pb))
                .expect("contracted edge has a fusion");
            round.push(pick);
            merged.push((pa.0 as usize, pb.0 as usize));
        }
        round.sort();
        remaining.retain(|f| !round.contains(f));
        let mut next: Vec<BTreeSet<VertexId>> = Vec::new();
        let mut absorbed = vec![false; pieces.len()];
        for &(a, b) in &merged {
            let mut joined = pieces[a].clone();
            joined.extend(pieces[b].iter().copied());
            absorbed[a] = true;
            absorbed[b] = true;
            next.push(joined);
        }
        for (i, p) in pieces.iter().enumerate() {
            if !absorbed[i] {
                next.push(p.clone());
            }
        }
        next.sort_by_key(|p| *p.iter().next().unwrap());
        pieces = next;
        rounds.push(round);
    }
    for f in remaining {
        rounds.push(vec![f]);
    }
    OrderingPlan { order: rounds.iter().flatten().copied().collect(), rounds }
}
