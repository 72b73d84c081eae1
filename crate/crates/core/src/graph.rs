//! Simple undirected graphs and the rewrite rules used on graph states:
//! local complementation, pivoting, edge contraction and vertex deletion.
//!
//! Vertices carry stable integer ids. No operation renumbers surviving
//! vertices; iteration is always in ascending id order so every algorithm
//! built on top of this module is deterministic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod matching;
mod random;

pub use matching::{matching_size, maximum_matching};
pub use random::random_connected_graph;

/// Identifier of a vertex (a qubit) inside one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

/// An unordered vertex pair, always stored with the smaller id first.
pub type Edge = (VertexId, VertexId);

/// Orders the endpoints of `(u, v)` so the smaller id comes first.
pub fn normalize(u: VertexId, v: VertexId) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("{{{0}, {1}}} is not an edge")]
    NotAnEdge(VertexId, VertexId),

    #[error("self-loop on vertex {0} is not allowed")]
    SelfLoop(VertexId),

    #[error("no connected simple graph has {m} vertices and {n} edges")]
    Infeasible { m: usize, n: usize },

    #[error("malformed graph description: {0}")]
    Malformed(String),
}

pub type GraphResult<T> = Result<T, GraphError>;

/// Simple undirected graph with stable vertex ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: BTreeMap<VertexId, BTreeSet<VertexId>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Graph on `0..n` without edges.
    pub fn with_vertex_count(n: u32) -> Self {
        let mut g = Graph::new();
        for v in 0..n {
            g.add_vertex(VertexId(v));
        }
        g
    }

    /// Builds a graph from an edge list, adding endpoints as needed.
    pub fn from_edges<I>(edges: I) -> GraphResult<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut g = Graph::new();
        for (u, v) in edges {
            g.add_vertex(VertexId(u));
            g.add_vertex(VertexId(v));
            g.add_edge(VertexId(u), VertexId(v))?;
        }
        Ok(g)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: u32) -> Self {
        let mut g = Graph::with_vertex_count(n);
        for v in 1..n {
            g.add_edge(VertexId(v - 1), VertexId(v)).unwrap();
        }
        g
    }

    /// Complete graph on `0..n`.
    pub fn complete(n: u32) -> Self {
        let mut g = Graph::with_vertex_count(n);
        for u in 0..n {
            for v in u + 1..n {
                g.add_edge(VertexId(u), VertexId(v)).unwrap();
            }
        }
        g
    }

    /// Returns `true` if the vertex was not present before.
    pub fn add_vertex(&mut self, v: VertexId) -> bool {
        if self.adj.contains_key(&v) {
            return false;
        }
        self.adj.insert(v, BTreeSet::new());
        true
    }

    /// Adds `{u, v}`; both endpoints must exist. Adding an existing edge is a no-op.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> GraphResult<()> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        self.adj.get_mut(&u).unwrap().insert(v);
        self.adj.get_mut(&v).unwrap().insert(u);
        Ok(())
    }

    /// Returns `true` if the edge was present.
    pub fn remove_edge(&mut self, u: VertexId, v: VertexId) -> bool {
        let removed = self.adj.get_mut(&u).is_some_and(|n| n.remove(&v));
        if removed {
            self.adj.get_mut(&v).unwrap().remove(&u);
        }
        removed
    }

    fn toggle_edge(&mut self, u: VertexId, v: VertexId) {
        debug_assert!(u != v);
        if !self.remove_edge(u, v) {
            self.adj.get_mut(&u).unwrap().insert(v);
            self.adj.get_mut(&v).unwrap().insert(u);
        }
    }

    pub fn has_vertex(&self, v: VertexId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.adj.get(&u).is_some_and(|n| n.contains(&v))
    }

    fn check_vertex(&self, v: VertexId) -> GraphResult<()> {
        if self.has_vertex(v) {
            Ok(())
        } else {
            Err(GraphError::UnknownVertex(v))
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Vertices in ascending order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.adj.keys().copied()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj.iter().flat_map(|(&u, ns)| ns.range(u..).map(move |&v| (u, v)))
    }

    pub fn degree(&self, v: VertexId) -> GraphResult<usize> {
        self.neighbors(v).map(BTreeSet::len)
    }

    /// The neighbourhood `N(u)`.
    pub fn neighbors(&self, u: VertexId) -> GraphResult<&BTreeSet<VertexId>> {
        self.adj.get(&u).ok_or(GraphError::UnknownVertex(u))
    }

    /// Smallest id not used by any vertex.
    pub fn next_free_id(&self) -> VertexId {
        self.adj.keys().next_back().map_or(VertexId(0), |v| VertexId(v.0 + 1))
    }

    /// `g * u`: the edge set becomes `E △ K_{N(u)}`.
    pub fn local_complement(&self, u: VertexId) -> GraphResult<Graph> {
        let mut g = self.clone();
        g.local_complement_in_place(u)?;
        Ok(g)
    }

    pub fn local_complement_in_place(&mut self, u: VertexId) -> GraphResult<()> {
        let ns: Vec<VertexId> = self.neighbors(u)?.iter().copied().collect();
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                self.toggle_edge(a, b);
            }
        }
        Ok(())
    }

    /// Pivot `g ∧ uv` on the edge `{u, v}`.
    ///
    /// Toggles all edges between the classes `N(u)\N(v)`, `N(v)\N(u)` and
    /// `N(u)∩N(v)` and then swaps the neighbourhoods of `u` and `v`. This is
    /// the same graph as `((g*u)*v)*u`.
    pub fn pivot(&self, u: VertexId, v: VertexId) -> GraphResult<Graph> {
        let mut g = self.clone();
        g.pivot_in_place(u, v)?;
        Ok(g)
    }

    pub fn pivot_in_place(&mut self, u: VertexId, v: VertexId) -> GraphResult<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if !self.has_edge(u, v) {
            return Err(GraphError::NotAnEdge(u, v));
        }
        let nu: BTreeSet<VertexId> = self.adj[&u].iter().copied().filter(|&w| w != v).collect();
        let nv: BTreeSet<VertexId> = self.adj[&v].iter().copied().filter(|&w| w != u).collect();
        let only_u: Vec<VertexId> = nu.difference(&nv).copied().collect();
        let only_v: Vec<VertexId> = nv.difference(&nu).copied().collect();
        let shared: Vec<VertexId> = nu.intersection(&nv).copied().collect();
        for (xs, ys) in [(&only_u, &only_v), (&only_u, &shared), (&only_v, &shared)] {
            for &x in xs.iter() {
                for &y in ys.iter() {
                    self.toggle_edge(x, y);
                }
            }
        }
        // exchange the neighbourhoods of u and v
        for &w in &nu {
            self.remove_edge(u, w);
        }
        for &w in &nv {
            self.remove_edge(v, w);
        }
        for &w in &nu {
            self.add_edge(v, w)?;
        }
        for &w in &nv {
            self.add_edge(u, w)?;
        }
        Ok(())
    }

    /// `g / {u, v}`: merges `v` into `u`. The surviving vertex keeps id `u`.
    pub fn contract_edge(&self, u: VertexId, v: VertexId) -> GraphResult<Graph> {
        let mut g = self.clone();
        g.contract_edge_in_place(u, v)?;
        Ok(g)
    }

    pub fn contract_edge_in_place(&mut self, u: VertexId, v: VertexId) -> GraphResult<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if !self.has_edge(u, v) {
            return Err(GraphError::NotAnEdge(u, v));
        }
        self.merge_into(u, v);
        Ok(())
    }

    /// Merges `v` into `u` whether or not they are adjacent.
    pub(crate) fn merge_into(&mut self, u: VertexId, v: VertexId) {
        let nv = self.adj.remove(&v).unwrap_or_default();
        for w in nv {
            self.adj.get_mut(&w).unwrap().remove(&v);
            if w != u {
                self.adj.get_mut(&u).unwrap().insert(w);
                self.adj.get_mut(&w).unwrap().insert(u);
            }
        }
    }

    /// `g - S`: removes the vertices of `s` and their incident edges.
    pub fn delete_vertices(&self, s: &BTreeSet<VertexId>) -> GraphResult<Graph> {
        for &v in s {
            self.check_vertex(v)?;
        }
        let mut g = self.clone();
        for &v in s {
            g.remove_vertex(v);
        }
        Ok(g)
    }

    /// Removes a vertex and its edges. Returns `false` if it was absent.
    pub fn remove_vertex(&mut self, v: VertexId) -> bool {
        match self.adj.remove(&v) {
            Some(ns) => {
                for w in ns {
                    self.adj.get_mut(&w).unwrap().remove(&v);
                }
                true
            }
            None => false,
        }
    }

    /// Maximal connected vertex sets, ordered by their smallest vertex.
    pub fn connected_components(&self) -> Vec<BTreeSet<VertexId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for start in self.vertices() {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(x) = queue.pop_front() {
                comp.insert(x);
                for &y in &self.adj[&x] {
                    if seen.insert(y) {
                        queue.push_back(y);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// Subgraph induced on `keep`.
    pub fn induced(&self, keep: &BTreeSet<VertexId>) -> Graph {
        let mut g = Graph::new();
        for &v in keep {
            if self.has_vertex(v) {
                g.add_vertex(v);
            }
        }
        for (u, v) in self.edges() {
            if keep.contains(&u) && keep.contains(&v) {
                g.add_edge(u, v).unwrap();
            }
        }
        g
    }

    /// Renames vertices through `map`; vertices missing from `map` keep their id.
    pub fn relabel(&self, map: &BTreeMap<VertexId, VertexId>) -> Graph {
        let f = |v: VertexId| *map.get(&v).unwrap_or(&v);
        let mut g = Graph::new();
        for v in self.vertices() {
            g.add_vertex(f(v));
        }
        for (u, v) in self.edges() {
            g.add_edge(f(u), f(v)).unwrap();
        }
        g
    }

    pub fn to_data(&self) -> GraphData {
        GraphData {
            vertices: self.vertices().map(|v| v.0).collect(),
            edges: self.edges().map(|(u, v)| [u.0, v.0]).collect(),
        }
    }

    pub fn from_data(data: &GraphData) -> GraphResult<Graph> {
        let mut g = Graph::new();
        for &v in &data.vertices {
            g.add_vertex(VertexId(v));
        }
        for &[u, v] in &data.edges {
            for x in [u, v] {
                if !g.has_vertex(VertexId(x)) {
                    return Err(GraphError::Malformed(format!("edge [{u}, {v}] references undeclared vertex {x}")));
                }
            }
            g.add_edge(VertexId(u), VertexId(v))?;
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_data()).expect("graph serialization")
    }

    pub fn from_json(text: &str) -> GraphResult<Graph> {
        let data: GraphData = serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
        Graph::from_data(&data)
    }
}

/// On-disk graph layout: `{"vertices": [..], "edges": [[u, v], ..]}` with `u < v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphData {
    pub vertices: Vec<u32>,
    pub edges: Vec<[u32; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: u32) -> VertexId {
        VertexId(x)
    }

    fn set(xs: &[u32]) -> BTreeSet<VertexId> {
        xs.iter().map(|&x| VertexId(x)).collect()
    }

    #[test]
    fn neighbors_of_path_middle() {
        let g = Graph::path(3);
        assert_eq!(g.neighbors(v(1)).unwrap(), &set(&[0, 2]));
        assert_eq!(Graph::complete(3).neighbors(v(2)).unwrap(), &set(&[0, 1]));
        let mut iso = Graph::path(2);
        iso.add_vertex(v(7));
        assert!(iso.neighbors(v(7)).unwrap().is_empty());
        assert_eq!(g.neighbors(v(9)), Err(GraphError::UnknownVertex(v(9))));
    }

    #[test]
    fn local_complement_triangle_and_star() {
        let k3 = Graph::complete(3);
        let lc = k3.local_complement(v(0)).unwrap();
        assert_eq!(lc, Graph::from_edges([(0, 1), (0, 2)]).unwrap());

        let star = Graph::from_edges([(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(star.local_complement(v(0)).unwrap(), Graph::complete(4));
        assert!(star.local_complement(v(8)).is_err());
    }

    #[test]
    fn pivot_on_path_middle_edge() {
        // a=0, u=1, v=2, b=3
        let g = Graph::path(4);
        let p = g.pivot(v(1), v(2)).unwrap();
        let expected = Graph::from_edges([(0, 3), (0, 2), (1, 2), (1, 3)]).unwrap();
        assert_eq!(p, expected);
        let three_lc = g
            .local_complement(v(1))
            .and_then(|g| g.local_complement(v(2)))
            .and_then(|g| g.local_complement(v(1)))
            .unwrap();
        assert_eq!(p, three_lc);
    }

    #[test]
    fn pivot_on_lone_edge_is_identity() {
        let g = Graph::path(2);
        assert_eq!(g.pivot(v(0), v(1)).unwrap(), g);
        assert_eq!(Graph::path(3).pivot(v(0), v(2)), Err(GraphError::NotAnEdge(v(0), v(2))));
    }

    #[test]
    fn contract_cases() {
        // a-b-c (0,1,2) and d-e-f (3,4,5) joined by {b, e}
        let g = Graph::from_edges([(0, 1), (1, 2), (3, 4), (4, 5), (1, 4)]).unwrap();
        let c = g.contract_edge(v(1), v(4)).unwrap();
        assert_eq!(c.neighbors(v(1)).unwrap(), &set(&[0, 2, 3, 5]));
        assert!(!c.has_vertex(v(4)));

        let t = Graph::complete(3).contract_edge(v(0), v(1)).unwrap();
        assert_eq!(t, Graph::from_edges([(0, 2)]).unwrap());

        let p = Graph::path(3).contract_edge(v(1), v(2)).unwrap();
        assert_eq!(p, Graph::path(2));
        assert!(Graph::path(3).contract_edge(v(0), v(2)).is_err());
    }

    #[test]
    fn delete_cases() {
        let k3 = Graph::complete(3);
        assert_eq!(k3.delete_vertices(&set(&[2])).unwrap(), Graph::path(2));
        assert_eq!(k3.delete_vertices(&BTreeSet::new()).unwrap(), k3);
        let p = Graph::path(3).delete_vertices(&set(&[1])).unwrap();
        assert_eq!(p.vertex_count(), 2);
        assert_eq!(p.edge_count(), 0);
        assert!(k3.delete_vertices(&set(&[5])).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(Graph::path(3).connected_components().len(), 1);
        assert!(Graph::new().connected_components().is_empty());
        let two = Graph::from_edges([(0, 1), (2, 3)]).unwrap();
        assert_eq!(two.connected_components(), vec![set(&[0, 1]), set(&[2, 3])]);
    }

    #[test]
    fn json_round_trip_and_rejects_bad_input() {
        let g = Graph::from_edges([(3, 1), (1, 2)]).unwrap();
        let text = g.to_json();
        assert!(text.contains("[\n      1,\n      3\n    ]") || text.contains("[1,3]"));
        assert_eq!(Graph::from_json(&text).unwrap(), g);
        assert!(Graph::from_json(r#"{"vertices":[0],"edges":[[0,1]]}"#).is_err());
        assert!(Graph::from_json(r#"{"vertices":[0],"edges":[[0,0]]}"#).is_err());
    }
}
