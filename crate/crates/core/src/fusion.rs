//! Fusion networks `(H, F)`: a graph whose edge set is split into physical
//! graph-state bonds and pending fusion measurements.
//!
//! Type-I networks are built from 2-qubit linear clusters; a successful
//! fusion contracts its edge. Type-II networks are built from 3-qubit linear
//! clusters and use `{XZ, ZX}` fusions; success is a pivot on the fusion
//! edge followed by deleting both endpoints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize, Edge, Graph, GraphError, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FusionType {
    #[serde(rename = "t1")]
    TypeI,
    #[serde(rename = "t2")]
    TypeII,
}

impl FusionType {
    pub const ALL: [FusionType; 2] = [FusionType::TypeI, FusionType::TypeII];

    /// Number of qubits in the linear cluster used as resource state.
    pub fn cluster_size(self) -> usize {
        match self {
            FusionType::TypeI => 2,
            FusionType::TypeII => 3,
        }
    }

    /// Leftover components with fewer qubits than this are discarded after a failure.
    pub fn discard_below(self) -> usize {
        match self {
            FusionType::TypeI => 2,
            FusionType::TypeII => 3,
        }
    }
}

impl fmt::Display for FusionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionType::TypeI => "t1",
            FusionType::TypeII => "t2",
        })
    }
}

impl FromStr for FusionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t1" | "type1" | "typei" | "i" => Ok(FusionType::TypeI),
            "t2" | "type2" | "typeii" | "ii" => Ok(FusionType::TypeII),
            other => Err(format!("unknown fusion type '{other}' (expected t1 or t2)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FusionError {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("{{{0}, {1}}} is not a registered fusion")]
    NotAFusion(VertexId, VertexId),

    #[error("target graph must be connected")]
    DisconnectedTarget,

    #[error("target graph needs at least two vertices")]
    TargetTooSmall,

    #[error("invalid edge order: {0}")]
    InvalidEdgeOrder(String),

    #[error("fusion endpoints {0} and {1} share a graph-state bond")]
    AdjacentEndpoints(VertexId, VertexId),

    #[error("fusion {{{0}, {1}}} would merge two differently labelled vertices")]
    LabelConflict(VertexId, VertexId),

    #[error("fusion {{{0}, {1}}} collides with another fusion")]
    FusionCollision(VertexId, VertexId),

    #[error("malformed fusion network: {0}")]
    Malformed(String),
}

pub type FusionResult<T> = Result<T, FusionError>;

/// A fusion network together with the bookkeeping needed to run it.
///
/// `physical` holds the current graph state `(V, E \ F)`; `fusions` is the
/// ordered list of pending fusions `F`. `labels` marks which qubit stands
/// for which target vertex and is injective. `unused_pool` holds spare
/// Type-II qubits that carry no label and are measured out at the end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusionNetwork {
    pub(crate) ftype: FusionType,
    pub(crate) physical: Graph,
    pub(crate) fusions: Vec<Edge>,
    pub(crate) labels: BTreeMap<VertexId, VertexId>,
    pub(crate) unused_pool: BTreeSet<VertexId>,
    pub(crate) next_id: u32,
}

impl FusionNetwork {
    pub fn empty(ftype: FusionType) -> Self {
        FusionNetwork {
            ftype,
            physical: Graph::new(),
            fusions: Vec::new(),
            labels: BTreeMap::new(),
            unused_pool: BTreeSet::new(),
            next_id: 0,
        }
    }

    pub fn ftype(&self) -> FusionType {
        self.ftype
    }

    /// The current graph state, fusion edges excluded.
    pub fn physical(&self) -> &Graph {
        &self.physical
    }

    /// Pending fusions in execution order.
    pub fn fusions(&self) -> &[Edge] {
        &self.fusions
    }

    pub fn labels(&self) -> &BTreeMap<VertexId, VertexId> {
        &self.labels
    }

    pub fn unused_pool(&self) -> &BTreeSet<VertexId> {
        &self.unused_pool
    }

    /// The full network graph `H`: graph-state bonds plus fusion edges.
    pub fn h(&self) -> Graph {
        let mut h = self.physical.clone();
        for &(u, v) in &self.fusions {
            h.add_edge(u, v).expect("fusion endpoints are vertices");
        }
        h
    }

    /// Replaces the fusion order. `order` must be a permutation of the current fusions.
    pub fn set_order(&mut self, order: Vec<Edge>) -> FusionResult<()> {
        let mut a: Vec<Edge> = order.iter().map(|&(u, v)| normalize(u, v)).collect();
        let mut b = self.fusions.clone();
        let normalized = a.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(FusionError::InvalidEdgeOrder("new order is not a permutation of the pending fusions".into()));
        }
        self.fusions = normalized;
        Ok(())
    }

    pub(crate) fn fresh_vertex(&mut self) -> VertexId {
        let v = VertexId(self.next_id);
        self.next_id += 1;
        self.physical.add_vertex(v);
        v
    }

    /// Adds a linear cluster of `k` fresh qubits and returns them in path order.
    pub(crate) fn add_cluster(&mut self, k: usize) -> Vec<VertexId> {
        let qs: Vec<VertexId> = (0..k).map(|_| self.fresh_vertex()).collect();
        for w in qs.windows(2) {
            self.physical.add_edge(w[0], w[1]).unwrap();
        }
        qs
    }

    fn fusion_index(&self, f: Edge) -> FusionResult<usize> {
        let f = normalize(f.0, f.1);
        self.fusions.iter().position(|&g| g == f).ok_or(FusionError::NotAFusion(f.0, f.1))
    }

    /// Network after fusion `f` succeeded.
    pub fn fuse_success(&self, f: Edge) -> FusionResult<FusionNetwork> {
        let mut net = self.clone();
        net.apply_success(f)?;
        Ok(net)
    }

    pub(crate) fn apply_success(&mut self, f: Edge) -> FusionResult<()> {
        let idx = self.fusion_index(f)?;
        let (u, v) = self.fusions.remove(idx);
        if self.physical.has_edge(u, v) {
            return Err(FusionError::AdjacentEndpoints(u, v));
        }
        match self.ftype {
            FusionType::TypeI => {
                // contraction: u survives and inherits v's bonds, fusions and label
                if let Some(t) = self.labels.remove(&v) {
                    if self.labels.contains_key(&u) {
                        return Err(FusionError::LabelConflict(u, v));
                    }
                    self.labels.insert(u, t);
                }
                self.physical.merge_into(u, v);
                self.unused_pool.remove(&v);
                for g in self.fusions.iter_mut() {
                    let a = if g.0 == v { u } else { g.0 };
                    let b = if g.1 == v { u } else { g.1 };
                    if a == b {
                        return Err(FusionError::FusionCollision(u, v));
                    }
                    *g = normalize(a, b);
                }
                let distinct: BTreeSet<&Edge> = self.fusions.iter().collect();
                if distinct.len() != self.fusions.len() {
                    return Err(FusionError::FusionCollision(u, v));
                }
            }
            FusionType::TypeII => {
                if self.fusions.iter().any(|g| [g.0, g.1].iter().any(|x| *x == u || *x == v)) {
                    return Err(FusionError::FusionCollision(u, v));
                }
                self.physical.add_edge(u, v)?;
                self.physical.pivot_in_place(u, v)?;
                for x in [u, v] {
                    self.physical.remove_vertex(x);
                    self.labels.remove(&x);
                    self.unused_pool.remove(&x);
                }
            }
        }
        Ok(())
    }

    /// For a Type-II fusion, the endpoint measured in `Z` and the one measured
    /// in `X` on failure. The qubit with fewer bonds takes the `X`
    /// measurement; ties go to the smaller id.
    pub fn failure_roles(&self, f: Edge) -> FusionResult<(VertexId, VertexId)> {
        let idx = self.fusion_index(f)?;
        let (a, b) = self.fusions[idx];
        let (da, db) = (self.physical.degree(a)?, self.physical.degree(b)?);
        Ok(if db < da { (a, b) } else { (b, a) })
    }

    /// Network after fusion `f` failed, before any rebuilding.
    ///
    /// Type-I: both qubits are removed. Type-II: the `Z`-measured qubit is
    /// removed; the `X`-measured qubit `v` acts as a pivot with its smallest
    /// remaining neighbour `w` and is then removed.
    pub fn fuse_failure(&self, f: Edge) -> FusionResult<FusionNetwork> {
        let mut net = self.clone();
        let removed: Vec<VertexId> = match self.ftype {
            FusionType::TypeI => {
                let idx = self.fusion_index(f)?;
                let (u, v) = self.fusions[idx];
                net.physical.remove_vertex(u);
                net.physical.remove_vertex(v);
                vec![u, v]
            }
            FusionType::TypeII => {
                let (z, x) = self.failure_roles(f)?;
                net.physical.remove_vertex(z);
                let w = net.physical.neighbors(x)?.iter().next().copied();
                if let Some(w) = w {
                    net.physical.pivot_in_place(x, w)?;
                }
                net.physical.remove_vertex(x);
                vec![z, x]
            }
        };
        for x in &removed {
            net.labels.remove(x);
            net.unused_pool.remove(x);
        }
        net.fusions.retain(|g| !removed.contains(&g.0) && !removed.contains(&g.1));
        Ok(net)
    }

    /// Measures out spare qubits once no fusion is pending.
    pub(crate) fn finish(&mut self) {
        if self.fusions.is_empty() {
            for v in std::mem::take(&mut self.unused_pool) {
                self.physical.remove_vertex(v);
            }
        }
    }

    /// `true` if the current graph state is the target, vertex for vertex under `labels`.
    pub fn realizes(&self, target: &Graph) -> bool {
        label_isomorphic(&self.physical, &self.labels, target)
    }

    pub fn to_data(&self) -> NetworkData {
        let h = self.h();
        NetworkData {
            vertices: h.vertices().map(|v| v.0).collect(),
            edges: h.edges().map(|(u, v)| [u.0, v.0]).collect(),
            fusions: self.fusions.iter().map(|&(u, v)| [u.0, v.0]).collect(),
            labels: self.labels.iter().map(|(k, t)| (k.0, t.0)).collect(),
            ftype: self.ftype,
            unused_pool: self.unused_pool.iter().map(|v| v.0).collect(),
        }
    }

    pub fn from_data(data: &NetworkData) -> FusionResult<FusionNetwork> {
        let h =
            Graph::from_data(&crate::graph::GraphData { vertices: data.vertices.clone(), edges: data.edges.clone() })?;
        let mut physical = h.clone();
        let mut fusions = Vec::new();
        for &[u, v] in &data.fusions {
            let (u, v) = normalize(VertexId(u), VertexId(v));
            if !physical.remove_edge(u, v) {
                return Err(FusionError::Malformed(format!("fusion [{u}, {v}] is not an edge of the network graph")));
            }
            fusions.push((u, v));
        }
        let labels: BTreeMap<VertexId, VertexId> =
            data.labels.iter().map(|(&k, &t)| (VertexId(k), VertexId(t))).collect();
        let images: BTreeSet<&VertexId> = labels.values().collect();
        if images.len() != labels.len() {
            return Err(FusionError::Malformed("labels are not injective".into()));
        }
        if let Some(k) = labels.keys().find(|k| !h.has_vertex(**k)) {
            return Err(FusionError::Malformed(format!("label on unknown vertex {k}")));
        }
        Ok(FusionNetwork {
            ftype: data.ftype,
            next_id: h.next_free_id().0,
            physical,
            fusions,
            labels,
            unused_pool: data.unused_pool.iter().map(|&v| VertexId(v)).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_data()).expect("network serialization")
    }

    pub fn from_json(text: &str) -> FusionResult<FusionNetwork> {
        let data: NetworkData = serde_json::from_str(text).map_err(|e| FusionError::Malformed(e.to_string()))?;
        FusionNetwork::from_data(&data)
    }
}

/// JSON layout of a fusion network: the graph format plus `fusions`,
/// `labels` (qubit id to target vertex) and `ftype`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkData {
    pub vertices: Vec<u32>,
    pub edges: Vec<[u32; 2]>,
    pub fusions: Vec<[u32; 2]>,
    pub labels: BTreeMap<u32, u32>,
    pub ftype: FusionType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unused_pool: Vec<u32>,
}

/// `true` iff `labels` is a bijection from the vertices of `g` onto the
/// vertices of `target` that maps edges onto edges.
pub fn label_isomorphic(g: &Graph, labels: &BTreeMap<VertexId, VertexId>, target: &Graph) -> bool {
    if g.vertex_count() != target.vertex_count() || g.edge_count() != target.edge_count() {
        return false;
    }
    let mut images = BTreeSet::new();
    for v in g.vertices() {
        match labels.get(&v) {
            Some(&t) if target.has_vertex(t) && images.insert(t) => {}
            _ => return false,
        }
    }
    g.edges().all(|(u, v)| target.has_edge(labels[&u], labels[&v]))
}

/// Incremental network construction: adds target edges one at a time,
/// tracking where each target vertex currently lives (its position).
pub(crate) struct NetworkBuilder<'a> {
    net: &'a mut FusionNetwork,
    pub(crate) positions: BTreeMap<VertexId, VertexId>,
    remaining: BTreeMap<VertexId, usize>,
    spares: BTreeMap<VertexId, Vec<VertexId>>,
    pub(crate) new_fusions: Vec<Edge>,
}

impl<'a> NetworkBuilder<'a> {
    /// `degrees` gives, for every vertex of the graph being built, its total degree.
    pub(crate) fn new(net: &'a mut FusionNetwork, degrees: BTreeMap<VertexId, usize>) -> Self {
        NetworkBuilder {
            net,
            positions: BTreeMap::new(),
            remaining: degrees,
            spares: BTreeMap::new(),
            new_fusions: Vec::new(),
        }
    }

    fn fuse(&mut self, a: VertexId, b: VertexId) {
        self.new_fusions.push(normalize(a, b));
    }

    fn consume(&mut self, v: VertexId) -> usize {
        let r = self.remaining.entry(v).or_insert(1);
        *r = r.saturating_sub(1);
        *r
    }

    pub(crate) fn add_edge(&mut self, a: VertexId, b: VertexId) {
        let rem_a = self.consume(a);
        let rem_b = self.consume(b);
        let pa = self.positions.get(&a).copied();
        let pb = self.positions.get(&b).copied();
        match self.net.ftype {
            FusionType::TypeI => {
                let q = self.net.add_cluster(2);
                if let Some(pa) = pa {
                    self.fuse(q[0], pa);
                }
                if let Some(pb) = pb {
                    self.fuse(q[1], pb);
                }
                self.positions.insert(a, q[0]);
                self.positions.insert(b, q[1]);
            }
            FusionType::TypeII => match (pa, pb) {
                (None, None) => {
                    // the endpoint with more edges still to come takes the middle qubit
                    let (a, b, rem_b) = if rem_a > rem_b { (b, a, rem_a) } else { (a, b, rem_b) };
                    if rem_b > 0 {
                        let q = self.net.add_cluster(3);
                        self.positions.insert(a, q[0]);
                        self.positions.insert(b, q[1]);
                        self.spares.entry(b).or_default().push(q[2]);
                        self.net.unused_pool.insert(q[2]);
                    } else {
                        let q = self.net.add_cluster(2);
                        self.positions.insert(a, q[0]);
                        self.positions.insert(b, q[1]);
                    }
                }
                (Some(p), None) | (None, Some(p)) => {
                    let (old, new) = if pa.is_some() { (a, b) } else { (b, a) };
                    let spare = self.spares.get_mut(&old).and_then(|s| {
                        s.sort();
                        (!s.is_empty()).then(|| s.remove(0))
                    });
                    if let Some(s) = spare {
                        self.net.unused_pool.remove(&s);
                        self.positions.insert(new, s);
                    } else {
                        let q = self.net.add_cluster(3);
                        self.fuse(q[0], p);
                        self.positions.insert(old, q[1]);
                        self.positions.insert(new, q[2]);
                    }
                }
                (Some(pa), Some(pb)) => {
                    let c1 = self.net.add_cluster(3);
                    let c2 = self.net.add_cluster(3);
                    self.fuse(c1[2], c2[0]);
                    self.fuse(c1[0], pa);
                    self.fuse(c2[2], pb);
                    self.positions.insert(a, c1[1]);
                    self.positions.insert(b, c2[1]);
                }
            },
        }
    }

    /// Realizes a vertex with no edges as a lone qubit.
    pub(crate) fn add_isolated(&mut self, a: VertexId) {
        if !self.positions.contains_key(&a) {
            let q = self.net.fresh_vertex();
            self.positions.insert(a, q);
        }
    }
}

/// Compiles `g` into a fusion network, adding target edges in `edge_order`.
///
/// Type-I uses one 2-qubit cluster per target edge. Type-II uses 3-qubit
/// clusters; a cluster's third qubit is kept as a spare when its anchor
/// vertex still has edges to add, and is consumed by a later edge instead
/// of a new cluster.
pub fn build_network(g: &Graph, ftype: FusionType, edge_order: &[Edge]) -> FusionResult<FusionNetwork> {
    if g.vertex_count() < 2 {
        return Err(FusionError::TargetTooSmall);
    }
    if !g.is_connected() {
        return Err(FusionError::DisconnectedTarget);
    }
    let mut order: Vec<Edge> = edge_order.iter().map(|&(u, v)| normalize(u, v)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    let expected: Vec<Edge> = g.edges().collect();
    if sorted != expected {
        return Err(FusionError::InvalidEdgeOrder("edge order must list every target edge exactly once".into()));
    }
    // keep the caller's orientation for the first endpoint
    for (o, e) in order.iter_mut().zip(edge_order) {
        *o = *e;
    }
    let degrees = g.vertices().map(|v| (v, g.degree(v).unwrap())).collect();
    let mut net = FusionNetwork::empty(ftype);
    let mut builder = NetworkBuilder::new(&mut net, degrees);
    for &(a, b) in &order {
        builder.add_edge(a, b);
    }
    let positions = std::mem::take(&mut builder.positions);
    let fusions = std::mem::take(&mut builder.new_fusions);
    net.fusions = fusions;
    net.labels = positions.into_iter().map(|(t, q)| (q, t)).collect();
    Ok(net)
}

/// [`build_network`] with edges in ascending order.
pub fn build_network_sorted(g: &Graph, ftype: FusionType) -> FusionResult<FusionNetwork> {
    let order: Vec<Edge> = g.edges().collect();
    build_network(g, ftype, &order)
}

/// Applies every pending fusion as a success, in list order, and checks the
/// result against `target`.
pub fn validate_network(net: &FusionNetwork, target: &Graph, ftype: FusionType) -> bool {
    if net.ftype != ftype {
        return false;
    }
    all_success(net).is_ok_and(|done| done.realizes(target))
}

/// The network after every pending fusion succeeds in list order.
pub fn all_success(net: &FusionNetwork) -> FusionResult<FusionNetwork> {
    let mut net = net.clone();
    while let Some(&f) = net.fusions.first() {
        net.apply_success(f)?;
    }
    net.finish();
    Ok(net)
}
