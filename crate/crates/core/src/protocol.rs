//! The adaptive generation protocol: fusions are attempted one at a time in
//! pending order, and after a failure the destroyed part of the network is
//! rebuilt from fresh resource states and stitched back onto the survivors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::canonicalize_network;
use crate::fusion::{FusionError, FusionNetwork, FusionType, NetworkBuilder};
use crate::graph::{normalize, Edge, Graph, GraphError, VertexId};
use crate::optimizer::order_fusions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Fusion(#[from] FusionError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("cannot step a finished protocol state")]
    AlreadyDone,

    #[error("all fusions applied but the result is not the target graph")]
    TargetMismatch,
}

pub type ProtocolResult<T> = Result<T, ProtocolError>;

/// One intermediate stage of the protocol.
///
/// The network is always stored under its canonical qubit numbering, so
/// two states are equal exactly when their canonical keys are.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolState {
    net: FusionNetwork,
    key: Arc<[u32]>,
    target: Arc<Graph>,
    done: bool,
    reorder_on_failure: bool,
}

impl ProtocolState {
    pub fn new(net: FusionNetwork, target: Graph, reorder_on_failure: bool) -> ProtocolResult<Self> {
        Self::from_network(net, Arc::new(target), reorder_on_failure)
    }

    fn from_network(mut net: FusionNetwork, target: Arc<Graph>, reorder_on_failure: bool) -> ProtocolResult<Self> {
        net.finish();
        let done = net.fusions.is_empty();
        if done && !net.realizes(&target) {
            return Err(ProtocolError::TargetMismatch);
        }
        let (key, net) = canonicalize_network(&net);
        Ok(ProtocolState { net, key: key.into(), target, done, reorder_on_failure })
    }

    pub fn net(&self) -> &FusionNetwork {
        &self.net
    }

    /// Pending fusions in the order they will be attempted.
    pub fn pending(&self) -> &[Edge] {
        self.net.fusions()
    }

    pub fn target(&self) -> &Graph {
        &self.target
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reorder_on_failure(&self) -> bool {
        self.reorder_on_failure
    }

    /// Canonical serialisation; equal for states that differ only in qubit ids.
    pub fn key(&self) -> &[u32] {
        &self.key
    }

    /// Short stable digest of [`ProtocolState::key`].
    pub fn key_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.key.hash(&mut h);
        h.finish()
    }

    /// Attempts the head fusion with the given outcome.
    pub fn step(&self, outcome: Outcome) -> ProtocolResult<ProtocolState> {
        let &f = self.net.fusions.first().ok_or(ProtocolError::AlreadyDone)?;
        if self.done {
            return Err(ProtocolError::AlreadyDone);
        }
        let net = match outcome {
            Outcome::Success => self.net.fuse_success(f)?,
            Outcome::Failure => {
                let (mut net, fresh) = rebuild_parts(&self.net, f)?;
                if self.reorder_on_failure {
                    reorder_head(&mut net, fresh)?;
                }
                net
            }
        };
        Self::from_network(net, Arc::clone(&self.target), self.reorder_on_failure)
    }
}

/// Runs the failure update for fusion `f` of `before` and rebuilds the network.
///
/// Removed qubits are the two fusion qubits, plus (Type-II) every neighbour
/// of the `X`-measured qubit. Touched leftover components smaller than the
/// discard threshold join the removed set. The removed qubits, with their
/// bonds among each other, form a small graph `H'` which is compiled with
/// the ordinary network builder. Bonds from removed qubits to surviving
/// components are restored through extra vertices of `H'` whose qubits
/// get fused onto the survivors:
///
/// * Type-I: one extra vertex per destroyed bond, fused onto the survivor;
/// * Type-II: one proxy per survivor, adjacent to all its destroyed
///   neighbours and to a leaf; the leaf is fused with the survivor, after
///   which the proxy stands in for it.
///
/// The new pending order is: fusions of `H'`, the failed fusion, the
/// stitching fusions, then the untouched remainder of the old order.
pub fn rebuild_after_failure(before: &FusionNetwork, f: Edge) -> ProtocolResult<FusionNetwork> {
    Ok(rebuild_parts(before, f)?.0)
}

/// Matching-first order for the first `count` pending fusions; the rest keep their order.
fn reorder_head(net: &mut FusionNetwork, count: usize) -> ProtocolResult<()> {
    let mut head = net.clone();
    let rest = head.fusions.split_off(count);
    let mut order = order_fusions(&head).order;
    order.extend(rest);
    net.set_order(order)?;
    Ok(())
}

/// The rebuilt network and the number of fusions compiled for `H'`, which lead the pending order.
fn rebuild_parts(before: &FusionNetwork, f: Edge) -> ProtocolResult<(FusionNetwork, usize)> {
    let f = normalize(f.0, f.1);
    if !before.fusions.contains(&f) {
        return Err(FusionError::NotAFusion(f.0, f.1).into());
    }
    let ftype = before.ftype;
    let phys = &before.physical;
    let (u, v) = f;

    let mut destroyed: BTreeSet<VertexId> = [u, v].into();
    if ftype == FusionType::TypeII {
        let (_, x) = before.failure_roles(f)?;
        destroyed.extend(phys.neighbors(x)?.iter().copied());
    }
    // spare qubits next to the damage are simply measured out
    let mut stray_pool: BTreeSet<VertexId> = before
        .unused_pool
        .iter()
        .copied()
        .filter(|&q| destroyed.contains(&q) || phys.neighbors(q).unwrap().iter().any(|w| destroyed.contains(w)))
        .collect();

    let survivors: BTreeSet<VertexId> =
        phys.vertices().filter(|q| !destroyed.contains(q) && !stray_pool.contains(q)).collect();
    let mut roles: BTreeSet<VertexId> = destroyed.difference(&stray_pool).copied().collect();
    for comp in phys.induced(&survivors).connected_components() {
        let touched = comp.iter().any(|c| phys.neighbors(*c).unwrap().iter().any(|w| destroyed.contains(w)));
        if touched && comp.len() < ftype.discard_below() {
            roles.extend(comp);
        }
    }
    let discarded_spares: Vec<VertexId> = roles.intersection(&before.unused_pool).copied().collect();
    for q in discarded_spares {
        roles.remove(&q);
        stray_pool.insert(q);
    }
    let kept: BTreeSet<VertexId> =
        survivors.iter().copied().filter(|q| !roles.contains(q) && !stray_pool.contains(q)).collect();

    // H' on the removed qubits plus stitching vertices
    let mut h_prime = Graph::new();
    for &r in &roles {
        h_prime.add_vertex(r);
    }
    for (a, b) in phys.edges() {
        if roles.contains(&a) && roles.contains(&b) {
            h_prime.add_edge(a, b)?;
        }
    }
    let mut aux = before.next_id.max(phys.next_free_id().0);
    let mut fresh = |h: &mut Graph| {
        aux += 1;
        h.add_vertex(VertexId(aux));
        VertexId(aux)
    };
    // (survivor, vertex of H' whose qubit is fused onto it)
    let mut stitches: Vec<(VertexId, VertexId)> = Vec::new();
    // Type-II survivors whose role passes to a proxy
    let mut proxies: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    for &c in &kept {
        let lost: Vec<VertexId> = phys.neighbors(c)?.iter().copied().filter(|w| roles.contains(w)).collect();
        if lost.is_empty() {
            continue;
        }
        match ftype {
            FusionType::TypeI => {
                for r in lost {
                    let x = fresh(&mut h_prime);
                    h_prime.add_edge(r, x)?;
                    stitches.push((c, x));
                }
            }
            FusionType::TypeII => {
                let x = fresh(&mut h_prime);
                let leaf = fresh(&mut h_prime);
                for r in lost {
                    h_prime.add_edge(r, x)?;
                }
                h_prime.add_edge(x, leaf)?;
                stitches.push((c, leaf));
                proxies.insert(c, x);
            }
        }
    }

    let referenced =
        |r: &VertexId| before.labels.contains_key(r) || before.fusions.iter().any(|&(a, b)| a == *r || b == *r);

    let mut net = before.clone();
    for q in roles.iter().chain(&stray_pool) {
        net.physical.remove_vertex(*q);
        net.unused_pool.remove(q);
    }
    net.next_id = net.next_id.max(phys.next_free_id().0);
    let degrees = h_prime.vertices().map(|x| (x, h_prime.degree(x).unwrap())).collect();
    let mut builder = NetworkBuilder::new(&mut net, degrees);
    for (a, b) in traversal_order(&h_prime) {
        builder.add_edge(a, b);
    }
    for r in h_prime.vertices() {
        if h_prime.degree(r)? == 0 && referenced(&r) {
            builder.add_isolated(r);
        }
    }
    let pos = std::mem::take(&mut builder.positions);
    let new_fusions = std::mem::take(&mut builder.new_fusions);

    let remap = |q: VertexId| -> VertexId {
        if roles.contains(&q) {
            pos[&q]
        } else if let Some(x) = proxies.get(&q) {
            pos[x]
        } else {
            q
        }
    };

    let fresh = new_fusions.len();
    let mut order = new_fusions;
    order.push(normalize(pos[&u], pos[&v]));
    for &(c, x) in &stitches {
        order.push(normalize(c, pos[&x]));
    }
    for &(a, b) in &before.fusions {
        if (a, b) != f {
            order.push(normalize(remap(a), remap(b)));
        }
    }
    net.fusions = order;
    net.labels = before.labels.iter().map(|(&q, &t)| (remap(q), t)).collect();
    Ok((net, fresh))
}

/// Edges of `g` in depth-first order, every tree edge as `(parent, child)`.
///
/// Each component is walked from its smallest vertex with neighbours in
/// ascending order, so every tree edge extends an already built piece;
/// the remaining (cycle-closing) edges follow in sorted order.
fn traversal_order(g: &Graph) -> Vec<Edge> {
    let mut seen = BTreeSet::new();
    let mut tree = Vec::new();
    for root in g.vertices() {
        if !seen.insert(root) {
            continue;
        }
        let mut stack = vec![root];
        while let Some(&top) = stack.last() {
            let next = g.neighbors(top).unwrap().iter().copied().find(|w| !seen.contains(w));
            match next {
                Some(w) => {
                    seen.insert(w);
                    tree.push((top, w));
                    stack.push(w);
                }
                None => {
                    stack.pop();
                }
            }
        }
    }
    let in_tree: BTreeSet<Edge> = tree.iter().map(|&(a, b)| normalize(a, b)).collect();
    tree.extend(g.edges().filter(|e| !in_tree.contains(e)));
    tree
}

/// Folds [`ProtocolState::step`] over `outcomes`, stopping once the target exists.
pub fn run_trajectory(initial: &ProtocolState, outcomes: &[Outcome]) -> ProtocolResult<ProtocolState> {
    let mut state = initial.clone();
    for &o in outcomes {
        if state.is_done() {
            break;
        }
        state = state.step(o)?;
    }
    Ok(state)
}

/// One line of a trajectory log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub fusion: [u32; 2],
    pub outcome: Outcome,
    pub state_hash: u64,
}

impl fmt::Display for TrajectoryStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}-{} {} {:016x}", self.step, self.fusion[0], self.fusion[1], self.outcome, self.state_hash)
    }
}

/// [`run_trajectory`] that also records every step taken.
pub fn run_trajectory_logged(
    initial: &ProtocolState,
    outcomes: &[Outcome],
) -> ProtocolResult<(ProtocolState, Vec<TrajectoryStep>)> {
    let mut state = initial.clone();
    let mut log = Vec::new();
    for (i, &o) in outcomes.iter().enumerate() {
        if state.is_done() {
            break;
        }
        let (a, b) = state.pending()[0];
        state = state.step(o)?;
        log.push(TrajectoryStep { step: i, fusion: [a.0, b.0], outcome: o, state_hash: state.key_hash() });
    }
    Ok((state, log))
}
