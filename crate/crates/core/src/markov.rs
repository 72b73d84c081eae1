//! Exhaustive enumeration of protocol states into a finite Markov chain.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::mfpt::sparse::SparseMatrix;
use crate::protocol::{Outcome, ProtocolError, ProtocolState};

pub const DEFAULT_MAX_STATES: usize = 200_000;

type Key = Arc<[u32]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error("state space exceeds the limit of {0} states")]
    TooManyStates(usize),

    #[error("no reachable state completes the target")]
    TargetUnreachable,

    #[error("success probability {0} outside (0, 1]")]
    BadProbability(f64),
}

/// Canonical identity of a protocol state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalState {
    pub key: Vec<u8>,
    pub index: usize,
}

/// Canonical key bytes of a state.
pub fn canonicalize(s: &ProtocolState) -> Vec<u8> {
    s.key().iter().flat_map(|x| x.to_le_bytes()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub kind: Outcome,
}

/// Reachable protocol states with their success and failure successors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionGraph {
    pub states: Vec<CanonicalState>,
    /// Pending fusion count per state.
    pub pending: Vec<usize>,
    pub arcs: Vec<Transition>,
    pub start: usize,
    pub target: usize,
}

impl TransitionGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `(success, failure)` successors of a non-target state.
    pub fn successors(&self, i: usize) -> Option<(usize, usize)> {
        let mut s = None;
        let mut f = None;
        for a in self.arcs.iter().filter(|a| a.from == i) {
            match a.kind {
                Outcome::Success => s = Some(a.to),
                Outcome::Failure => f = Some(a.to),
            }
        }
        Some((s?, f?))
    }

    pub fn export(&self) -> ChainExport {
        ChainExport {
            states: self
                .states
                .iter()
                .zip(&self.pending)
                .map(|(s, &pending)| ExportedState { index: s.index, hash: format!("{:016x}", fnv1a(&s.key)), pending })
                .collect(),
            arcs: self.arcs.clone(),
            start: self.start,
            target: self.target,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// JSON form of a [`TransitionGraph`] with hashed state keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainExport {
    pub states: Vec<ExportedState>,
    pub arcs: Vec<Transition>,
    pub start: usize,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportedState {
    pub index: usize,
    pub hash: String,
    pub pending: usize,
}

/// Depth-first enumeration of every state reachable from `initial`.
///
/// States are numbered in discovery order, following the success branch
/// before the failure branch, so the all-success path from the start gets
/// consecutive indices. `reorder_on_failure` overrides the flag stored in
/// `initial`.
pub fn enumerate_transitions(
    initial: &ProtocolState,
    reorder_on_failure: bool,
    max_states: usize,
) -> Result<TransitionGraph, MarkovError> {
    let initial = if initial.reorder_on_failure() == reorder_on_failure {
        initial.clone()
    } else {
        ProtocolState::new(initial.net().clone(), initial.target().clone(), reorder_on_failure)?
    };
    let mut index: HashMap<Arc<[u32]>, usize> = HashMap::new();
    let mut keys: Vec<Arc<[u32]>> = Vec::new();
    let mut pending = Vec::new();
    // success and failure successor keys; None for the target
    let mut children: Vec<Option<(Key, Key)>> = Vec::new();
    let mut target = None;
    let mut stack = vec![initial];
    while let Some(s) = stack.pop() {
        let key: Arc<[u32]> = s.key().into();
        if index.contains_key(&key) {
            continue;
        }
        if keys.len() == max_states {
            return Err(MarkovError::TooManyStates(max_states));
        }
        let i = keys.len();
        index.insert(Arc::clone(&key), i);
        keys.push(key);
        pending.push(s.pending().len());
        if s.is_done() {
            target = Some(i);
            children.push(None);
            continue;
        }
        let ok = s.step(Outcome::Success)?;
        let fail = s.step(Outcome::Failure)?;
        children.push(Some((ok.key().into(), fail.key().into())));
        stack.push(fail);
        stack.push(ok);
    }
    let target = target.ok_or(MarkovError::TargetUnreachable)?;
    let mut arcs = Vec::with_capacity(2 * keys.len());
    for (i, c) in children.iter().enumerate() {
        match c {
            Some((ok, fail)) => {
                arcs.push(Transition { from: i, to: index[ok], kind: Outcome::Success });
                arcs.push(Transition { from: i, to: index[fail], kind: Outcome::Failure });
            }
            None => arcs.push(Transition { from: i, to: i, kind: Outcome::Success }),
        }
    }
    let states = keys
        .iter()
        .enumerate()
        .map(|(i, k)| CanonicalState { key: k.iter().flat_map(|x| x.to_le_bytes()).collect(), index: i })
        .collect();
    Ok(TransitionGraph { states, pending, arcs, start: 0, target })
}

/// Column-stochastic transition matrix: entry `(i, j)` is the probability of moving from `j` to `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub p_success: f64,
    pub matrix: DenseMatrix,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn max_column_error(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|j| ((0..n).map(|i| self.matrix[(i, j)]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn check_probability(p: f64) -> Result<f64, MarkovError> {
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(MarkovError::BadProbability(p))
    }
}

fn weighted_arcs(tg: &TransitionGraph, p: f64) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    tg.arcs.iter().map(move |a| {
        let w = if a.from == tg.target {
            1.0
        } else {
            match a.kind {
                Outcome::Success => p,
                Outcome::Failure => 1.0 - p,
            }
        };
        (a.to, a.from, w)
    })
}

/// Weights success arcs by `p`, failure arcs by `1 - p`; the target keeps its self-loop.
pub fn to_matrix(tg: &TransitionGraph, p: f64) -> Result<TransitionMatrix, MarkovError> {
    let p = check_probability(p)?;
    let mut m = DenseMatrix::zeros(tg.len());
    for (i, j, w) in weighted_arcs(tg, p) {
        m[(i, j)] += w;
    }
    Ok(TransitionMatrix { p_success: p, matrix: m })
}

/// [`to_matrix`] in sparse form.
pub fn to_sparse(tg: &TransitionGraph, p: f64) -> Result<SparseMatrix, MarkovError> {
    let p = check_probability(p)?;
    let mut m = SparseMatrix::new(tg.len());
    for (i, j, w) in weighted_arcs(tg, p) {
        m.push(i, j, w);
    }
    Ok(m)
}

/// Sub-chain of the states reachable from the start through arcs of positive weight at `p`.
///
/// Only differs from `tg` at `p = 1`, where failure arcs carry no weight and
/// the states behind them would make the ergodized chain reducible.
pub fn restrict_reachable(tg: &TransitionGraph, p: f64) -> Result<TransitionGraph, MarkovError> {
    let p = check_probability(p)?;
    let mut keep = vec![false; tg.len()];
    keep[tg.start] = true;
    let mut frontier = vec![tg.start];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); tg.len()];
    for (to, from, w) in weighted_arcs(tg, p) {
        if w > 0.0 {
            out[from].push(to);
        }
    }
    while let Some(i) = frontier.pop() {
        for &j in &out[i] {
            if !keep[j] {
                keep[j] = true;
                frontier.push(j);
            }
        }
    }
    if !keep[tg.target] {
        return Err(MarkovError::TargetUnreachable);
    }
    let mut slot = vec![usize::MAX; tg.len()];
    let mut states = Vec::new();
    let mut pending = Vec::new();
    for i in (0..tg.len()).filter(|&i| keep[i]) {
        slot[i] = states.len();
        states.push(CanonicalState { key: tg.states[i].key.clone(), index: states.len() });
        pending.push(tg.pending[i]);
    }
    let arcs = tg
        .arcs
        .iter()
        .filter(|a| keep[a.from] && keep[a.to])
        .map(|a| Transition { from: slot[a.from], to: slot[a.to], kind: a.kind })
        .collect();
    Ok(TransitionGraph { states, pending, arcs, start: slot[tg.start], target: slot[tg.target] })
}
