//! Strategy runs, the repeat-until-success baseline, Monte Carlo
//! validation and experiment sweeps over random graphs.

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{build_network_sorted, FusionError, FusionNetwork, FusionType};
use crate::graph::{random_connected_graph, Graph, GraphError};
use crate::linalg::DenseMatrix;
use crate::markov::{
    enumerate_transitions, restrict_reachable, to_matrix, to_sparse, MarkovError, TransitionGraph, DEFAULT_MAX_STATES,
};
use crate::mfpt::sparse;
use crate::mfpt::{ergodize, hitting_time, mfpt_entry, MfptError};
use crate::optimizer::{greedy_lc_minimize, order_fusions};
use crate::protocol::{Outcome, ProtocolError, ProtocolState};

/// Default cap on steps in one Monte Carlo trial.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Fusion(#[from] FusionError),

    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error(transparent)]
    Markov(#[from] MarkovError),

    #[error(transparent)]
    Mfpt(#[from] MfptError),

    #[error("solvers disagree: fundamental matrix gives {formula}, hitting time gives {hitting}")]
    SolverDisagreement { formula: f64, hitting: f64 },

    #[error("trial {trial} exceeded {cap} steps")]
    StepCap { trial: usize, cap: u64 },

    #[error("monte carlo needs at least one trial")]
    NoTrials,

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

pub type PipelineResult<T> = Result<T, PipelineError>;

/// Which optimisations run before the protocol is analysed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub minimize_edges: bool,
    pub optimize_order: bool,
}

impl Strategy {
    pub const S1: Strategy = Strategy { minimize_edges: false, optimize_order: false };
    pub const S2: Strategy = Strategy { minimize_edges: false, optimize_order: true };
    pub const S3: Strategy = Strategy { minimize_edges: true, optimize_order: false };
    pub const S4: Strategy = Strategy { minimize_edges: true, optimize_order: true };
    pub const ALL: [Strategy; 4] = [Self::S1, Self::S2, Self::S3, Self::S4];

    pub fn name(self) -> &'static str {
        match (self.minimize_edges, self.optimize_order) {
            (false, false) => "s1",
            (false, true) => "s2",
            (true, false) => "s3",
            (true, true) => "s4",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy '{s}' (expected s1, s2, s3 or s4)"))
    }
}

/// Label used in the `strategy` column for baseline rows.
pub const BASELINE: &str = "baseline";

/// One row of experiment output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub graph_id: usize,
    pub m: usize,
    pub n: usize,
    pub fusion_type: FusionType,
    pub strategy: String,
    pub p: f64,
    pub mfpt: f64,
    pub n_states: usize,
    pub n_initial_fusions: usize,
    pub seed: u64,
    #[serde(default)]
    pub error: Option<String>,
}

/// Target graph and initial network a strategy starts from.
pub fn prepare_network(g: &Graph, ftype: FusionType, strat: Strategy) -> PipelineResult<(Graph, FusionNetwork)> {
    let target = if strat.minimize_edges { greedy_lc_minimize(g).0 } else { g.clone() };
    let mut net = build_network_sorted(&target, ftype)?;
    if strat.optimize_order {
        net.set_order(order_fusions(&net).order)?;
    }
    Ok((target, net))
}

/// The enumerated chain of one (graph, fusion type, strategy) combination.
#[derive(Clone, Debug)]
pub struct PreparedChain {
    pub target: Graph,
    pub network: FusionNetwork,
    pub chain: TransitionGraph,
}

pub fn prepare_chain(
    g: &Graph,
    ftype: FusionType,
    strat: Strategy,
    reorder_on_failure: bool,
    max_states: usize,
) -> PipelineResult<PreparedChain> {
    let (target, network) = prepare_network(g, ftype, strat)?;
    let state = ProtocolState::new(network.clone(), target.clone(), reorder_on_failure)?;
    let chain = enumerate_transitions(&state, reorder_on_failure, max_states)?;
    Ok(PreparedChain { target, network, chain })
}

/// Chains with more states than this are solved with sparse factorisations.
pub const DENSE_LIMIT: usize = 400;

/// MFPT from start to target, computed by both solvers which must agree.
pub fn chain_mfpt(chain: &TransitionGraph, p: f64) -> PipelineResult<f64> {
    if chain.start == chain.target {
        return Ok(0.0);
    }
    let reduced;
    let chain = if p == 1.0 {
        reduced = restrict_reachable(chain, p)?;
        &reduced
    } else {
        chain
    };
    let (s, t) = (chain.start, chain.target);
    let (hitting, formula) = if chain.len() <= DENSE_LIMIT {
        let tm = to_matrix(chain, p)?;
        let hitting = hitting_time(&tm.matrix, t)?[s];
        let erg = ergodize(&tm.matrix, t, s)?;
        (hitting, mfpt_entry(&erg, s, t)?)
    } else {
        let m = to_sparse(chain, p)?;
        let hitting = sparse::hitting_time(&m, t)?[s];
        let erg = sparse::ergodize(&m, t, s)?;
        (hitting, sparse::mfpt_entry(&erg, s, t)?)
    };
    if (formula - hitting).abs() > 1e-8 * hitting.abs().max(1.0) {
        return Err(PipelineError::SolverDisagreement { formula, hitting });
    }
    Ok(hitting)
}

fn record_for(
    g: &Graph,
    ftype: FusionType,
    strat: Strategy,
    p: f64,
    prepared: &PreparedChain,
) -> PipelineResult<ExperimentRecord> {
    Ok(ExperimentRecord {
        graph_id: 0,
        m: g.vertex_count(),
        n: g.edge_count(),
        fusion_type: ftype,
        strategy: strat.name().to_string(),
        p,
        mfpt: chain_mfpt(&prepared.chain, p)?,
        n_states: prepared.chain.len(),
        n_initial_fusions: prepared.network.fusions().len(),
        seed: 0,
        error: None,
    })
}

/// Full analysis of one strategy: the record plus the chain behind it.
pub fn analyze(
    g: &Graph,
    ftype: FusionType,
    strat: Strategy,
    p: f64,
    reorder_on_failure: bool,
    max_states: usize,
) -> PipelineResult<(ExperimentRecord, PreparedChain)> {
    crate::markov::check_probability(p)?;
    let prepared = prepare_chain(g, ftype, strat, reorder_on_failure, max_states)?;
    let record = record_for(g, ftype, strat, p, &prepared)?;
    Ok((record, prepared))
}

pub fn run_strategy(
    g: &Graph,
    ftype: FusionType,
    strat: Strategy,
    p: f64,
    reorder_on_failure: bool,
) -> PipelineResult<ExperimentRecord> {
    Ok(analyze(g, ftype, strat, p, reorder_on_failure, DEFAULT_MAX_STATES)?.0)
}

/// `(p^-k - 1) / (1 - p)`: expected attempts when any failure restarts all `k` fusions.
pub fn rus_closed_form(k: usize, p: f64) -> f64 {
    if p >= 1.0 {
        k as f64
    } else {
        (p.powi(-(k as i32)) - 1.0) / (1.0 - p)
    }
}

/// Chain on `k + 1` states where state `i` has `i` fusions done and every failure returns to 0.
pub fn restart_chain(k: usize, p: f64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(k + 1);
    for j in 0..k {
        m[(j + 1, j)] += p;
        m[(0, j)] += 1.0 - p;
    }
    m[(k, k)] = 1.0;
    m
}

/// Repeat-until-success baseline for the unoptimised network of `g`.
pub fn baseline_rus(g: &Graph, ftype: FusionType, p: f64) -> PipelineResult<f64> {
    crate::markov::check_probability(p)?;
    let k = build_network_sorted(g, ftype)?.fusions().len();
    let closed = rus_closed_form(k, p);
    let solved = hitting_time(&restart_chain(k, p), k)?[0];
    if (closed - solved).abs() > 1e-9 * closed.max(1.0) {
        return Err(PipelineError::SolverDisagreement { formula: closed, hitting: solved });
    }
    Ok(closed)
}

/// Sample statistics of a Monte Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Protocol stepper that remembers the successors of every visited state.
struct Memo {
    next: HashMap<Arc<[u32]>, [Option<Arc<ProtocolState>>; 2]>,
}

impl Memo {
    fn step(&mut self, s: &Arc<ProtocolState>, o: Outcome) -> PipelineResult<Arc<ProtocolState>> {
        let slot = match o {
            Outcome::Success => 0,
            Outcome::Failure => 1,
        };
        let entry = self.next.entry(s.key().into()).or_default();
        if let Some(n) = &entry[slot] {
            return Ok(Arc::clone(n));
        }
        let n = Arc::new(s.step(o)?);
        entry[slot] = Some(Arc::clone(&n));
        Ok(n)
    }
}

/// Simulates the protocol with Bernoulli(`p`) fusion outcomes.
pub fn monte_carlo(
    g: &Graph,
    ftype: FusionType,
    strat: Strategy,
    p: f64,
    trials: usize,
    seed: u64,
) -> PipelineResult<MonteCarloSummary> {
    monte_carlo_with(g, ftype, strat, p, trials, seed, strat.optimize_order, DEFAULT_STEP_CAP)
}

#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_with(
    g: &Graph,
    ftype: FusionType,
    strat: Strategy,
    p: f64,
    trials: usize,
    seed: u64,
    reorder_on_failure: bool,
    step_cap: u64,
) -> PipelineResult<MonteCarloSummary> {
    crate::markov::check_probability(p)?;
    if trials == 0 {
        return Err(PipelineError::NoTrials);
    }
    let (target, net) = prepare_network(g, ftype, strat)?;
    let start = ProtocolState::new(net, target, reorder_on_failure)?;
    monte_carlo_state(&start, p, trials, seed, step_cap)
}

/// Monte Carlo over the protocol started from an explicit state.
pub fn monte_carlo_state(
    start: &ProtocolState,
    p: f64,
    trials: usize,
    seed: u64,
    step_cap: u64,
) -> PipelineResult<MonteCarloSummary> {
    crate::markov::check_probability(p)?;
    if trials == 0 {
        return Err(PipelineError::NoTrials);
    }
    let start = Arc::new(start.clone());
    let mut memo = Memo { next: HashMap::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for trial in 0..trials {
        let mut s = Arc::clone(&start);
        let mut steps = 0u64;
        while !s.is_done() {
            if steps == step_cap {
                return Err(PipelineError::StepCap { trial, cap: step_cap });
            }
            let o = if rng.gen_bool(p) { Outcome::Success } else { Outcome::Failure };
            s = memo.step(&s, o)?;
            steps += 1;
        }
        let x = steps as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(MonteCarloSummary { mean, stderr: (var / n).sqrt(), trials })
}

/// Description of an experiment sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub m: usize,
    /// Edge counts; every entry gets its own set of random graphs.
    pub edges: Vec<usize>,
    pub graphs: usize,
    pub fusion_types: Vec<FusionType>,
    pub strategies: Vec<Strategy>,
    pub include_baseline: bool,
    pub probs: Vec<f64>,
    pub seed: u64,
    /// `None` follows each strategy's `optimize_order` flag.
    pub reorder_on_failure: Option<bool>,
    pub max_states: usize,
}

impl SweepSpec {
    pub fn new(m: usize, n: usize, graphs: usize, probs: Vec<f64>, seed: u64) -> Self {
        SweepSpec {
            m,
            edges: vec![n],
            graphs,
            fusion_types: FusionType::ALL.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            include_baseline: true,
            probs,
            seed,
            reorder_on_failure: None,
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic seed derived from a master seed and a list of parts.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |h, &x| splitmix64(h ^ x))
}

/// Seed of the `graph_id`-th random `G(m, n)` graph of a sweep.
pub fn graph_seed(master: u64, m: usize, n: usize, graph_id: usize) -> u64 {
    derive_seed(master, &[m as u64, n as u64, graph_id as u64])
}

struct Job {
    slot: usize,
    graph: Arc<Graph>,
    ftype: FusionType,
    strat: Option<Strategy>,
}

/// Runs every cell of `spec`, returning rows in spec order.
///
/// The chain of a (graph, fusion type, strategy) cell is enumerated once and
/// reused for all probabilities. Cells run on all available cores. A
/// failing cell yields rows with `error` set and `mfpt` NaN.
pub fn sweep(spec: &SweepSpec) -> PipelineResult<Vec<ExperimentRecord>> {
    let mut templates: Vec<ExperimentRecord> = Vec::new();
    let mut jobs: Vec<Job> = Vec::new();
    for &n in &spec.edges {
        for graph_id in 0..spec.graphs {
            let seed = graph_seed(spec.seed, spec.m, n, graph_id);
            let g = Arc::new(random_connected_graph(spec.m, n, seed)?);
            for &ftype in &spec.fusion_types {
                let mut methods: Vec<Option<Strategy>> = spec.strategies.iter().map(|&s| Some(s)).collect();
                if spec.include_baseline {
                    methods.push(None);
                }
                for strat in methods {
                    if spec.probs.is_empty() {
                        continue;
                    }
                    jobs.push(Job { slot: templates.len(), graph: Arc::clone(&g), ftype, strat });
                    for &p in &spec.probs {
                        templates.push(ExperimentRecord {
                            graph_id,
                            m: spec.m,
                            n,
                            fusion_type: ftype,
                            strategy: strat.map_or(BASELINE.to_string(), |s| s.name().to_string()),
                            p,
                            mfpt: f64::NAN,
                            n_states: 0,
                            n_initial_fusions: 0,
                            seed,
                            error: None,
                        });
                    }
                }
            }
        }
    }
    let rows = Mutex::new(templates);
    let queue = Mutex::new(jobs.into_iter().rev().collect::<Vec<_>>());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(job) = queue.lock().unwrap().pop() else { break };
                let filled = run_job(spec, &job);
                let mut rows = rows.lock().unwrap();
                for (k, (mfpt, n_states, k_fusions, err)) in filled.into_iter().enumerate() {
                    let r = &mut rows[job.slot + k];
                    r.mfpt = mfpt;
                    r.n_states = n_states;
                    r.n_initial_fusions = k_fusions;
                    r.error = err;
                }
            });
        }
    });
    Ok(rows.into_inner().unwrap())
}

type Cell = (f64, usize, usize, Option<String>);

fn run_job(spec: &SweepSpec, job: &Job) -> Vec<Cell> {
    let g = &*job.graph;
    match job.strat {
        None => {
            let k = build_network_sorted(g, job.ftype).map(|n| n.fusions().len());
            spec.probs
                .iter()
                .map(|&p| match (&k, baseline_rus(g, job.ftype, p)) {
                    (Ok(k), Ok(v)) => (v, k + 1, *k, None),
                    (_, Err(e)) => (f64::NAN, 0, 0, Some(e.to_string())),
                    (Err(e), _) => (f64::NAN, 0, 0, Some(e.to_string())),
                })
                .collect()
        }
        Some(strat) => {
            let reorder = spec.reorder_on_failure.unwrap_or(strat.optimize_order);
            match prepare_chain(g, job.ftype, strat, reorder, spec.max_states) {
                Err(e) => spec.probs.iter().map(|_| (f64::NAN, 0, 0, Some(e.to_string()))).collect(),
                Ok(prep) => spec
                    .probs
                    .iter()
                    .map(|&p| {
                        let k = prep.network.fusions().len();
                        match chain_mfpt(&prep.chain, p) {
                            Ok(v) => (v, prep.chain.len(), k, None),
                            Err(e) => (f64::NAN, prep.chain.len(), k, Some(e.to_string())),
                        }
                    })
                    .collect(),
            }
        }
    }
}

pub fn write_csv<W: io::Write>(records: &[ExperimentRecord], out: W) -> PipelineResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "graph_id",
            "m",
            "n",
            "fusion_type",
            "strategy",
            "p",
            "mfpt",
            "n_states",
            "n_initial_fusions",
            "seed",
            "error",
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> PipelineResult<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
