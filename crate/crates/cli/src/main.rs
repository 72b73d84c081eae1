use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fusionnet::markov::DEFAULT_MAX_STATES;
use fusionnet::pipeline::{analyze, write_csv, DEFAULT_STEP_CAP};
use fusionnet::{
    baseline_rus, random_connected_graph, sweep, ExperimentRecord, FusionType, Graph, Strategy, SweepSpec,
};
use serde::Serialize;

/// Fusion-network analysis: expected fusion attempts for building graph states.
#[derive(Parser)]
#[command(name = "fusionnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse one graph under one strategy.
    Analyze(AnalyzeArgs),
    /// Repeat-until-success baseline for one graph.
    Baseline(BaselineArgs),
    /// Simulate the protocol and compare with the analytic value.
    Montecarlo(MonteCarloArgs),
    /// Run strategies and the baseline over random G(m, n) graphs.
    Sweep(SweepArgs),
    /// Write a random connected graph with m vertices and n edges as JSON.
    GenGraph(GenGraphArgs),
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Target graph as JSON (`{"vertices": [...], "edges": [[u, v], ...]}`).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "t1")]
    fusion_type: FusionType,
    #[arg(long, default_value = "s1")]
    strategy: Strategy,
    /// Fusion success probability.
    #[arg(long, default_value_t = 0.5)]
    prob: f64,
    /// Reorder rebuilt fusions after a failure; defaults to the strategy's ordering flag.
    #[arg(long)]
    reorder_on_failure: Option<bool>,
    /// Write the enumerated transition graph as JSON.
    #[arg(long)]
    dump_chain: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "t1")]
    fusion_type: FusionType,
    #[arg(long, default_value_t = 0.5)]
    prob: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    analyze: AnalyzeArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Abort a trial after this many fusion attempts.
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    step_cap: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 6)]
    m: usize,
    /// Edge counts, comma separated; each gets its own set of graphs.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    n: Vec<usize>,
    /// Random graphs per edge count.
    #[arg(long, default_value_t = 10)]
    graphs: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.66,0.75,0.85")]
    probs: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "t1,t2")]
    fusion_types: Vec<FusionType>,
    #[arg(long, value_delimiter = ',', default_value = "s1,s2,s3,s4")]
    strategies: Vec<Strategy>,
    /// Skip the repeat-until-success rows.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    reorder_on_failure: Option<bool>,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BaselineRow {
    fusion_type: FusionType,
    p: f64,
    k: usize,
    mfpt: f64,
}

#[derive(Serialize)]
struct MonteCarloRow {
    fusion_type: FusionType,
    strategy: String,
    p: f64,
    trials: usize,
    seed: u64,
    mean: f64,
    stderr: f64,
    mfpt: f64,
    z_score: f64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Analyze(a) => {
            let record = run_analyze(&a)?;
            emit_records(&[record], &a.output)
        }
        Command::Baseline(a) => {
            let g = read_graph(&a.graph)?;
            let k = fusionnet::build_network_sorted(&g, a.fusion_type)?.fusions().len();
            let mfpt = baseline_rus(&g, a.fusion_type, a.prob)?;
            emit_rows(&[BaselineRow { fusion_type: a.fusion_type, p: a.prob, k, mfpt }], &a.output)
        }
        Command::Montecarlo(a) => {
            let record = run_analyze(&a.analyze)?;
            let g = read_graph(&a.analyze.graph)?;
            let reorder = a.analyze.reorder_on_failure.unwrap_or(a.analyze.strategy.optimize_order);
            let mc = fusionnet::pipeline::monte_carlo_with(
                &g,
                a.analyze.fusion_type,
                a.analyze.strategy,
                a.analyze.prob,
                a.trials,
                a.seed,
                reorder,
                a.step_cap,
            )?;
            let z_score = if mc.stderr > 0.0 { (mc.mean - record.mfpt) / mc.stderr } else { 0.0 };
            let row = MonteCarloRow {
                fusion_type: record.fusion_type,
                strategy: record.strategy,
                p: record.p,
                trials: mc.trials,
                seed: a.seed,
                mean: mc.mean,
                stderr: mc.stderr,
                mfpt: record.mfpt,
                z_score,
            };
            emit_rows(&[row], &a.analyze.output)
        }
        Command::Sweep(a) => {
            if a.probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                bail!("probabilities must lie in (0, 1]");
            }
            let spec = SweepSpec {
                m: a.m,
                edges: a.n,
                graphs: a.graphs,
                fusion_types: a.fusion_types,
                strategies: a.strategies,
                include_baseline: !a.no_baseline,
                probs: a.probs,
                seed: a.seed,
                reorder_on_failure: a.reorder_on_failure,
                max_states: a.max_states,
            };
            let rows = sweep(&spec)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("warning: {failed} of {} rows failed, see the error column", rows.len());
            }
            emit_records(&rows, &a.output)
        }
        Command::GenGraph(a) => {
            let g = random_connected_graph(a.m, a.n, a.seed)?;
            let mut w = open_output(a.out.as_deref())?;
            writeln!(w, "{}", g.to_json())?;
            Ok(())
        }
    }
}

fn run_analyze(a: &AnalyzeArgs) -> Result<ExperimentRecord> {
    let g = read_graph(&a.graph)?;
    let reorder = a.reorder_on_failure.unwrap_or(a.strategy.optimize_order);
    let (record, prepared) = analyze(&g, a.fusion_type, a.strategy, a.prob, reorder, a.max_states)
        .with_context(|| format!("analysing {}", a.graph.display()))?;
    if let Some(path) = &a.dump_chain {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(file, &prepared.chain.export())?;
    }
    Ok(record)
}

fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let g = Graph::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(g)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_records(rows: &[ExperimentRecord], out: &Output) -> Result<()> {
    if out.json {
        return emit_json(rows, out);
    }
    write_csv(rows, open_output(out.out.as_deref())?)?;
    Ok(())
}

fn emit_rows<T: Serialize>(rows: &[T], out: &Output) -> Result<()> {
    if out.json {
        return emit_json(rows, out);
    }
    let mut w = csv::Writer::from_writer(open_output(out.out.as_deref())?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn emit_json<T: Serialize>(rows: &[T], out: &Output) -> Result<()> {
    let mut w = open_output(out.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, rows)?;
    writeln!(w)?;
    Ok(())
}
