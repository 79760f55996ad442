//! `compute-router` command line: simulate traces, train the probe and cost
//! table, route queries, and sweep penalty grids, handing artifacts over
//! through files in the output directory.
//!
//! Exit codes: 0 on success, 1 for bad input or configuration, 2 when the
//! filesystem fails us.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compute_router::config::RunConfig;
use compute_router::cost::CostTable;
use compute_router::error::{Error, Result};
use compute_router::harness::pipeline::{self, Trained};
use compute_router::harness::{
    beam_only_mode, compare_cost_models, comparison_csv, oracle_sweep, run_cell, select_queries,
    static_summaries, sweep, sweep_csv, CostSource, PredictionTable,
};
use compute_router::jsonl::{read_jsonl, write_atomic, write_jsonl};
use compute_router::model::{PenaltyWeights, TraceRecord};
use compute_router::probe::ProbeModel;
use compute_router::router::{oracle_route, route, RoutingDecision};
use compute_router::simworld::{QueryInstance, SeedDomain};

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const DECISIONS_FILE: &str = "decisions.jsonl";
const COMPARISON_FILE: &str = "cost_comparison.csv";
const ORACLE_SWEEP_FILE: &str = "oracle_sweep.csv";

#[derive(Parser)]
#[command(
    name = "compute-router",
    version,
    about = "Token- and latency-aware routing between inference-time scaling strategies"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat `key = value` config file applied over the defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for both the world and probe training.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (created when missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replace the strategy set with the six beam-search configurations.
    #[arg(long, global = true)]
    beam_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate traces for the train, validation and calibration queries.
    Simulate,
    /// Train and calibrate the probe and fit the cost table from traces.
    Train {
        /// Trace file; defaults to traces.jsonl in the output directory.
        #[arg(long, value_name = "PATH")]
        traces: Option<PathBuf>,
    },
    /// Route queries at one penalty setting and write decisions.jsonl.
    Route {
        #[command(flatten)]
        artifacts: ArtifactArgs,
        /// JSONL of queries; defaults to the simulated test split.
        #[arg(long, value_name = "PATH")]
        queries: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, value_name = "X")]
        lambda_t: f64,
        #[arg(long, default_value_t = 0.0, value_name = "X")]
        lambda_l: f64,
        /// Route on simulated true outcomes instead of the probe and cost table.
        #[arg(long)]
        oracle: bool,
    },
    /// Sweep the penalty grid on the test split and write sweep.csv.
    #[command(alias = "report")]
    Sweep {
        #[command(flatten)]
        artifacts: ArtifactArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Simulate, train and sweep in one go.
    Run {
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Args)]
struct ArtifactArgs {
    /// Probe file; defaults to probe.json in the output directory.
    #[arg(long, value_name = "PATH")]
    probe: Option<PathBuf>,
    /// Cost table; defaults to costs.json in the output directory.
    #[arg(long, value_name = "PATH")]
    costs: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated token penalties.
    #[arg(long, value_name = "A,B,C")]
    grid_lambda_t: Option<String>,
    /// Comma-separated latency penalties.
    #[arg(long, value_name = "A,B,C")]
    grid_lambda_l: Option<String>,
    /// Also write cost_comparison.csv (cost table vs per-query true costs).
    #[arg(long)]
    compare_cost_models: bool,
    /// Also write oracle_sweep.csv.
    #[arg(long)]
    oracle: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_environmental() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let sweep_args = match &cli.command {
        Command::Sweep { sweep, .. } | Command::Run { sweep } => Some(sweep),
        _ => None,
    };
    let cfg = effective_config(&cli.global, sweep_args)?;
    say!("config hash: {}", cfg.hash());
    let out = cfg.pipeline.output_dir.clone();
    match &cli.command {
        Command::Simulate => simulate(&cfg, &out).map(|_| ()),
        Command::Train { traces } => {
            let path = traces
                .clone()
                .unwrap_or_else(|| out.join(pipeline::TRACES_FILE));
            train(&cfg, &out, &read_jsonl(&path)?).map(|_| ())
        }
        Command::Route {
            artifacts,
            queries,
            lambda_t,
            lambda_l,
            oracle,
        } => {
            let w = PenaltyWeights::new(*lambda_t, *lambda_l)?;
            let queries = match queries {
                Some(p) => read_jsonl(p)?,
                None => select_queries(&pipeline::world_queries(&cfg)?, cfg.split_ranges().test),
            };
            let decisions = if *oracle {
                oracle_decisions(&cfg, &queries, w)?
            } else {
                let (probe, costs) = load_artifacts(artifacts, &out)?;
                queries
                    .iter()
                    .map(|q| route(q, &cfg.pipeline.strategies, &probe, &costs, w))
                    .collect::<Result<Vec<_>>>()?
            };
            write_jsonl(&out.join(DECISIONS_FILE), &decisions)?;
            say!(
                "routed {} queries -> {}",
                decisions.len(),
                out.join(DECISIONS_FILE).display()
            );
            Ok(())
        }
        Command::Sweep { artifacts, sweep } => {
            let (probe, costs) = load_artifacts(artifacts, &out)?;
            run_sweep(&cfg, &out, &probe, &costs, sweep)
        }
        Command::Run { sweep } => {
            let traces = simulate(&cfg, &out)?;
            let trained = train(&cfg, &out, &traces)?;
            run_sweep(&cfg, &out, &trained.probe, &trained.costs, sweep)
        }
    }
}

fn effective_config(g: &GlobalArgs, sweep: Option<&SweepArgs>) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &g.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            field: kv.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    if g.beam_only {
        cfg.set("pipeline.strategies", "beam-only")?;
    }
    if let Some(s) = sweep {
        if let Some(t) = &s.grid_lambda_t {
            cfg.set("sweep.lambda_t", t)?;
        }
        if let Some(l) = &s.grid_lambda_l {
            cfg.set("sweep.lambda_l", l)?;
        }
    }
    if let Some(out) = &g.out {
        cfg.pipeline.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<TraceRecord>> {
    let traces = pipeline::simulate(cfg)?;
    let manifest = pipeline::write_traces(out, cfg, &traces)?;
    say!(
        "simulated {} records ({} queries x {} strategies, {} repeats) -> {}",
        manifest.records,
        manifest.queries,
        manifest.strategies,
        manifest.repeats,
        out.join(pipeline::TRACES_FILE).display()
    );
    Ok(traces)
}

fn train(cfg: &RunConfig, out: &Path, traces: &[TraceRecord]) -> Result<Trained> {
    let trained = pipeline::train_stage(cfg, traces)?;
    pipeline::write_trained(out, &trained)?;
    let m = &trained.metrics;
    say!(
        "trained on {} records: best epoch {}, validation loss {:.5}, validation AUC {}",
        m.train_records,
        m.training.best_epoch,
        m.training.best_val_loss,
        m.validation_auc.map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    say!(
        "calibration: ECE {:.4} -> {:.4}, max bin gap {:.4}",
        m.calibration.ece_before,
        m.calibration.ece_after,
        m.calibration.max_gap_after
    );
    Ok(trained)
}

fn load_artifacts(a: &ArtifactArgs, out: &Path) -> Result<(ProbeModel, CostTable)> {
    let probe = ProbeModel::load(
        &a.probe
            .clone()
            .unwrap_or_else(|| out.join(pipeline::PROBE_FILE)),
    )?;
    let costs = CostTable::load(
        &a.costs
            .clone()
            .unwrap_or_else(|| out.join(pipeline::COSTS_FILE)),
    )?;
    Ok((probe, costs))
}

/// Routes on evaluation-seed outcomes of every strategy for each query.
fn oracle_decisions(
    cfg: &RunConfig,
    queries: &[QueryInstance],
    w: PenaltyWeights,
) -> Result<Vec<RoutingDecision>> {
    let set = &cfg.pipeline.strategies;
    queries
        .iter()
        .map(|q| {
            let outcomes = set
                .strategies()
                .iter()
                .map(|s| {
                    let cell = run_cell(
                        &cfg.world,
                        q,
                        s,
                        cfg.pipeline.repeats,
                        SeedDomain::Evaluation,
                    )?;
                    Ok((*s, cell.outcome()))
                })
                .collect::<Result<_>>()?;
            oracle_route(q.query_id, set, &outcomes, w)
        })
        .collect()
}

fn run_sweep(
    cfg: &RunConfig,
    out: &Path,
    probe: &ProbeModel,
    costs: &CostTable,
    args: &SweepArgs,
) -> Result<()> {
    let grid = cfg.grid()?;
    let bed = pipeline::test_bed(cfg)?;
    let preds = PredictionTable::build(probe, &bed)?;
    let points = if cfg.pipeline.strategies.is_beam_only() {
        beam_only_mode(&bed, &preds, costs, &grid)?
    } else {
        sweep(&bed, &preds, CostSource::Table(costs), &grid)?
    };
    write_atomic(
        &out.join(pipeline::SWEEP_FILE),
        sweep_csv(&points)?.as_bytes(),
    )?;
    say!(
        "swept {} grid points -> {}",
        points.len(),
        out.join(pipeline::SWEEP_FILE).display()
    );
    for (s, e) in static_summaries(&bed)? {
        say!(
            "  static {s:<16} accuracy {:.4}  tokens {:>8.1}  latency {:.3}s",
            e.mean_accuracy,
            e.mean_tokens,
            e.mean_latency
        );
    }
    for p in &points {
        say!(
            "  adaptive ({}, {}) accuracy {:.4}  tokens {:>8.1}  latency {:.3}s",
            p.weights.lambda_t,
            p.weights.lambda_l,
            p.mean_accuracy,
            p.mean_tokens,
            p.mean_latency
        );
    }
    if args.compare_cost_models {
        let rows = compare_cost_models(&bed, &preds, costs, &grid)?;
        write_atomic(
            &out.join(COMPARISON_FILE),
            comparison_csv(&rows)?.as_bytes(),
        )?;
        say!(
            "cost-model comparison -> {}",
            out.join(COMPARISON_FILE).display()
        );
    }
    if args.oracle {
        let rows = oracle_sweep(&bed, &grid)?;
        write_atomic(&out.join(ORACLE_SWEEP_FILE), sweep_csv(&rows)?.as_bytes())?;
        say!("oracle sweep -> {}", out.join(ORACLE_SWEEP_FILE).display());
    }
    Ok(())
}
