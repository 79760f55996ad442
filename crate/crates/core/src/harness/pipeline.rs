//! Stage functions shared by the CLI and the end-to-end tests: simulate,
//! train, build the test bed, sweep, and write artifacts.

use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::cost::{fit_costs, CostTable};
use crate::error::{Error, Result};
use crate::harness::{
    compare_cost_models, oracle_sweep, select_queries, select_records, static_summaries, sweep,
    sweep_csv, CostComparison, CostSource, EvalSummary, OutcomeTable, PredictionTable, SweepPoint,
};
use crate::jsonl::{write_atomic, write_jsonl};
use crate::model::{Strategy, TraceRecord};
use crate::probe::calibration::roc_auc;
use crate::probe::{calibrate, train, CalibrationReport, ProbeModel, TrainReport};
use crate::simworld::{sample_queries, QueryInstance};

pub const TRACES_FILE: &str = "traces.jsonl";
pub const PROBE_FILE: &str = "probe.json";
pub const COSTS_FILE: &str = "costs.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const REPORT_FILE: &str = "train_report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// All queries of the configured world, ids `0..queries`.
pub fn world_queries(cfg: &RunConfig) -> Result<Vec<QueryInstance>> {
    sample_queries(&cfg.world, cfg.pipeline.queries)
}

/// Traces for the train, validation and calibration queries. Test queries
/// are only ever run fresh at evaluation time.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<TraceRecord>> {
    cfg.validate()?;
    let queries = world_queries(cfg)?;
    let r = cfg.split_ranges();
    let traced = select_queries(&queries, r.train.start..r.calibration.end);
    super::generate_traces(
        &cfg.world,
        &traced,
        &cfg.pipeline.strategies,
        cfg.pipeline.repeats,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainMetrics {
    pub train_records: usize,
    pub validation_records: usize,
    pub calibration_records: usize,
    pub training: TrainReport,
    pub validation_auc: Option<f64>,
    pub calibration: CalibrationReport,
}

pub struct Trained {
    pub probe: ProbeModel,
    pub costs: CostTable,
    pub metrics: TrainMetrics,
}

/// Splits traces by query id, trains and calibrates the probe, and fits the
/// cost table on the training split.
pub fn train_stage(cfg: &RunConfig, traces: &[TraceRecord]) -> Result<Trained> {
    cfg.validate()?;
    let r = cfg.split_ranges();
    if let Some(t) = traces
        .iter()
        .find(|t| !cfg.pipeline.strategies.contains(&t.strategy))
    {
        return Err(Error::UnknownStrategy(t.strategy));
    }
    let train_set = select_records(traces, &r.train);
    let val_set = select_records(traces, &r.validation);
    let cal_set = select_records(traces, &r.calibration);
    let (probe, training) = train(&train_set, &val_set, &cfg.train)?;
    let (probe, calibration) = calibrate(&probe, &cal_set)?;
    let costs = fit_costs(&train_set)?;
    let val_logits = val_set
        .iter()
        .map(|t| probe.logit(&t.features))
        .collect::<Result<Vec<_>>>()?;
    let val_labels: Vec<f64> = val_set.iter().map(|t| t.soft_label).collect();
    Ok(Trained {
        probe,
        costs,
        metrics: TrainMetrics {
            train_records: train_set.len(),
            validation_records: val_set.len(),
            calibration_records: cal_set.len(),
            training,
            validation_auc: roc_auc(&val_logits, &val_labels),
            calibration,
        },
    })
}

/// Fresh evaluation-seed outcomes for the test split.
pub fn test_bed(cfg: &RunConfig) -> Result<OutcomeTable> {
    cfg.validate()?;
    let queries = world_queries(cfg)?;
    let test = select_queries(&queries, cfg.split_ranges().test);
    OutcomeTable::build(
        &cfg.world,
        &test,
        &cfg.pipeline.strategies,
        cfg.pipeline.repeats,
    )
}

/// Everything measured on the test split.
pub struct Evaluation {
    pub predictions: PredictionTable,
    pub adaptive: Vec<SweepPoint>,
    pub oracle: Vec<SweepPoint>,
    pub statics: Vec<(Strategy, EvalSummary)>,
    pub cost_comparison: Vec<CostComparison>,
}

pub fn evaluate(
    cfg: &RunConfig,
    bed: &OutcomeTable,
    probe: &ProbeModel,
    costs: &CostTable,
) -> Result<Evaluation> {
    let grid = cfg.grid()?;
    let predictions = PredictionTable::build(probe, bed)?;
    Ok(Evaluation {
        adaptive: sweep(bed, &predictions, CostSource::Table(costs), &grid)?,
        oracle: oracle_sweep(bed, &grid)?,
        statics: static_summaries(bed)?,
        cost_comparison: compare_cost_models(bed, &predictions, costs, &grid)?,
        predictions,
    })
}

pub struct PipelineOutput {
    pub traces: Vec<TraceRecord>,
    pub trained: Trained,
    pub bed: OutcomeTable,
    pub evaluation: Evaluation,
}

pub fn run(cfg: &RunConfig) -> Result<PipelineOutput> {
    let traces = simulate(cfg)?;
    let trained = train_stage(cfg, &traces)?;
    let bed = test_bed(cfg)?;
    let evaluation = evaluate(cfg, &bed, &trained.probe, &trained.costs)?;
    Ok(PipelineOutput {
        traces,
        trained,
        bed,
        evaluation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub queries: usize,
    pub strategies: usize,
    pub records: usize,
    pub repeats: u32,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, format!("{text}\n").as_bytes())
}

pub fn write_traces(dir: &Path, cfg: &RunConfig, traces: &[TraceRecord]) -> Result<Manifest> {
    write_jsonl(&dir.join(TRACES_FILE), traces)?;
    let k = cfg.pipeline.strategies.len();
    let manifest = Manifest {
        command: "simulate".into(),
        seed: cfg.world.seed,
        config_hash: cfg.hash(),
        queries: traces.len() / k.max(1),
        strategies: k,
        records: traces.len(),
        repeats: cfg.pipeline.repeats,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_trained(dir: &Path, trained: &Trained) -> Result<()> {
    write_atomic(&dir.join(PROBE_FILE), trained.probe.to_json()?.as_bytes())?;
    write_atomic(
        &dir.join(COSTS_FILE),
        format!("{}\n", trained.costs.to_json()?).as_bytes(),
    )?;
    write_json(&dir.join(REPORT_FILE), &trained.metrics)
}

pub fn write_sweep(dir: &Path, points: &[SweepPoint]) -> Result<()> {
    write_atomic(&dir.join(SWEEP_FILE), sweep_csv(points)?.as_bytes())
}

/// Writes traces, probe, costs, report and sweep under `dir`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, out: &PipelineOutput) -> Result<()> {
    write_traces(dir, cfg, &out.traces)?;
    write_trained(dir, &out.trained)?;
    write_sweep(dir, &out.evaluation.adaptive)
}
