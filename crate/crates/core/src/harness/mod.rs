//! Experiment harness: trace collection, fresh-seed policy evaluation,
//! penalty-weight sweeps and the cost-model comparison.

pub mod pipeline;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::CostTable;
use crate::error::{Error, Result};
use crate::model::{utility, Method, PenaltyWeights, Strategy, TraceRecord};
use crate::probe::{assemble_features, ProbeModel};
use crate::router::{
    argmax, decide, Policy, RoutingDecision, StrategySet, StrategyUtility, TrueOutcome,
};
use crate::simworld::{cell_rng, QueryInstance, SeedDomain, WorldConfig};
use crate::strategy::run_strategy;

/// Aggregate of `repeats` independent runs of one strategy on one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    pub hits: u32,
    pub repeats: u32,
    pub mean_tokens: f64,
    pub mean_latency: f64,
}

impl CellStats {
    pub fn accuracy(&self) -> f64 {
        f64::from(self.hits) / f64::from(self.repeats)
    }

    pub fn outcome(&self) -> TrueOutcome {
        TrueOutcome {
            accuracy: self.accuracy(),
            tokens: self.mean_tokens,
            latency: self.mean_latency,
        }
    }
}

/// Runs one cell with per-repeat derived seeds. Means are running means, so
/// repeats with identical costs reproduce that cost exactly.
pub fn run_cell(
    world: &WorldConfig,
    query: &QueryInstance,
    strategy: &Strategy,
    repeats: u32,
    domain: SeedDomain,
) -> Result<CellStats> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let (mut hits, mut tokens, mut latency) = (0, 0.0, 0.0);
    for r in 0..repeats {
        let mut rng = cell_rng(world.seed, domain, query.query_id, strategy, r);
        let out = run_strategy(world, query, strategy, &mut rng)?;
        hits += u32::from(out.correct);
        let k = f64::from(r + 1);
        tokens += (out.tokens as f64 - tokens) / k;
        latency += (out.latency - latency) / k;
    }
    Ok(CellStats {
        hits,
        repeats,
        mean_tokens: tokens,
        mean_latency: latency,
    })
}

/// One record per (query, strategy), query-major, strategies in canonical order.
pub fn generate_traces(
    world: &WorldConfig,
    queries: &[QueryInstance],
    set: &StrategySet,
    repeats: u32,
) -> Result<Vec<TraceRecord>> {
    let cells: Vec<(&QueryInstance, &Strategy)> = queries
        .iter()
        .flat_map(|q| set.strategies().iter().map(move |s| (q, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(q, s)| {
            let stats = run_cell(world, q, s, repeats, SeedDomain::Traces)?;
            Ok(TraceRecord {
                strategy: *s,
                query_id: q.query_id,
                features: assemble_features(q, s),
                soft_label: stats.accuracy(),
                mean_tokens: stats.mean_tokens,
                mean_latency: stats.mean_latency,
                repeats,
            })
        })
        .collect()
}

/// Means over queries of accuracy, tokens and latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub mean_accuracy: f64,
    pub mean_tokens: f64,
    pub mean_latency: f64,
}

fn summarize(cells: &[TrueOutcome]) -> EvalSummary {
    let n = cells.len() as f64;
    EvalSummary {
        mean_accuracy: cells.iter().map(|c| c.accuracy).sum::<f64>() / n,
        mean_tokens: cells.iter().map(|c| c.tokens).sum::<f64>() / n,
        mean_latency: cells.iter().map(|c| c.latency).sum::<f64>() / n,
    }
}

/// Runs the policy's choice on every query with evaluation-domain seeds.
pub fn evaluate_policy(
    policy: &dyn Policy,
    queries: &[QueryInstance],
    world: &WorldConfig,
    repeats: u32,
) -> Result<EvalSummary> {
    if queries.is_empty() {
        return Err(Error::invalid("no queries to evaluate"));
    }
    let cells = queries
        .par_iter()
        .map(|q| {
            let s = policy.choose(q)?;
            Ok(run_cell(world, q, &s, repeats, SeedDomain::Evaluation)?.outcome())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&cells))
}

/// Evaluation-domain outcomes for every (test query, strategy) cell.
///
/// Because each cell's seeds depend only on the cell, looking a policy's
/// choices up here gives exactly what `evaluate_policy` would measure.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    set: StrategySet,
    queries: Vec<QueryInstance>,
    cells: Vec<TrueOutcome>,
}

impl OutcomeTable {
    pub fn build(
        world: &WorldConfig,
        queries: &[QueryInstance],
        set: &StrategySet,
        repeats: u32,
    ) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::invalid("no test queries"));
        }
        let pairs: Vec<(&QueryInstance, &Strategy)> = queries
            .iter()
            .flat_map(|q| set.strategies().iter().map(move |s| (q, s)))
            .collect();
        let cells = pairs
            .par_iter()
            .map(|&(q, s)| Ok(run_cell(world, q, s, repeats, SeedDomain::Evaluation)?.outcome()))
            .collect::<Result<Vec<_>>>()?;
        Ok(OutcomeTable {
            set: set.clone(),
            queries: queries.to_vec(),
            cells,
        })
    }

    pub fn set(&self) -> &StrategySet {
        &self.set
    }

    pub fn queries(&self) -> &[QueryInstance] {
        &self.queries
    }

    pub fn cell(&self, query_index: usize, strategy_index: usize) -> &TrueOutcome {
        &self.cells[query_index * self.set.len() + strategy_index]
    }

    pub fn row(&self, query_index: usize) -> &[TrueOutcome] {
        let k = self.set.len();
        &self.cells[query_index * k..(query_index + 1) * k]
    }

    pub fn outcomes(&self, query_index: usize) -> BTreeMap<Strategy, TrueOutcome> {
        self.set
            .strategies()
            .iter()
            .copied()
            .zip(self.row(query_index).iter().copied())
            .collect()
    }

    pub fn strategy_index(&self, s: &Strategy) -> Result<usize> {
        self.set
            .strategies()
            .binary_search(s)
            .map_err(|_| Error::UnknownStrategy(*s))
    }

    /// Realized outcomes of a per-query choice vector (strategy indices).
    pub fn realize(&self, choices: &[usize]) -> Vec<TrueOutcome> {
        choices
            .iter()
            .enumerate()
            .map(|(q, &s)| *self.cell(q, s))
            .collect()
    }

    pub fn summarize(&self, choices: &[usize]) -> EvalSummary {
        summarize(&self.realize(choices))
    }

    /// Mean over queries of each query's realized utility.
    pub fn mean_utility(&self, choices: &[usize], w: PenaltyWeights) -> Result<f64> {
        let total = self
            .realize(choices)
            .iter()
            .map(|c| utility(c.accuracy, c.tokens, c.latency, w))
            .sum::<Result<f64>>()?;
        Ok(total / choices.len() as f64)
    }

    pub fn static_choices(&self, s: &Strategy) -> Result<Vec<usize>> {
        Ok(vec![self.strategy_index(s)?; self.queries.len()])
    }

    /// Per-query argmax of realized utility.
    pub fn oracle_choices(&self, w: PenaltyWeights) -> Result<Vec<usize>> {
        (0..self.queries.len())
            .map(|q| {
                let entries = self
                    .set
                    .strategies()
                    .iter()
                    .zip(self.row(q))
                    .map(|(s, o)| StrategyUtility::new(*s, o.accuracy, o.tokens, o.latency, w))
                    .collect::<Result<Vec<_>>>()?;
                Ok(argmax(&entries))
            })
            .collect()
    }
}

/// Probe predictions for every (test query, strategy), query-major.
#[derive(Debug, Clone)]
pub struct PredictionTable {
    pub k: usize,
    pub accuracy: Vec<f64>,
}

impl PredictionTable {
    pub fn build(probe: &ProbeModel, table: &OutcomeTable) -> Result<Self> {
        let k = table.set.len();
        let accuracy = table
            .queries
            .par_iter()
            .map(|q| {
                table
                    .set
                    .strategies()
                    .iter()
                    .map(|s| probe.predict(q, s))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        Ok(PredictionTable { k, accuracy })
    }

    /// Uses the realized accuracies as predictions.
    pub fn oracle(table: &OutcomeTable) -> Self {
        PredictionTable {
            k: table.set.len(),
            accuracy: table.cells.iter().map(|c| c.accuracy).collect(),
        }
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.accuracy[q * self.k..(q + 1) * self.k]
    }
}

/// Where each routed query gets its cost estimates from.
#[derive(Debug, Clone, Copy)]
pub enum CostSource<'a> {
    Table(&'a CostTable),
    /// The realized per-query means from the outcome table.
    PerQueryTruth,
}

/// Routes every test query and returns the decisions.
pub fn route_all(
    table: &OutcomeTable,
    preds: &PredictionTable,
    costs: CostSource<'_>,
    w: PenaltyWeights,
) -> Result<Vec<RoutingDecision>> {
    let set = table.set.strategies();
    let fixed: Option<Vec<(f64, f64)>> = match costs {
        CostSource::Table(t) => Some(
            set.iter()
                .map(|s| t.predict_cost(s))
                .collect::<Result<_>>()?,
        ),
        CostSource::PerQueryTruth => None,
    };
    (0..table.queries.len())
        .map(|q| {
            let cells = set.iter().enumerate().map(|(i, s)| {
                let (t, l) = match &fixed {
                    Some(c) => c[i],
                    None => {
                        let o = table.cell(q, i);
                        (o.tokens, o.latency)
                    }
                };
                (*s, preds.row(q)[i], t, l)
            });
            decide(table.queries[q].query_id, cells, w)
        })
        .collect()
}

fn choice_indices(table: &OutcomeTable, decisions: &[RoutingDecision]) -> Result<Vec<usize>> {
    decisions
        .iter()
        .map(|d| table.strategy_index(&d.chosen))
        .collect()
}

/// One row of a sweep: realized means and routing shares at one weight pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub weights: PenaltyWeights,
    pub mean_accuracy: f64,
    pub mean_tokens: f64,
    pub mean_latency: f64,
    pub mean_utility: f64,
    /// Mean predicted token cost of the chosen strategies.
    pub mean_chosen_predicted_tokens: f64,
    pub mean_chosen_n: f64,
    pub method_shares: BTreeMap<Method, f64>,
    pub n_shares: BTreeMap<u32, f64>,
}

impl SweepPoint {
    fn from_choices(
        table: &OutcomeTable,
        decisions: &[RoutingDecision],
        w: PenaltyWeights,
    ) -> Result<Self> {
        let choices = choice_indices(table, decisions)?;
        let summary = table.summarize(&choices);
        let count = decisions.len() as f64;
        let mut method_shares: BTreeMap<Method, f64> =
            Method::ALL.iter().map(|m| (*m, 0.0)).collect();
        let mut n_shares: BTreeMap<u32, f64> =
            table.set.n_values().into_iter().map(|n| (n, 0.0)).collect();
        for d in decisions {
            *method_shares
                .get_mut(&d.chosen.method())
                .expect("all methods") += 1.0;
            *n_shares.get_mut(&d.chosen.n()).expect("n from set") += 1.0;
        }
        method_shares.values_mut().for_each(|v| *v /= count);
        n_shares.values_mut().for_each(|v| *v /= count);
        Ok(SweepPoint {
            weights: w,
            mean_accuracy: summary.mean_accuracy,
            mean_tokens: summary.mean_tokens,
            mean_latency: summary.mean_latency,
            mean_utility: table.mean_utility(&choices, w)?,
            mean_chosen_predicted_tokens: decisions.iter().map(|d| d.predicted.tokens).sum::<f64>()
                / count,
            mean_chosen_n: decisions
                .iter()
                .map(|d| f64::from(d.chosen.n()))
                .sum::<f64>()
                / count,
            method_shares,
            n_shares,
        })
    }
}

/// Routes the test set at every weight pair and realizes the choices.
pub fn sweep(
    table: &OutcomeTable,
    preds: &PredictionTable,
    costs: CostSource<'_>,
    grid: &[PenaltyWeights],
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty weight grid"));
    }
    grid.iter()
        .map(|&w| SweepPoint::from_choices(table, &route_all(table, preds, costs, w)?, w))
        .collect()
}

/// Oracle routing (realized accuracy and costs) at every weight pair.
pub fn oracle_sweep(table: &OutcomeTable, grid: &[PenaltyWeights]) -> Result<Vec<SweepPoint>> {
    sweep(
        table,
        &PredictionTable::oracle(table),
        CostSource::PerQueryTruth,
        grid,
    )
}

/// Static policies realized on the test set.
pub fn static_summaries(table: &OutcomeTable) -> Result<Vec<(Strategy, EvalSummary)>> {
    table
        .set
        .strategies()
        .iter()
        .map(|s| Ok((*s, table.summarize(&table.static_choices(s)?))))
        .collect()
}

/// Sweep restricted to beam-search configurations.
pub fn beam_only_mode(
    table: &OutcomeTable,
    preds: &PredictionTable,
    costs: &CostTable,
    grid: &[PenaltyWeights],
) -> Result<Vec<SweepPoint>> {
    if !table.set.is_beam_only() {
        return Err(Error::invalid(
            "beam-only mode needs a strategy set made only of beam-search configurations",
        ));
    }
    sweep(table, preds, CostSource::Table(costs), grid)
}

/// Routing with fitted cost means against routing with per-query true costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostComparison {
    pub weights: PenaltyWeights,
    pub table: SweepPoint,
    pub per_query: SweepPoint,
}

impl CostComparison {
    /// `|u_table - u_true| / max(|u_table|, |u_true|)`, zero when both vanish.
    pub fn relative_gap(&self) -> f64 {
        let (a, b) = (self.table.mean_utility, self.per_query.mean_utility);
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    }
}

pub fn compare_cost_models(
    table: &OutcomeTable,
    preds: &PredictionTable,
    costs: &CostTable,
    grid: &[PenaltyWeights],
) -> Result<Vec<CostComparison>> {
    let a = sweep(table, preds, CostSource::Table(costs), grid)?;
    let b = sweep(table, preds, CostSource::PerQueryTruth, grid)?;
    Ok(a.into_iter()
        .zip(b)
        .map(|(t, p)| CostComparison {
            weights: t.weights,
            table: t,
            per_query: p,
        })
        .collect())
}

/// Sweep rows as CSV: realized means, then one share column per method and
/// per `n` value.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ns: Vec<u32> = points
        .first()
        .map(|p| p.n_shares.keys().copied().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "lambda_t",
        "lambda_l",
        "mean_accuracy",
        "mean_tokens",
        "mean_latency",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(Method::ALL.iter().map(|m| format!("share_{}", m.as_str())));
    header.extend(ns.iter().map(|n| format!("share_n{n}")));
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let mut row = vec![
            p.weights.lambda_t.to_string(),
            p.weights.lambda_l.to_string(),
            p.mean_accuracy.to_string(),
            p.mean_tokens.to_string(),
            p.mean_latency.to_string(),
        ];
        row.extend(Method::ALL.iter().map(|m| p.method_shares[m].to_string()));
        row.extend(ns.iter().map(|n| p.n_shares[n].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn comparison_csv(rows: &[CostComparison]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "lambda_t",
        "lambda_l",
        "table_mean_utility",
        "true_cost_mean_utility",
        "relative_gap",
        "table_mean_accuracy",
        "true_cost_mean_accuracy",
        "table_mean_tokens",
        "true_cost_mean_tokens",
        "table_mean_latency",
        "true_cost_mean_latency",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.weights.lambda_t.to_string(),
            r.weights.lambda_l.to_string(),
            r.table.mean_utility.to_string(),
            r.per_query.mean_utility.to_string(),
            r.relative_gap().to_string(),
            r.table.mean_accuracy.to_string(),
            r.per_query.mean_accuracy.to_string(),
            r.table.mean_tokens.to_string(),
            r.per_query.mean_tokens.to_string(),
            r.table.mean_latency.to_string(),
            r.per_query.mean_latency.to_string(),
        ])
        .map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
        .map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Query ids are the positions in `sample_queries`; pick those in `range`.
pub fn select_queries(all: &[QueryInstance], range: std::ops::Range<u64>) -> Vec<QueryInstance> {
    all.iter()
        .filter(|q| range.contains(&q.query_id.0))
        .cloned()
        .collect()
}

/// Records whose query id falls in `range`.
pub fn select_records(records: &[TraceRecord], range: &std::ops::Range<u64>) -> Vec<TraceRecord> {
    records
        .iter()
        .filter(|r| range.contains(&r.query_id.0))
        .cloned()
        .collect()
}
