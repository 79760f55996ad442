//! Per-query strategy selection by predicted utility, plus the oracle and
//! static baselines it is measured against.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::CostTable;
use crate::error::{Error, Result};
use crate::model::{utility, Method, PenaltyWeights, QueryId, Strategy};
use crate::probe::ProbeModel;
use crate::simworld::QueryInstance;

/// Non-empty, duplicate-free set of strategies held in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Strategy>", into = "Vec<Strategy>")]
pub struct StrategySet(Vec<Strategy>);

impl TryFrom<Vec<Strategy>> for StrategySet {
    type Error = Error;

    fn try_from(v: Vec<Strategy>) -> Result<Self> {
        StrategySet::new(v)
    }
}

impl From<StrategySet> for Vec<Strategy> {
    fn from(s: StrategySet) -> Self {
        s.0
    }
}

impl StrategySet {
    pub fn new(mut strategies: Vec<Strategy>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::invalid("strategy set is empty"));
        }
        strategies.sort();
        if let Some(w) = strategies.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("strategy set lists {} twice", w[0])));
        }
        Ok(StrategySet(strategies))
    }

    /// Every sampling method at n in {1, 2, 4, 8, 16}, plus beam search with
    /// width 4 and depth 40 at N in {2, 4, 8, 16}.
    pub fn default_set() -> Self {
        let mut v = Vec::new();
        for n in [1, 2, 4, 8, 16] {
            v.push(Strategy::majority(n).expect("valid"));
            v.push(Strategy::best_of_n(n).expect("valid"));
            v.push(Strategy::weighted_best_of_n(n).expect("valid"));
        }
        for n in [2, 4, 8, 16] {
            v.push(Strategy::beam(n, 4, 40).expect("valid"));
        }
        StrategySet::new(v).expect("distinct")
    }

    /// Six beam configurations: N in {2, 4, 8} crossed with W in {2, 4}, depth 40.
    pub fn beam_only_default() -> Self {
        let mut v = Vec::new();
        for n in [2, 4, 8] {
            for w in [2, 4] {
                v.push(Strategy::beam(n, w, 40).expect("valid"));
            }
        }
        StrategySet::new(v).expect("distinct")
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, s: &Strategy) -> bool {
        self.0.binary_search(s).is_ok()
    }

    pub fn is_beam_only(&self) -> bool {
        self.0.iter().all(|s| s.method() == Method::BeamSearch)
    }

    /// Distinct `n` values, ascending.
    pub fn n_values(&self) -> Vec<u32> {
        let mut ns: Vec<u32> = self.0.iter().map(|s| s.n()).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }
}

/// Accuracy and costs for one strategy on one query, with the utility they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyUtility {
    pub strategy: Strategy,
    pub accuracy: f64,
    pub tokens: f64,
    pub latency: f64,
    pub utility: f64,
}

impl StrategyUtility {
    pub fn new(
        strategy: Strategy,
        accuracy: f64,
        tokens: f64,
        latency: f64,
        w: PenaltyWeights,
    ) -> Result<Self> {
        Ok(StrategyUtility {
            strategy,
            accuracy,
            tokens,
            latency,
            utility: utility(accuracy, tokens, latency, w)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub query_id: QueryId,
    pub weights: PenaltyWeights,
    pub chosen: Strategy,
    pub predicted: StrategyUtility,
    pub per_strategy: Vec<StrategyUtility>,
}

/// True when `a` should be preferred over `b`: higher utility, then lower
/// latency, then fewer tokens, then earlier canonical order.
fn beats(a: &StrategyUtility, b: &StrategyUtility) -> bool {
    a.utility
        .total_cmp(&b.utility)
        .then(b.latency.total_cmp(&a.latency))
        .then(b.tokens.total_cmp(&a.tokens))
        .then(b.strategy.cmp(&a.strategy))
        .is_gt()
}

/// Index of the preferred entry. `entries` must be non-empty.
pub fn argmax(entries: &[StrategyUtility]) -> usize {
    let mut best = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        if beats(e, &entries[best]) {
            best = i;
        }
    }
    best
}

/// Builds a decision from per-strategy `(accuracy, tokens, latency)` triples.
pub fn decide(
    query_id: QueryId,
    cells: impl IntoIterator<Item = (Strategy, f64, f64, f64)>,
    weights: PenaltyWeights,
) -> Result<RoutingDecision> {
    let per_strategy = cells
        .into_iter()
        .map(|(s, a, t, l)| StrategyUtility::new(s, a, t, l, weights))
        .collect::<Result<Vec<_>>>()?;
    if per_strategy.is_empty() {
        return Err(Error::invalid("no strategies to choose from"));
    }
    let predicted = per_strategy[argmax(&per_strategy)];
    Ok(RoutingDecision {
        query_id,
        weights,
        chosen: predicted.strategy,
        predicted,
        per_strategy,
    })
}

/// Picks the strategy maximizing predicted accuracy minus weighted predicted costs.
pub fn route(
    query: &QueryInstance,
    set: &StrategySet,
    probe: &ProbeModel,
    costs: &CostTable,
    weights: PenaltyWeights,
) -> Result<RoutingDecision> {
    let cells = set
        .strategies()
        .iter()
        .map(|s| {
            let (t, l) = costs.predict_cost(s)?;
            Ok((*s, probe.predict(query, s)?, t, l))
        })
        .collect::<Result<Vec<_>>>()?;
    decide(query.query_id, cells, weights)
}

/// Realized (or expected) accuracy and costs of one strategy on one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueOutcome {
    pub accuracy: f64,
    pub tokens: f64,
    pub latency: f64,
}

/// Argmax of true utility with the same tie-break as `route`.
pub fn oracle_route(
    query_id: QueryId,
    set: &StrategySet,
    outcomes: &BTreeMap<Strategy, TrueOutcome>,
    weights: PenaltyWeights,
) -> Result<RoutingDecision> {
    let cells = set
        .strategies()
        .iter()
        .map(|s| {
            let o = outcomes
                .get(s)
                .ok_or_else(|| Error::invalid(format!("no true outcome for {s} on {query_id}")))?;
            Ok((*s, o.accuracy, o.tokens, o.latency))
        })
        .collect::<Result<Vec<_>>>()?;
    decide(query_id, cells, weights)
}

/// A rule assigning a strategy to each query.
pub trait Policy: Sync {
    fn choose(&self, query: &QueryInstance) -> Result<Strategy>;
}

/// Sends every query to the same strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticPolicy(pub Strategy);

pub fn static_policy(strategy: Strategy) -> StaticPolicy {
    StaticPolicy(strategy)
}

impl Policy for StaticPolicy {
    fn choose(&self, _query: &QueryInstance) -> Result<Strategy> {
        Ok(self.0)
    }
}

/// `route` with fixed artifacts and weights.
pub struct AdaptivePolicy<'a> {
    pub set: &'a StrategySet,
    pub probe: &'a ProbeModel,
    pub costs: &'a CostTable,
    pub weights: PenaltyWeights,
}

impl Policy for AdaptivePolicy<'_> {
    fn choose(&self, query: &QueryInstance) -> Result<Strategy> {
        Ok(route(query, self.set, self.probe, self.costs, self.weights)?.chosen)
    }
}
