//! Shared data model: decoding strategies, penalty weights, run outcomes,
//! trace records, and the accuracy-minus-cost utility.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inference-time scaling method. Variant order is the canonical tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MajorityVote,
    BestOfNNaive,
    BestOfNWeighted,
    BeamSearch,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::MajorityVote,
        Method::BestOfNNaive,
        Method::BestOfNWeighted,
        Method::BeamSearch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MajorityVote => "majority_vote",
            Method::BestOfNNaive => "best_of_n_naive",
            Method::BestOfNWeighted => "best_of_n_weighted",
            Method::BeamSearch => "beam_search",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Method::MajorityVote => "mv",
            Method::BestOfNNaive => "bon",
            Method::BestOfNWeighted => "wbon",
            Method::BeamSearch => "beam",
        }
    }

    /// Sampling methods generate all candidates in one parallel call.
    pub fn is_parallel(self) -> bool {
        !matches!(self, Method::BeamSearch)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A decoding method plus its hyperparameters.
///
/// `width` and `depth` are present exactly when the method is beam search.
/// The derived ordering (method, n, width, depth; absent before present) is
/// the canonical strategy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "StrategyRepr", into = "StrategyRepr")]
pub struct Strategy {
    method: Method,
    n: u32,
    width: Option<u32>,
    depth: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyRepr {
    method: Method,
    n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<u32>,
}

impl TryFrom<StrategyRepr> for Strategy {
    type Error = Error;

    fn try_from(r: StrategyRepr) -> Result<Self> {
        Strategy::new(r.method, r.n, r.width, r.depth)
    }
}

impl From<Strategy> for StrategyRepr {
    fn from(s: Strategy) -> Self {
        StrategyRepr {
            method: s.method,
            n: s.n,
            width: s.width,
            depth: s.depth,
        }
    }
}

impl Strategy {
    pub fn new(method: Method, n: u32, width: Option<u32>, depth: Option<u32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("strategy n must be >= 1"));
        }
        match (method, width, depth) {
            (Method::BeamSearch, Some(w), Some(d)) => {
                if w == 0 || d == 0 {
                    return Err(Error::invalid("beam width and depth must be >= 1"));
                }
            }
            (Method::BeamSearch, _, _) => {
                return Err(Error::invalid("beam search requires both width and depth"));
            }
            (_, None, None) => {}
            (m, _, _) => {
                return Err(Error::invalid(format!("{m} takes no width/depth")));
            }
        }
        Ok(Strategy {
            method,
            n,
            width,
            depth,
        })
    }

    pub fn majority(n: u32) -> Result<Self> {
        Self::new(Method::MajorityVote, n, None, None)
    }

    pub fn best_of_n(n: u32) -> Result<Self> {
        Self::new(Method::BestOfNNaive, n, None, None)
    }

    pub fn weighted_best_of_n(n: u32) -> Result<Self> {
        Self::new(Method::BestOfNWeighted, n, None, None)
    }

    pub fn beam(n: u32, width: u32, depth: u32) -> Result<Self> {
        Self::new(Method::BeamSearch, n, Some(width), Some(depth))
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn width(&self) -> Option<u32> {
        self.width
    }

    pub fn depth(&self) -> Option<u32> {
        self.depth
    }
}

/// Total order used for deterministic tie-breaking.
pub fn canonical_strategy_order(a: &Strategy, b: &Strategy) -> Ordering {
    a.cmp(b)
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.width, self.depth) {
            (Some(w), Some(d)) => write!(f, "{}@{}x{}x{}", self.method.short(), self.n, w, d),
            _ => write!(f, "{}@{}", self.method.short(), self.n),
        }
    }
}

/// Parses the compact form produced by `Display`: `mv@4`, `bon@8`,
/// `wbon@16`, `beam@4x4x40`.
impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, params) = s
            .split_once('@')
            .ok_or_else(|| Error::invalid(format!("strategy `{s}`: expected <method>@<params>")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::invalid(format!("strategy `{s}`: bad integer `{t}`")))
        };
        match head.trim() {
            "mv" => Strategy::majority(num(params)?),
            "bon" => Strategy::best_of_n(num(params)?),
            "wbon" => Strategy::weighted_best_of_n(num(params)?),
            "beam" => {
                let parts: Vec<&str> = params.split('x').collect();
                if parts.len() != 3 {
                    return Err(Error::invalid(format!("strategy `{s}`: beam needs NxWxD")));
                }
                Strategy::beam(num(parts[0])?, num(parts[1])?, num(parts[2])?)
            }
            other => Err(Error::invalid(format!("unknown method tag `{other}`"))),
        }
    }
}

/// Utility per token (`lambda_t`) and per second (`lambda_l`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyWeights {
    pub lambda_t: f64,
    pub lambda_l: f64,
}

impl PenaltyWeights {
    pub const ZERO: PenaltyWeights = PenaltyWeights {
        lambda_t: 0.0,
        lambda_l: 0.0,
    };

    pub fn new(lambda_t: f64, lambda_l: f64) -> Result<Self> {
        for (name, v) in [("lambda_t", lambda_t), ("lambda_l", lambda_l)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(PenaltyWeights { lambda_t, lambda_l })
    }
}

/// `accuracy - lambda_t * tokens - lambda_l * latency`, evaluated left to right.
pub fn utility(accuracy: f64, tokens: f64, latency: f64, weights: PenaltyWeights) -> Result<f64> {
    let inputs = [
        accuracy,
        tokens,
        latency,
        weights.lambda_t,
        weights.lambda_l,
    ];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("utility inputs must be finite"));
    }
    Ok(accuracy - weights.lambda_t * tokens - weights.lambda_l * latency)
}

/// Identifier of a simulated query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub u64);

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Canonical answer id in `[0, answer_space)`.
pub type AnswerId = u32;

/// Result of executing one strategy once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub answer: AnswerId,
    pub correct: bool,
    pub tokens: u64,
    pub latency: f64,
}

/// Supervision record for one (query, strategy) cell, aggregated over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub strategy: Strategy,
    pub query_id: QueryId,
    pub features: Vec<f64>,
    pub soft_label: f64,
    pub mean_tokens: f64,
    pub mean_latency: f64,
    pub repeats: u32,
}

impl TraceRecord {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.soft_label) {
            return Err(Error::invalid(format!(
                "soft_label {} outside [0,1]",
                self.soft_label
            )));
        }
        let hits = self.soft_label * f64::from(self.repeats);
        if (hits - hits.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "soft_label {} is not a multiple of 1/{}",
                self.soft_label, self.repeats
            )));
        }
        if !self.mean_tokens.is_finite() || self.mean_tokens < 0.0 {
            return Err(Error::invalid("mean_tokens must be finite and >= 0"));
        }
        if !self.mean_latency.is_finite() || self.mean_latency <= 0.0 {
            return Err(Error::invalid("mean_latency must be finite and > 0"));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(())
    }
}
