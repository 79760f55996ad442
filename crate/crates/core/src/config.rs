//! Run configuration: defaults, the flat `key = value` file format with dotted
//! section prefixes, and the effective-config hash.
//!
//! Keys mirror the serialized field paths (`world.seed`, `world.latency.setup_s`,
//! `train.learning_rate`, `pipeline.repeats`, `sweep.lambda_t`, ...). Lists are
//! comma separated; strategies use the compact form (`mv@4, beam@4x4x40`) or
//! the names `default` and `beam-only`. The top-level `seed` key sets both the
//! world and the training seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{PenaltyWeights, Strategy};
use crate::probe::TrainConfig;
use crate::router::StrategySet;
use crate::simworld::WorldConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    /// Total simulated queries across all four splits.
    pub queries: usize,
    /// Runs per (query, strategy) cell, for both traces and evaluation.
    pub repeats: u32,
    /// Train, validation, calibration and test fractions, assigned by query id.
    pub splits: [f64; 4],
    pub strategies: StrategySet,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_t: Vec<f64>,
    pub lambda_l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub pipeline: PipelineSection,
    pub train: TrainConfig,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        RunConfig {
            train: TrainConfig {
                seed: world.seed,
                ..TrainConfig::default()
            },
            world,
            pipeline: PipelineSection {
                queries: 2500,
                repeats: 8,
                splits: [0.7, 0.1, 0.1, 0.1],
                strategies: StrategySet::default_set(),
                output_dir: PathBuf::from("out"),
            },
            sweep: SweepSection {
                lambda_t: vec![0.0, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3],
                lambda_l: vec![0.0, 1e-3, 1e-2, 1e-1],
            },
        }
    }
}

/// Contiguous query-id ranges for the four splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: std::ops::Range<u64>,
    pub validation: std::ops::Range<u64>,
    pub calibration: std::ops::Range<u64>,
    pub test: std::ops::Range<u64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.train.validate()?;
        let p = &self.pipeline;
        if p.repeats == 0 {
            return Err(Error::config("pipeline.repeats", "must be >= 1"));
        }
        if p.splits.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::config(
                "pipeline.splits",
                "fractions must be finite and >= 0",
            ));
        }
        let total: f64 = p.splits.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "pipeline.splits",
                format!("fractions must sum to 1, got {total}"),
            ));
        }
        let r = self.split_ranges();
        for (name, range) in [
            ("train", &r.train),
            ("validation", &r.validation),
            ("calibration", &r.calibration),
            ("test", &r.test),
        ] {
            if range.is_empty() {
                return Err(Error::config(
                    "pipeline.splits",
                    format!("{name} split is empty with {} queries", p.queries),
                ));
            }
        }
        for (field, grid) in [
            ("sweep.lambda_t", &self.sweep.lambda_t),
            ("sweep.lambda_l", &self.sweep.lambda_l),
        ] {
            if grid.is_empty() {
                return Err(Error::config(field, "grid must not be empty"));
            }
            if let Some(v) = grid.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::config(
                    field,
                    format!("values must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn split_ranges(&self) -> SplitRanges {
        let n = self.pipeline.queries as f64;
        let mut cum = 0.0;
        let mut bounds = [0u64; 5];
        for (i, f) in self.pipeline.splits.iter().enumerate() {
            cum += f;
            bounds[i + 1] = ((cum * n).round() as u64).min(self.pipeline.queries as u64);
        }
        bounds[4] = self.pipeline.queries as u64;
        SplitRanges {
            train: bounds[0]..bounds[1],
            validation: bounds[1]..bounds[2],
            calibration: bounds[2]..bounds[3],
            test: bounds[3]..bounds[4],
        }
    }

    /// Every (lambda_t, lambda_l) pair, lambda_l outermost.
    pub fn grid(&self) -> Result<Vec<PenaltyWeights>> {
        let mut out = Vec::new();
        for &ll in &self.sweep.lambda_l {
            for &lt in &self.sweep.lambda_t {
                out.push(PenaltyWeights::new(lt, ll)?);
            }
        }
        Ok(out)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.world.seed = seed;
        self.train.seed = seed;
    }

    /// Hex SHA-256 of the canonical JSON form. The output directory is
    /// excluded so relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["pipeline"]
            .as_object_mut()
            .expect("object")
            .remove("output_dir");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", i + 1), "expected `key = value`")
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one dotted key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "seed" {
            let seed = value.parse().map_err(|_| {
                Error::config(
                    "seed",
                    format!("expected an unsigned integer, got `{value}`"),
                )
            })?;
            self.set_seed(seed);
            return Ok(());
        }
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let slot = key
            .split('.')
            .try_fold(&mut tree, |node, part| node.get_mut(part))
            .filter(|n| !n.is_object())
            .ok_or_else(|| Error::config(key, "unknown configuration key"))?;
        *slot = parse_value(key, value, slot)?;
        *self = serde_json::from_value(tree).map_err(|e| Error::config(key, e.to_string()))?;
        Ok(())
    }
}

fn parse_value(key: &str, text: &str, current: &Value) -> Result<Value> {
    let bad = |what: &str| Error::config(key, format!("expected {what}, got `{text}`"));
    if key == "pipeline.strategies" {
        let set = match text {
            "default" => StrategySet::default_set(),
            "beam-only" => StrategySet::beam_only_default(),
            _ => {
                let list = text
                    .split(',')
                    .map(|s| s.parse::<Strategy>())
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::config(key, e.to_string()))?;
                StrategySet::new(list).map_err(|e| Error::config(key, e.to_string()))?
            }
        };
        return Ok(serde_json::to_value(set).expect("set serializes"));
    }
    match current {
        Value::Bool(_) => text
            .parse::<bool>()
            .map(Value::Bool)
            .map_err(|_| bad("true or false")),
        Value::Number(n) if n.is_u64() => text
            .parse::<u64>()
            .map(Value::from)
            .map_err(|_| bad("an unsigned integer")),
        Value::Number(_) => parse_float(text)
            .map(Value::from)
            .ok_or_else(|| bad("a number")),
        Value::String(_) => Ok(Value::String(text.to_string())),
        Value::Array(items) => {
            let elem = items.first().cloned().unwrap_or(Value::from(0.0));
            let parts: Vec<&str> = text
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            parts
                .iter()
                .map(|p| parse_value(key, p, &elem))
                .collect::<Result<Vec<_>>>()
                .map(Value::Array)
        }
        _ => Err(Error::config(key, "unsupported value type")),
    }
}

fn parse_float(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}
