//! Per-strategy cost estimates: repeat-weighted means of tokens and latency
//! over the training traces, looked up by exact strategy at routing time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Strategy, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub mean_tokens: f64,
    pub mean_latency: f64,
    pub support_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostTable {
    entries: BTreeMap<Strategy, CostEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostRow {
    strategy: Strategy,
    mean_tokens: f64,
    mean_latency: f64,
    support_count: u64,
}

/// Groups records by strategy and takes repeat-weighted means.
///
/// Records within a group are accumulated in a canonical order, so the
/// result does not depend on input order even at the bit level.
pub fn fit_costs(records: &[TraceRecord]) -> Result<CostTable> {
    if records.is_empty() {
        return Err(Error::invalid("cannot fit costs from an empty record set"));
    }
    let mut groups: BTreeMap<Strategy, Vec<&TraceRecord>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        groups.entry(r.strategy).or_default().push(r);
    }
    let entries = groups
        .into_iter()
        .map(|(s, mut group)| {
            group.sort_by(|a, b| {
                a.query_id
                    .cmp(&b.query_id)
                    .then(a.repeats.cmp(&b.repeats))
                    .then(a.mean_tokens.total_cmp(&b.mean_tokens))
                    .then(a.mean_latency.total_cmp(&b.mean_latency))
            });
            let (mut tokens, mut latency, mut weight) = (0.0, 0.0, 0u64);
            for r in group {
                // Running weighted mean: equal inputs reproduce themselves exactly.
                weight += u64::from(r.repeats);
                let share = f64::from(r.repeats) / weight as f64;
                tokens += (r.mean_tokens - tokens) * share;
                latency += (r.mean_latency - latency) * share;
            }
            (
                s,
                CostEntry {
                    mean_tokens: tokens,
                    mean_latency: latency,
                    support_count: weight,
                },
            )
        })
        .collect();
    Ok(CostTable { entries })
}

impl CostTable {
    /// Builds a table directly, validating each entry.
    pub fn from_entries(entries: impl IntoIterator<Item = (Strategy, CostEntry)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (s, e) in entries {
            if !(e.mean_tokens.is_finite() && e.mean_tokens >= 0.0) {
                return Err(Error::invalid(format!(
                    "{s}: mean_tokens must be finite and >= 0"
                )));
            }
            if !(e.mean_latency.is_finite() && e.mean_latency > 0.0) {
                return Err(Error::invalid(format!(
                    "{s}: mean_latency must be finite and > 0"
                )));
            }
            if e.support_count == 0 {
                return Err(Error::invalid(format!("{s}: support_count must be >= 1")));
            }
            if map.insert(s, e).is_some() {
                return Err(Error::invalid(format!("{s}: duplicate cost entry")));
            }
        }
        Ok(CostTable { entries: map })
    }

    /// `(tokens, latency)` for `strategy`, independent of the query.
    pub fn predict_cost(&self, strategy: &Strategy) -> Result<(f64, f64)> {
        self.entries
            .get(strategy)
            .map(|e| (e.mean_tokens, e.mean_latency))
            .ok_or(Error::UnknownStrategy(*strategy))
    }

    pub fn entry(&self, strategy: &Strategy) -> Option<&CostEntry> {
        self.entries.get(strategy)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Strategy, &CostEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<CostRow> = self
            .entries
            .iter()
            .map(|(s, e)| CostRow {
                strategy: *s,
                mean_tokens: e.mean_tokens,
                mean_latency: e.mean_latency,
                support_count: e.support_count,
            })
            .collect();
        serde_json::to_string_pretty(&rows).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rows: Vec<CostRow> =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("cost table: {e}")))?;
        Self::from_entries(rows.into_iter().map(|r| {
            (
                r.strategy,
                CostEntry {
                    mean_tokens: r.mean_tokens,
                    mean_latency: r.mean_latency,
                    support_count: r.support_count,
                },
            )
        }))
        .map_err(|e| Error::Format(format!("cost table: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
