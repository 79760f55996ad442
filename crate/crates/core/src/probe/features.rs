//! Probe inputs: query embedding plus strategy descriptors, and the
//! per-column standardization learned from the training split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Method, Strategy};
use crate::simworld::QueryInstance;

pub const CONTEXT_COLUMNS: [&str; 4] = ["n", "width", "depth", "query_len"];
pub const METHOD_COLUMNS: [&str; 5] = ["beam", "best_of_n", "majority", "naive", "weighted"];

/// Columns after the embedding block.
pub const DESCRIPTOR_DIM: usize = CONTEXT_COLUMNS.len() + METHOD_COLUMNS.len();

/// Describes how a raw feature vector is laid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureLayout {
    pub embedding_dim: usize,
    pub columns: Vec<String>,
}

impl FeatureLayout {
    pub fn new(embedding_dim: usize) -> Self {
        let columns = (0..embedding_dim)
            .map(|i| format!("emb{i}"))
            .chain(CONTEXT_COLUMNS.iter().map(|c| c.to_string()))
            .chain(METHOD_COLUMNS.iter().map(|c| format!("is_{c}")))
            .collect();
        FeatureLayout {
            embedding_dim,
            columns,
        }
    }

    /// Recovers the layout from a raw vector length.
    pub fn for_dim(dim: usize) -> Result<Self> {
        if dim < DESCRIPTOR_DIM {
            return Err(Error::invalid(format!(
                "feature vector of length {dim} is shorter than the {DESCRIPTOR_DIM} descriptor columns"
            )));
        }
        Ok(Self::new(dim - DESCRIPTOR_DIM))
    }

    pub fn dim(&self) -> usize {
        self.embedding_dim + DESCRIPTOR_DIM
    }

    /// True when the column list is the one `new` would produce.
    pub fn is_consistent(&self) -> bool {
        *self == Self::new(self.embedding_dim)
    }
}

/// Raw, unstandardized probe input for one (query, strategy) pair.
pub fn assemble_features(query: &QueryInstance, strategy: &Strategy) -> Vec<f64> {
    let mut v = Vec::with_capacity(query.embedding.len() + DESCRIPTOR_DIM);
    v.extend_from_slice(&query.embedding);
    v.push(strategy.n() as f64);
    v.push(strategy.width().unwrap_or(0) as f64);
    v.push(strategy.depth().unwrap_or(0) as f64);
    v.push(query.query_len as f64);
    let m = strategy.method();
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    v.push(flag(m == Method::BeamSearch));
    v.push(flag(matches!(
        m,
        Method::BestOfNNaive | Method::BestOfNWeighted
    )));
    v.push(flag(m == Method::MajorityVote));
    v.push(flag(m == Method::BestOfNNaive));
    v.push(flag(m == Method::BestOfNWeighted));
    v
}

/// Column-wise `(x - mean) / std` with statistics from a fitting set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Columns whose
    /// spread is negligible relative to their magnitude get std 1.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("cannot standardize an empty feature set"))?;
        let dim = first.len();
        let count = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "feature rows have inconsistent lengths {dim} and {}",
                    row.len()
                )));
            }
            for (m, x) in means.iter_mut().zip(row.iter()) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= count);
        let mut vars = vec![0.0; dim];
        for row in rows {
            for ((v, x), m) in vars.iter_mut().zip(row.iter()).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let stds = vars
            .iter()
            .zip(&means)
            .map(|(v, m)| {
                let s = (v / count).sqrt();
                if s.is_finite() && s > 1e-12 * m.abs().max(1.0) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { means, stds })
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}
