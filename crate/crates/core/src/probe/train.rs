//! Mini-batch Adam training on soft labels with validation-based early
//! stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TraceRecord;
use crate::probe::features::{FeatureLayout, Standardizer};
use crate::probe::mlp::{Adam, Mlp};
use crate::probe::{ProbeModel, HIDDEN};
use crate::simworld::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            max_epochs: 10,
            patience: 1,
            batch_size: 64,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |f: &str, m: &str| Err(Error::config(format!("train.{f}"), m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return cfg("learning_rate", "must be finite and > 0");
        }
        if self.max_epochs == 0 {
            return cfg("max_epochs", "must be >= 1");
        }
        if self.batch_size == 0 {
            return cfg("batch_size", "must be >= 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return cfg("adam_beta1", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return cfg("adam_beta2", "must lie in [0, 1)");
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return cfg("adam_eps", "must be finite and > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept; 0 means the initialization itself.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn labelled(records: &[TraceRecord], what: &str, dim: Option<usize>) -> Result<usize> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid(format!("{what} split is empty")))?;
    let dim = dim.unwrap_or(first.features.len());
    for r in records {
        if r.features.len() != dim {
            return Err(Error::invalid(format!(
                "{what} record for {} on {} has {} features, expected {dim}",
                r.strategy,
                r.query_id,
                r.features.len()
            )));
        }
        if !(0.0..=1.0).contains(&r.soft_label) || r.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{what} record for {} on {} has a non-finite feature or a label outside [0,1]",
                r.strategy, r.query_id
            )));
        }
    }
    Ok(dim)
}

/// Trains a fresh probe on `train_set`, tracking BCE on `val_set` after every
/// epoch, and returns the weights with the lowest validation loss (the
/// initialization counts as a candidate).
pub fn train(
    train_set: &[TraceRecord],
    val_set: &[TraceRecord],
    config: &TrainConfig,
) -> Result<(ProbeModel, TrainReport)> {
    config.validate()?;
    let dim = labelled(train_set, "training", None)?;
    labelled(val_set, "validation", Some(dim))?;
    let layout = FeatureLayout::for_dim(dim)?;

    let raw: Vec<&[f64]> = train_set.iter().map(|r| r.features.as_slice()).collect();
    let scaler = Standardizer::fit(&raw)?;
    let xs: Vec<Vec<f64>> = raw.iter().map(|x| scaler.apply(x)).collect();
    let ys: Vec<f64> = train_set.iter().map(|r| r.soft_label).collect();
    let val_xs: Vec<Vec<f64>> = val_set.iter().map(|r| scaler.apply(&r.features)).collect();
    let val_refs: Vec<&[f64]> = val_xs.iter().map(|x| x.as_slice()).collect();
    let val_ys: Vec<f64> = val_set.iter().map(|r| r.soft_label).collect();

    // Stream 0 initializes weights, stream 1 shuffles.
    let mut init_rng = SimRng::seed_from_u64(config.seed);
    let mut shuffle_rng = SimRng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut net = Mlp::init(dim, HIDDEN, HIDDEN, &mut init_rng);
    let mut opt = Adam::new(
        net.params().len(),
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    );
    let initial_val_loss = net.loss(&val_refs, &val_ys);
    if !initial_val_loss.is_finite() {
        return Err(Error::TrainingDivergence { epoch: 0 });
    }
    let mut best = (net.clone(), initial_val_loss, 0);
    let mut epochs = Vec::new();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad = vec![0.0; net.params().len()];

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let loss = net.loss_and_grad(&bx, &by, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDivergence { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(net.params_mut(), &grad);
        }
        let val_loss = net.loss(&val_refs, &val_ys);
        if !val_loss.is_finite() {
            return Err(Error::TrainingDivergence { epoch });
        }
        epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / xs.len() as f64,
            val_loss,
        });
        if val_loss < best.1 {
            best = (net.clone(), val_loss, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let (net, best_val_loss, best_epoch) = best;
    let report = TrainReport {
        initial_val_loss,
        epochs,
        best_epoch,
        best_val_loss,
    };
    Ok((ProbeModel::from_parts(layout, net, scaler), report))
}
