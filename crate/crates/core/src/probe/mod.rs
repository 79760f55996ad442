//! Learned accuracy model: predicts the chance that a strategy answers a
//! query correctly from the query embedding and strategy descriptors.

pub mod calibration;
pub mod features;
pub mod mlp;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Strategy, TraceRecord};
use crate::simworld::{sigmoid, QueryInstance};

pub use calibration::{PlattFit, PlattStatus};
pub use features::{assemble_features, FeatureLayout, Standardizer};
pub use mlp::Mlp;
pub use train::{train, EpochStats, TrainConfig, TrainReport};

/// Width of both hidden layers.
pub const HIDDEN: usize = 200;

const FORMAT_TAG: &str = "compute-router-probe/1";

/// MLP plus the standardization and Platt parameters needed to turn raw
/// features into a calibrated probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    layout: FeatureLayout,
    net: Mlp,
    scaler: Standardizer,
    platt_a: f64,
    platt_b: f64,
    trained: bool,
}

impl ProbeModel {
    /// Freshly initialized, untrained model. `predict` refuses to run on it.
    pub fn untrained(layout: FeatureLayout, net: Mlp) -> Result<Self> {
        let dim = layout.dim();
        if net.in_dim() != dim {
            return Err(Error::invalid(format!(
                "network expects {} inputs but the layout has {dim}",
                net.in_dim()
            )));
        }
        Ok(ProbeModel {
            layout,
            net,
            scaler: Standardizer::identity(dim),
            platt_a: 1.0,
            platt_b: 0.0,
            trained: false,
        })
    }

    pub(crate) fn from_parts(layout: FeatureLayout, net: Mlp, scaler: Standardizer) -> Self {
        ProbeModel {
            layout,
            net,
            scaler,
            platt_a: 1.0,
            platt_b: 0.0,
            trained: true,
        }
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.scaler
    }

    pub fn platt(&self) -> (f64, f64) {
        (self.platt_a, self.platt_b)
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Uncalibrated network output for raw (unstandardized) features.
    pub fn logit(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.layout.dim() {
            return Err(Error::invalid(format!(
                "feature vector has {} entries, model expects {}",
                raw.len(),
                self.layout.dim()
            )));
        }
        Ok(self.net.forward(&self.scaler.apply(raw)))
    }

    /// Calibrated success probability, clamped away from exactly 0 and 1.
    pub fn predict_features(&self, raw: &[f64]) -> Result<f64> {
        if !self.trained {
            return Err(Error::State("probe has not been trained".into()));
        }
        let l = self.logit(raw)?;
        let p = sigmoid(self.platt_a * l + self.platt_b);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    pub fn predict(&self, query: &QueryInstance, strategy: &Strategy) -> Result<f64> {
        self.predict_features(&assemble_features(query, strategy))
    }

    pub fn with_platt(mut self, a: f64, b: f64) -> Self {
        self.platt_a = a;
        self.platt_b = b;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let t = |t: mlp::Tensor| self.net.tensor(t).to_vec();
        let file = ProbeFile {
            format: FORMAT_TAG.into(),
            layout: self.layout.clone(),
            input_dim: self.net.in_dim(),
            hidden: [self.net.hidden().0, self.net.hidden().1],
            w1: t(mlp::Tensor::W1),
            b1: t(mlp::Tensor::B1),
            w2: t(mlp::Tensor::W2),
            b2: t(mlp::Tensor::B2),
            w3: t(mlp::Tensor::W3),
            b3: self.net.tensor(mlp::Tensor::B3)[0],
            feature_means: self.scaler.means.clone(),
            feature_stds: self.scaler.stds.clone(),
            platt_a: self.platt_a,
            platt_b: self.platt_b,
            trained: self.trained,
        };
        serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ProbeFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("probe: {e}")))?;
        f.into_model()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk form: weight matrices flattened row-major, one row per output unit.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeFile {
    format: String,
    layout: FeatureLayout,
    input_dim: usize,
    hidden: [usize; 2],
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: f64,
    feature_means: Vec<f64>,
    feature_stds: Vec<f64>,
    platt_a: f64,
    platt_b: f64,
    trained: bool,
}

impl ProbeFile {
    fn into_model(self) -> Result<ProbeModel> {
        let bad = |m: String| Err(Error::Format(format!("probe: {m}")));
        if self.format != FORMAT_TAG {
            return bad(format!("unsupported format tag `{}`", self.format));
        }
        if !self.layout.is_consistent() {
            return bad("feature layout column names do not match its embedding size".into());
        }
        let [h1, h2] = self.hidden;
        let d = self.input_dim;
        if d != self.layout.dim() {
            return bad(format!(
                "input_dim {d} disagrees with layout size {}",
                self.layout.dim()
            ));
        }
        if h1 != HIDDEN || h2 != HIDDEN {
            return bad(format!(
                "hidden widths must be {HIDDEN}, found {h1} and {h2}"
            ));
        }
        for (name, got, want) in [
            ("w1", self.w1.len(), h1 * d),
            ("b1", self.b1.len(), h1),
            ("w2", self.w2.len(), h2 * h1),
            ("b2", self.b2.len(), h2),
            ("w3", self.w3.len(), h2),
            ("feature_means", self.feature_means.len(), d),
            ("feature_stds", self.feature_stds.len(), d),
        ] {
            if got != want {
                return bad(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if self
            .feature_stds
            .iter()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return bad("feature_stds must be finite and positive".into());
        }
        if !(self.platt_a.is_finite() && self.platt_b.is_finite()) {
            return bad("platt parameters must be finite".into());
        }
        let mut params = self.w1;
        params.extend(self.b1);
        params.extend(self.w2);
        params.extend(self.b2);
        params.extend(self.w3);
        params.push(self.b3);
        let net = Mlp::from_params(d, h1, h2, params).expect("lengths checked above");
        Ok(ProbeModel {
            layout: self.layout,
            net,
            scaler: Standardizer {
                means: self.feature_means,
                stds: self.feature_stds,
            },
            platt_a: self.platt_a,
            platt_b: self.platt_b,
            trained: self.trained,
        })
    }
}

/// Outcome of fitting Platt parameters on a held-out calibration split.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub fit: PlattFit,
    pub ece_before: f64,
    pub ece_after: f64,
    pub max_gap_after: f64,
}

/// Fits Platt scaling on the records' logits against their soft labels and
/// returns the recalibrated model. Degenerate label sets keep the identity map.
pub fn calibrate(
    model: &ProbeModel,
    records: &[TraceRecord],
) -> Result<(ProbeModel, CalibrationReport)> {
    if records.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    if !model.trained {
        return Err(Error::State("cannot calibrate an untrained probe".into()));
    }
    let logits = records
        .iter()
        .map(|r| model.logit(&r.features))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = records.iter().map(|r| r.soft_label).collect();
    let before: Vec<f64> = logits
        .iter()
        .map(|l| sigmoid(model.platt_a * l + model.platt_b))
        .collect();
    let fit = calibration::fit_platt(&logits, &labels)?;
    let calibrated = model.clone().with_platt(fit.a, fit.b);
    let after: Vec<f64> = logits.iter().map(|l| sigmoid(fit.a * l + fit.b)).collect();
    let bins = calibration::ECE_BINS;
    let report = CalibrationReport {
        fit,
        ece_before: calibration::expected_calibration_error(&before, &labels, bins),
        ece_after: calibration::expected_calibration_error(&after, &labels, bins),
        max_gap_after: calibration::max_reliability_gap(&calibration::reliability_curve(
            &after, &labels, bins,
        )),
    };
    Ok((calibrated, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QueryId;
    use crate::simworld::SimRng;
    use rand::SeedableRng;

    fn model(trained: bool) -> ProbeModel {
        let layout = FeatureLayout::new(3);
        let mut rng = SimRng::seed_from_u64(1);
        let net = Mlp::init(layout.dim(), HIDDEN, HIDDEN, &mut rng);
        let m = ProbeModel::untrained(layout.clone(), net.clone()).unwrap();
        if trained {
            ProbeModel::from_parts(layout, net, m.scaler.clone()).with_platt(1.3, -0.2)
        } else {
            m
        }
    }

    fn query() -> QueryInstance {
        QueryInstance {
            query_id: QueryId(0),
            difficulty: 0.5,
            embedding: vec![0.1, 0.2, 0.3],
            query_len: 80,
            truth: 0,
        }
    }

    #[test]
    fn untrained_model_refuses_to_predict() {
        let err = model(false).predict(&query(), &Strategy::majority(2).unwrap());
        assert!(matches!(err, Err(Error::State(_))));
    }

    #[test]
    fn prediction_is_pure_and_in_open_unit_interval() {
        let m = model(true);
        let s = Strategy::beam(4, 4, 40).unwrap();
        let p = m.predict(&query(), &s).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(p, m.predict(&query(), &s).unwrap());
        let extreme = m.clone().with_platt(1e6, 0.0);
        for raw in [vec![1e6; 12], vec![-1e6; 12]] {
            let p = extreme.predict_features(&raw).unwrap();
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            model(true).logit(&[0.0; 5]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model(true);
        let text = m.to_json().unwrap();
        let back = ProbeModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn loading_rejects_inconsistent_shapes() {
        let text = model(true).to_json().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["b1"].as_array_mut().unwrap().pop();
        assert!(matches!(
            ProbeModel::from_json(&v.to_string()),
            Err(Error::Format(_))
        ));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["hidden"] = serde_json::json!([200, 100]);
        assert!(ProbeModel::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["feature_stds"][0] = serde_json::json!(0.0);
        assert!(ProbeModel::from_json(&v.to_string()).is_err());
    }
}
