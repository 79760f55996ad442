//! Platt scaling on logits and the calibration/discrimination metrics used
//! to judge the probe.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probe::mlp::bce_with_logits;
use crate::simworld::sigmoid;

pub const ECE_BINS: usize = 15;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlattStatus {
    Converged,
    /// Hit the iteration cap before the gradient norm fell under tolerance,
    /// typically because the logits separate the labels perfectly.
    IterationLimit,
    /// Every label was identical; the identity map was kept.
    DegenerateLabels,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlattFit {
    pub a: f64,
    pub b: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub status: PlattStatus,
}

fn platt_loss(logits: &[f64], labels: &[f64], a: f64, b: f64) -> f64 {
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(l, y)| bce_with_logits(a * l + b, *y))
        .sum();
    total / logits.len() as f64
}

/// Fits `sigma(a * logit + b)` to soft labels by damped Newton steps with a
/// backtracking line search.
pub fn fit_platt(logits: &[f64], labels: &[f64]) -> Result<PlattFit> {
    if logits.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    if logits.len() != labels.len() {
        return Err(Error::invalid(
            "calibration logits and labels differ in length",
        ));
    }
    if logits.iter().chain(labels).any(|v| !v.is_finite()) {
        return Err(Error::invalid("calibration inputs must be finite"));
    }
    if labels.iter().all(|y| *y == labels[0]) {
        return Ok(PlattFit {
            a: 1.0,
            b: 0.0,
            iterations: 0,
            grad_norm: f64::NAN,
            status: PlattStatus::DegenerateLabels,
        });
    }

    let count = logits.len() as f64;
    let (mut a, mut b) = (1.0, 0.0);
    let mut loss = platt_loss(logits, labels, a, b);
    let mut grad_norm = f64::INFINITY;
    for iter in 0..NEWTON_MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (l, y) in logits.iter().zip(labels) {
            let p = sigmoid(a * l + b);
            let r = p - y;
            let w = p * (1.0 - p);
            ga += r * l;
            gb += r;
            haa += w * l * l;
            hab += w * l;
            hbb += w;
        }
        let (ga, gb) = (ga / count, gb / count);
        let (haa, hab, hbb) = (haa / count, hab / count, hbb / count);
        grad_norm = ga.hypot(gb);
        if grad_norm < NEWTON_TOL {
            return Ok(PlattFit {
                a,
                b,
                iterations: iter,
                grad_norm,
                status: PlattStatus::Converged,
            });
        }

        // Small ridge keeps the system solvable when every logit is equal.
        let ridge = 1e-12 + 1e-9 * (haa + hbb);
        let (haa, hbb) = (haa + ridge, hbb + ridge);
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if det > 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let slope = ga * da + gb * db;
        if slope >= 0.0 {
            da = -ga;
            db = -gb;
        }
        let slope = ga * da + gb * db;

        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial = platt_loss(logits, labels, a + t * da, b + t * db);
            if trial <= loss + 1e-4 * t * slope {
                a += t * da;
                b += t * db;
                loss = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable descent left: we sit at the optimum up to
            // rounding.
            return Ok(PlattFit {
                a,
                b,
                iterations: iter + 1,
                grad_norm,
                status: if grad_norm < 1e-6 {
                    PlattStatus::Converged
                } else {
                    PlattStatus::IterationLimit
                },
            });
        }
    }
    Ok(PlattFit {
        a,
        b,
        iterations: NEWTON_MAX_ITER,
        grad_norm,
        status: PlattStatus::IterationLimit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_prediction: f64,
    pub mean_label: f64,
}

impl ReliabilityBin {
    pub fn gap(&self) -> f64 {
        (self.mean_prediction - self.mean_label).abs()
    }
}

/// Equal-width bins over [0, 1]; a prediction of exactly 1 lands in the last bin.
pub fn reliability_curve(probs: &[f64], labels: &[f64], bins: usize) -> Vec<ReliabilityBin> {
    let mut sums = vec![(0usize, 0.0, 0.0); bins];
    for (p, y) in probs.iter().zip(labels) {
        let k = ((p * bins as f64) as usize).min(bins - 1);
        sums[k].0 += 1;
        sums[k].1 += p;
        sums[k].2 += y;
    }
    sums.into_iter()
        .enumerate()
        .map(|(k, (count, sp, sy))| {
            let c = count.max(1) as f64;
            ReliabilityBin {
                lower: k as f64 / bins as f64,
                upper: (k + 1) as f64 / bins as f64,
                count,
                mean_prediction: sp / c,
                mean_label: sy / c,
            }
        })
        .collect()
}

/// Count-weighted mean absolute gap between confidence and outcome.
pub fn expected_calibration_error(probs: &[f64], labels: &[f64], bins: usize) -> f64 {
    let total = probs.len() as f64;
    reliability_curve(probs, labels, bins)
        .iter()
        .map(|b| b.count as f64 / total * b.gap())
        .sum()
}

/// Largest gap over non-empty bins.
pub fn max_reliability_gap(curve: &[ReliabilityBin]) -> f64 {
    curve
        .iter()
        .filter(|b| b.count > 0)
        .map(ReliabilityBin::gap)
        .fold(0.0, f64::max)
}

/// Area under the ROC curve for separating `label >= 0.5`, via average
/// ranks (ties count one half). `None` when one class is absent.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] >= 0.5).collect();
    let n_pos = positives.len() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    let rank_sum: f64 = positives.iter().map(|&i| ranks[i]).sum();
    Some((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::SimRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn recovers_identity_on_exact_log_odds() {
        let mut rng = SimRng::seed_from_u64(5);
        let logits: Vec<f64> = (0..20_000).map(|_| rng.random_range(-4.0..4.0)).collect();
        let labels: Vec<f64> = logits
            .iter()
            .map(|l| {
                if rng.random::<f64>() < sigmoid(*l) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let fit = fit_platt(&logits, &labels).unwrap();
        assert_eq!(fit.status, PlattStatus::Converged);
        assert!((fit.a - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.b.abs() < 0.05, "{fit:?}");
        assert!(fit.grad_norm < 1e-8);
    }

    #[test]
    fn recovers_known_affine_map() {
        // Soft labels equal to the target probabilities make the optimum exact.
        let logits: Vec<f64> = (0..200).map(|i| i as f64 * 0.05 - 5.0).collect();
        let labels: Vec<f64> = logits.iter().map(|l| sigmoid(0.4 * l - 0.7)).collect();
        let fit = fit_platt(&logits, &labels).unwrap();
        assert!(
            (fit.a - 0.4).abs() < 1e-6 && (fit.b + 0.7).abs() < 1e-6,
            "{fit:?}"
        );
    }

    #[test]
    fn zero_logits_balanced_labels_map_to_half() {
        let logits = vec![0.0; 10];
        let labels: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let fit = fit_platt(&logits, &labels).unwrap();
        assert!(fit.b.abs() < 1e-9);
        assert!((sigmoid(fit.a * 0.0 + fit.b) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn identical_labels_fall_back_to_identity() {
        let fit = fit_platt(&[0.3, -1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(fit.status, PlattStatus::DegenerateLabels);
        assert_eq!((fit.a, fit.b), (1.0, 0.0));
        assert!(fit_platt(&[], &[]).is_err());
    }

    #[test]
    fn ece_hand_example() {
        // Bin [0, 1/15): p=0.0 vs y=0 -> 0. Bin containing 0.9: mean p 0.9,
        // mean y 0.5 -> gap 0.4 over half the mass.
        let ece = expected_calibration_error(&[0.0, 0.0, 0.9, 0.9], &[0.0, 0.0, 1.0, 0.0], 15);
        assert!((ece - 0.2).abs() < 1e-12);
        let curve = reliability_curve(&[1.0], &[1.0], 15);
        assert_eq!(curve[14].count, 1);
        assert_eq!(max_reliability_gap(&curve), 0.0);
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = SimRng::seed_from_u64(9);
        for _ in 0..20 {
            let scores: Vec<f64> = (0..40)
                .map(|_| (rng.random_range(0..8) as f64) / 8.0)
                .collect();
            let labels: Vec<f64> = (0..40)
                .map(|_| rng.random_range(0..3) as f64 / 2.0)
                .collect();
            let Some(auc) = roc_auc(&scores, &labels) else {
                continue;
            };
            let (mut wins, mut pairs) = (0.0, 0.0);
            for i in 0..40 {
                for j in 0..40 {
                    if labels[i] >= 0.5 && labels[j] < 0.5 {
                        pairs += 1.0;
                        wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                            std::cmp::Ordering::Greater => 1.0,
                            std::cmp::Ordering::Equal => 0.5,
                            std::cmp::Ordering::Less => 0.0,
                        };
                    }
                }
            }
            assert!((auc - wins / pairs).abs() < 1e-12);
        }
        assert_eq!(roc_auc(&[0.1, 0.2], &[1.0, 1.0]), None);
    }
}
