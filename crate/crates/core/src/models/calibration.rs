//! Logistic calibration of raw scores into probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest slope the fit may return; keeps the map strictly increasing.
const MIN_SCALE: f64 = 1e-6;
/// Logits are clamped so outputs stay strictly inside (0, 1).
const MAX_LOGIT: f64 = 30.0;
const RIDGE: f64 = 1e-6;

/// `p = sigmoid(scale * raw + offset)` with `scale > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub scale: f64,
    pub offset: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Calibrator {
    pub fn new(scale: f64, offset: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && offset.is_finite()) {
            return Err(Error::Argument(format!(
                "calibrator needs a finite positive scale, got scale={scale} offset={offset}"
            )));
        }
        Ok(Calibrator { scale, offset })
    }

    pub fn identity() -> Self {
        Calibrator {
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        sigmoid((self.scale * raw + self.offset).clamp(-MAX_LOGIT, MAX_LOGIT))
    }

    /// Weighted Platt scaling: Newton iterations on the weighted log loss
    /// against smoothed targets `(n+ + 1)/(n+ + 2)` and `1/(n- + 2)`.
    pub fn fit(raw: &[f64], values: &[bool], weights: &[f64]) -> Result<Self> {
        if raw.len() != values.len() || raw.len() != weights.len() {
            return Err(Error::Shape {
                expected: raw.len(),
                actual: values.len().min(weights.len()),
            });
        }
        let positives = values.iter().filter(|v| **v).count();
        let negatives = values.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(Error::DegenerateTrainingSet("calibration needs both classes".into()));
        }
        let hi = (positives as f64 + 1.0) / (positives as f64 + 2.0);
        let lo = 1.0 / (negatives as f64 + 2.0);
        let targets: Vec<f64> = values.iter().map(|&v| if v { hi } else { lo }).collect();

        // Standardise the input so Newton steps are well scaled.
        let wsum: f64 = weights.iter().sum();
        let mean = raw.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / wsum;
        let var = raw
            .iter()
            .zip(weights)
            .map(|(x, w)| w * (x - mean).powi(2))
            .sum::<f64>()
            / wsum;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        let xs: Vec<f64> = raw.iter().map(|x| (x - mean) / sd).collect();

        let (mut a, mut b) = (1.0f64, 0.0f64);
        let objective = |a: f64, b: f64| -> f64 {
            let mut l = 0.5 * RIDGE * a * a;
            for ((x, t), w) in xs.iter().zip(&targets).zip(weights) {
                let z = a * x + b;
                // log(1 + e^z) - t z, computed stably.
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                l += w * (softplus - t * z);
            }
            l
        };
        let mut current = objective(a, b);
        for _ in 0..100 {
            let (mut ga, mut gb) = (RIDGE * a, 0.0);
            let (mut haa, mut hab, mut hbb) = (RIDGE, 0.0, 0.0);
            for ((x, t), w) in xs.iter().zip(&targets).zip(weights) {
                let p = sigmoid(a * x + b);
                let r = w * (p - t);
                ga += r * x;
                gb += r;
                let s = w * p * (1.0 - p);
                haa += s * x * x;
                hab += s * x;
                hbb += s;
            }
            let det = haa * hbb - hab * hab;
            if det.abs() < 1e-300 {
                break;
            }
            let da = (hbb * ga - hab * gb) / det;
            let db = (haa * gb - hab * ga) / det;
            // Backtracking keeps the objective non-increasing.
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-8 {
                let (na, nb) = (a - step * da, b - step * db);
                let value = objective(na, nb);
                if value <= current {
                    a = na;
                    b = nb;
                    current = value;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || (da.abs() + db.abs()) * step < 1e-12 {
                break;
            }
        }
        // Undo standardisation: a * (x - mean)/sd + b.
        let scale = (a / sd).max(MIN_SCALE);
        let offset = b - a * mean / sd;
        Calibrator::new(scale, offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_is_monotone_and_open_interval() {
        let c = Calibrator::new(2.0, 0.5).unwrap();
        let mut prev = 0.0;
        for i in -200..200 {
            let p = c.apply(i as f64 * 0.05);
            assert!(p > 0.0 && p < 1.0);
            assert!(p > prev);
            prev = p;
        }
        assert!(c.apply(1e9) < 1.0 && c.apply(-1e9) > 0.0);
    }

    #[test]
    fn rejects_non_increasing() {
        assert!(Calibrator::new(0.0, 0.0).is_err());
        assert!(Calibrator::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn fit_recovers_logistic_relation() {
        // Deterministic sample from p(y=1|x) = sigmoid(3x - 1).
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..400 {
            let x = -2.0 + 4.0 * i as f64 / 399.0;
            let p = sigmoid(3.0 * x - 1.0);
            for k in 0..20 {
                xs.push(x);
                ys.push((k as f64 + 0.5) / 20.0 < p);
            }
        }
        let w = vec![1.0; xs.len()];
        let c = Calibrator::fit(&xs, &ys, &w).unwrap();
        assert!((c.scale - 3.0).abs() < 0.2, "{c:?}");
        assert!((c.offset + 1.0).abs() < 0.1, "{c:?}");
    }

    #[test]
    fn separable_data_stays_finite() {
        let xs = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let ys = [false, false, false, true, true, true];
        let c = Calibrator::fit(&xs, &ys, &[1.0; 6]).unwrap();
        assert!(c.scale.is_finite() && c.scale > 0.0);
        assert!(c.apply(3.0) > 0.7 && c.apply(-3.0) < 0.3);
    }

    #[test]
    fn reversed_relation_clamps_to_minimal_slope() {
        let xs = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let ys = [true, true, true, false, false, false];
        let c = Calibrator::fit(&xs, &ys, &[1.0; 6]).unwrap();
        assert_eq!(c.scale, MIN_SCALE);
    }
}
