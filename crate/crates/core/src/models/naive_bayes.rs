//! Weighted Gaussian naive Bayes over dense feature vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance floor keeping constant dimensions from producing zero variances.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Per-class moments; index 0 is the negative class, 1 the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub priors: [f64; 2],
}

impl GaussianNb {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn class_log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.means[class]
            .iter()
            .zip(&self.variances[class])
            .zip(x)
            .map(|((m, v), xi)| -0.5 * (ln_2pi + v.ln()) - (xi - m).powi(2) / (2.0 * v))
            .sum()
    }

    /// Posterior probability of the positive class, evaluated in log space.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let l0 = self.priors[0].ln() + self.class_log_likelihood(0, x);
        let l1 = self.priors[1].ln() + self.class_log_likelihood(1, x);
        // 1 / (1 + exp(l0 - l1)), arranged to avoid overflow.
        let d = l0 - l1;
        Ok(if d > 0.0 {
            let e = (-d).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + d.exp())
        })
    }
}

/// Closed-form weighted fit: per class and dimension the weighted mean and
/// (population) variance, priors from the weighted class totals.
pub fn fit_gaussian_nb(features: &[Vec<f64>], values: &[bool], weights: &[f64]) -> Result<GaussianNb> {
    if features.len() != values.len() || features.len() != weights.len() {
        return Err(Error::Shape {
            expected: features.len(),
            actual: values.len().min(weights.len()),
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Argument(format!(
            "sample weights must be finite and non-negative, got {w}"
        )));
    }
    let dim = features.first().map(Vec::len).unwrap_or(0);
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            actual: f.len(),
        });
    }
    let mut counts = [0usize; 2];
    let mut totals = [0.0f64; 2];
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    for ((x, &v), &w) in features.iter().zip(values).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let c = usize::from(v);
        counts[c] += 1;
        totals[c] += w;
        for (s, xi) in sums[c].iter_mut().zip(x) {
            *s += w * xi;
        }
    }
    if counts.iter().any(|&n| n < 2) {
        return Err(Error::DegenerateTrainingSet(format!(
            "Gaussian naive Bayes needs at least two weighted samples per class, got {} negative and {} positive",
            counts[0], counts[1]
        )));
    }
    let means = [
        sums[0].iter().map(|s| s / totals[0]).collect::<Vec<_>>(),
        sums[1].iter().map(|s| s / totals[1]).collect::<Vec<_>>(),
    ];
    let mut sq = [vec![0.0; dim], vec![0.0; dim]];
    for ((x, &v), &w) in features.iter().zip(values).zip(weights) {
        let c = usize::from(v);
        for ((s, xi), m) in sq[c].iter_mut().zip(x).zip(&means[c]) {
            *s += w * (xi - m).powi(2);
        }
    }
    let variances = [
        sq[0].iter().map(|s| (s / totals[0]).max(VARIANCE_FLOOR)).collect(),
        sq[1].iter().map(|s| (s / totals[1]).max(VARIANCE_FLOOR)).collect(),
    ];
    let total = totals[0] + totals[1];
    Ok(GaussianNb {
        means,
        variances,
        priors: [totals[0] / total, totals[1] / total],
    })
}
