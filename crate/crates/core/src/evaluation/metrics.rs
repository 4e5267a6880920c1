//! Retrieval and calibration metrics.

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabelId};
use crate::error::{Error, Result};
use crate::retrieval::SuggestionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitOutcome {
    Hit,
    Miss,
    /// The document has no true positive for the label and is excluded.
    Skipped,
}

impl HitOutcome {
    pub fn value(self) -> Option<f64> {
        match self {
            HitOutcome::Hit => Some(1.0),
            HitOutcome::Miss => Some(0.0),
            HitOutcome::Skipped => None,
        }
    }
}

/// 1 if any suggested blob is a true positive; one hit suffices when the
/// document states the label in several blobs.
pub fn hit_at_k(suggestions: &SuggestionSet, truth: &Document, label: &LabelId) -> HitOutcome {
    let positives = truth.positives(label);
    if positives.is_empty() {
        return HitOutcome::Skipped;
    }
    if suggestions.indices().any(|i| positives.contains(&i)) {
        HitOutcome::Hit
    } else {
        HitOutcome::Miss
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2 tp / (2 tp + fp + fn)`, 0 when there is nothing to match.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRankScore {
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean hit@k over the evaluated documents.
    pub hit_rate: f64,
    pub documents: usize,
}

/// Blob-level micro F1 where the suggested blobs of each document are the
/// predicted positives. Documents without a true positive are skipped.
pub fn krank_f1<'a>(runs: impl IntoIterator<Item = (&'a SuggestionSet, &'a Document)>, label: &LabelId) -> KRankScore {
    let mut c = Confusion::default();
    let mut hits = 0usize;
    let mut documents = 0usize;
    for (set, doc) in runs {
        let positives = doc.positives(label);
        if positives.is_empty() {
            continue;
        }
        documents += 1;
        let tp = set.indices().filter(|i| positives.contains(i)).count();
        c.tp += tp;
        c.fp += set.suggestions.len() - tp;
        c.fn_ += positives.len() - tp;
        hits += usize::from(tp > 0);
    }
    KRankScore {
        confusion: c,
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        hit_rate: ratio(hits, documents),
        documents,
    }
}

/// Binary F1 with prediction `score >= threshold`.
pub fn classification_f1(scores: &[f64], truth: &[bool], threshold: f64) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Shape {
            expected: scores.len(),
            actual: truth.len(),
        });
    }
    let mut c = Confusion::default();
    for (&s, &t) in scores.iter().zip(truth) {
        match (s >= threshold, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c.f1())
}

/// Weighted mean squared error between scores and 0/1 truth, with weights
/// normalised to sum 1.
pub fn brier_score(scores: &[f64], truth: &[bool], weights: &[f64]) -> Result<f64> {
    if scores.len() != truth.len() || scores.len() != weights.len() {
        return Err(Error::Shape {
            expected: scores.len(),
            actual: if truth.len() != scores.len() {
                truth.len()
            } else {
                weights.len()
            },
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Argument("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Argument("weights must not all be zero".into()));
    }
    let sum: f64 = scores
        .iter()
        .zip(truth)
        .zip(weights)
        .map(|((s, t), w)| {
            let y = if *t { 1.0 } else { 0.0 };
            w * (y - s) * (y - s)
        })
        .sum();
    Ok(sum / total)
}

/// Weights inverse to class frequency, so each class carries half the mass.
/// With a single class present every sample gets equal weight.
pub fn class_balanced_weights(truth: &[bool]) -> Vec<f64> {
    let pos = truth.iter().filter(|t| **t).count();
    let neg = truth.len() - pos;
    truth
        .iter()
        .map(|&t| match (pos, neg) {
            (0, _) | (_, 0) => 1.0 / truth.len() as f64,
            _ if t => 0.5 / pos as f64,
            _ => 0.5 / neg as f64,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ({:.2})", self.mean, self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Annotation, Blob};
    use crate::retrieval::rank_blobs;
    use proptest::prelude::*;

    fn doc(n: usize, positives: &[usize], label: &LabelId) -> Document {
        Document {
            id: "d".into(),
            title: String::new(),
            language: "de".into(),
            blobs: (0..n)
                .map(|i| {
                    let mut b = Blob::new(i, format!("blob {i}"));
                    if positives.contains(&i) {
                        b.annotate(Annotation::human(label.clone(), true));
                    }
                    b
                })
                .collect(),
        }
    }

    fn set_of(indices: &[usize]) -> SuggestionSet {
        let scores: Vec<_> = indices
            .iter()
            .enumerate()
            .map(|(r, &i)| (i, 1.0 - r as f64 * 0.01))
            .collect();
        rank_blobs(&scores, indices.len()).unwrap()
    }

    #[test]
    fn hit_cases() {
        let l = LabelId::new("r");
        let d = doc(10, &[7], &l);
        assert_eq!(hit_at_k(&set_of(&[7, 2, 9, 1, 4]), &d, &l), HitOutcome::Hit);
        assert_eq!(hit_at_k(&set_of(&[2, 9, 1, 4, 3]), &d, &l), HitOutcome::Miss);
        let d2 = doc(10, &[3, 8], &l);
        assert_eq!(hit_at_k(&set_of(&[8, 0, 1]), &d2, &l), HitOutcome::Hit);
        assert_eq!(hit_at_k(&set_of(&[1]), &doc(4, &[], &l), &l), HitOutcome::Skipped);
    }

    #[test]
    fn krank_hand_case_is_one_sixth() {
        let l = LabelId::new("r");
        let a = doc(10, &[0], &l);
        let b = doc(10, &[9], &l);
        let sa = set_of(&[0, 1, 2, 3, 4]);
        let sb = set_of(&[0, 1, 2, 3, 4]);
        let s = krank_f1([(&sa, &a), (&sb, &b)], &l);
        assert_eq!(s.confusion, Confusion { tp: 1, fp: 9, fn_: 1 });
        assert_eq!(s.precision, 1.0 / 10.0);
        assert_eq!(s.recall, 1.0 / 2.0);
        // 2PR/(P+R) with P = 1/10, R = 1/2 evaluated by hand: (1/10)/(6/10) = 1/6.
        assert!((s.f1 - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.hit_rate, 0.5);
    }

    #[test]
    fn krank_perfect_and_disjoint() {
        let l = LabelId::new("r");
        let a = doc(5, &[2], &l);
        assert_eq!(krank_f1([(&set_of(&[2]), &a)], &l).f1, 1.0);
        assert_eq!(krank_f1([(&set_of(&[0, 1]), &a)], &l).f1, 0.0);
    }

    #[test]
    fn krank_at_full_k_has_unit_recall() {
        let l = LabelId::new("r");
        let a = doc(6, &[1, 4], &l);
        let s = krank_f1([(&set_of(&[0, 1, 2, 3, 4, 5]), &a)], &l);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.precision, 2.0 / 6.0);
    }

    #[test]
    fn classification_cases() {
        assert_eq!(
            classification_f1(&[1.0, 1.0, 0.0], &[true, true, false], 0.5).unwrap(),
            1.0
        );
        assert_eq!(classification_f1(&[0.0, 0.0], &[true, false], 0.5).unwrap(), 0.0);
        // TP=2, FP=1, FN=2.
        let s = [0.9, 0.8, 0.7, 0.1, 0.2, 0.0];
        let t = [true, true, false, true, true, false];
        assert!((classification_f1(&s, &t, 0.5).unwrap() - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn brier_hand_cases() {
        assert!(brier_score(&[1.0, 0.0], &[true, false], &[1.0, 1.0]).unwrap().abs() < 1e-12);
        assert!((brier_score(&[0.0, 1.0], &[true, false], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((brier_score(&[0.8, 0.2], &[true, false], &[1.0, 1.0]).unwrap() - 0.04).abs() < 1e-12);
        assert!(matches!(
            brier_score(&[0.5], &[true, false], &[1.0]),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(brier_score(&[0.5], &[true], &[0.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn balanced_weights_split_mass() {
        let t = [true, false, false, false];
        let w = class_balanced_weights(&t);
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1..].iter().sum::<f64>() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_std_uses_population_formula() {
        let m = MeanStd::of(&[0.8, 1.0]);
        assert!((m.mean - 0.9).abs() < 1e-15);
        assert!((m.std - 0.1).abs() < 1e-12);
        assert_eq!(MeanStd::of(&[0.7]).std, 0.0);
        assert_eq!(format!("{}", MeanStd { mean: 0.9, std: 0.0 }), "0.90 (0.00)");
    }

    proptest! {
        #[test]
        fn brier_equal_weights_match_direct_sum(
            pairs in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..60),
            w in 0.01f64..10.0,
        ) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            let mut direct = 0.0;
            for (s, t) in &pairs {
                let y = if *t { 1.0 } else { 0.0 };
                direct += (y - s) * (y - s);
            }
            direct /= pairs.len() as f64;
            let weighted = brier_score(&scores, &truth, &vec![w; pairs.len()]).unwrap();
            prop_assert!((weighted - direct).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&weighted));
        }

        #[test]
        fn hit_is_monotone_in_k(
            raw in prop::collection::vec(0u8..10, 2..30),
            pos in 0usize..30,
            k in 1usize..30,
        ) {
            let l = LabelId::new("r");
            let n = raw.len();
            let d = doc(n, &[pos % n], &l);
            let scores: Vec<_> = raw.iter().enumerate().map(|(i, s)| (i, *s as f64)).collect();
            let small = hit_at_k(&rank_blobs(&scores, k).unwrap(), &d, &l).value().unwrap();
            let large = hit_at_k(&rank_blobs(&scores, k + 1).unwrap(), &d, &l).value().unwrap();
            prop_assert!(large >= small);
        }
    }
}
