//! Document-level train/test split, stratified over labels.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, LabelId};
use crate::error::{Error, Result};
use crate::models::tensor::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub test: Vec<Document>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl CorpusSplit {
    /// Digest of the sorted train and test document ids.
    pub fn fingerprint(&self) -> String {
        let ids = |docs: &[Document]| {
            let mut v: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
            v.sort_unstable();
            v.join(",")
        };
        sha256_hex(format!("train={}\ntest={}\n", ids(&self.train), ids(&self.test)).as_bytes())
    }
}

/// Splits whole documents so that every label in `labels` has at least one
/// document containing it on both sides. Deterministic under `seed`.
pub fn split_corpus(corpus: &Corpus, labels: &[LabelId], test_fraction: f64, seed: u64) -> Result<CorpusSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = corpus.documents.len();
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 documents, got {n}")));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let containing = |l: &LabelId| -> Vec<usize> {
        order
            .iter()
            .copied()
            .filter(|&i| corpus.documents[i].contains_label(l))
            .collect()
    };
    let mut strata: Vec<(&LabelId, Vec<usize>)> = labels.iter().map(|l| (l, containing(l))).collect();
    for (l, docs) in &strata {
        if docs.len() < 2 {
            return Err(Error::Split(format!(
                "label `{l}` occurs in {} document(s); both sides need one",
                docs.len()
            )));
        }
    }
    // Rarest labels pick first so they are not crowded out.
    strata.sort_by_key(|(_, docs)| docs.len());

    let mut in_test = vec![false; n];
    let mut taken = 0;
    for (l, docs) in &strata {
        if docs.iter().any(|&i| in_test[i]) {
            continue;
        }
        if taken == n_test {
            return Err(Error::Split(format!(
                "cannot place `{l}` in a test set of {n_test} documents"
            )));
        }
        in_test[docs[0]] = true;
        taken += 1;
    }
    for &i in &order {
        if taken == n_test {
            break;
        }
        if !in_test[i] {
            in_test[i] = true;
            taken += 1;
        }
    }
    for (l, docs) in &strata {
        if docs.iter().all(|&i| in_test[i]) {
            return Err(Error::Split(format!(
                "no training document left for `{l}` at test fraction {test_fraction}"
            )));
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for &i in &order {
        let d = corpus.documents[i].clone();
        if in_test[i] {
            test.push(d);
        } else {
            train.push(d);
        }
    }
    Ok(CorpusSplit {
        train,
        test,
        seed,
        test_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rights::Right;
    use crate::synth::{synth_corpus, SynthConfig};
    use std::collections::HashSet;

    fn corpus(n: usize, p: f64) -> Corpus {
        Corpus::new(synth_corpus(&SynthConfig {
            documents: n,
            blobs_per_document: 8,
            right_probability: p,
            seed: 5,
        }))
    }

    fn rights() -> Vec<LabelId> {
        Right::ALL.iter().map(|r| r.label()).collect()
    }

    #[test]
    fn sixty_documents_split_48_12() {
        let c = corpus(60, 0.85);
        let s = split_corpus(&c, &rights(), 0.2, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (48, 12));
        let train: HashSet<_> = s.train.iter().map(|d| &d.id).collect();
        assert!(s.test.iter().all(|d| !train.contains(&d.id)));
        for l in rights() {
            assert!(s.test.iter().any(|d| d.contains_label(&l)));
            assert!(s.train.iter().any(|d| d.contains_label(&l)));
        }
        assert_eq!(split_corpus(&c, &rights(), 0.2, 7).unwrap(), s);
        assert_ne!(
            split_corpus(&c, &rights(), 0.2, 8).unwrap().fingerprint(),
            s.fingerprint()
        );
    }

    #[test]
    fn extreme_fraction_errors_or_keeps_strata() {
        let mut c = corpus(60, 0.85);
        // Make one right rare: present in exactly two documents.
        let rare = Right::DataPortability.label();
        let mut kept = 0;
        for d in &mut c.documents {
            if d.contains_label(&rare) {
                kept += 1;
                if kept > 2 {
                    d.blobs
                        .iter_mut()
                        .for_each(|b| b.annotations.retain(|a| a.label != rare));
                }
            }
        }
        match split_corpus(&c, &rights(), 0.99, 1) {
            Err(Error::Split(_)) => {}
            Ok(s) => {
                for l in rights() {
                    assert!(s.test.iter().any(|d| d.contains_label(&l)));
                    assert!(s.train.iter().any(|d| d.contains_label(&l)));
                }
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn invalid_fraction() {
        let c = corpus(5, 0.9);
        assert!(matches!(split_corpus(&c, &[], 1.0, 0), Err(Error::Argument(_))));
        assert!(matches!(split_corpus(&c, &[], 0.0, 0), Err(Error::Argument(_))));
    }
}
