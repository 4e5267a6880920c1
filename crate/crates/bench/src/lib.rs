//! Shared fixtures for the criterion benches.

use policyloop_core::models::data::{Coverage, TrainingSet};
use policyloop_core::synth::{synth_corpus, SynthConfig};
use policyloop_core::{Document, LabelId, Right};

pub fn corpus(documents: usize, blobs_per_document: usize) -> Vec<Document> {
    synth_corpus(&SynthConfig {
        documents,
        blobs_per_document,
        right_probability: 0.85,
        seed: 11,
    })
}

pub fn training_set(docs: &[Document], right: Right) -> (LabelId, TrainingSet) {
    let label = right.label();
    let set = TrainingSet::from_documents(&label, docs.iter().map(|d| (d, Coverage::Full)));
    (label, set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_positives() {
        let docs = corpus(6, 12);
        let (_, set) = training_set(&docs, Right::Deletion);
        assert!(!set.docs.is_empty());
    }
}
