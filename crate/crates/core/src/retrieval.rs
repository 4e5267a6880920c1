//! Top-k candidate selection over per-blob scores.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabelId};
use crate::error::{Error, Result};
use crate::models::{score_blob, ExtractionModel};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub blob_index: usize,
    pub score: f64,
}

/// The `k` highest scoring blobs of one document for one label, with the
/// threshold `nu` equal to the lowest included score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub document_id: String,
    pub label: LabelId,
    pub k: usize,
    pub threshold: f64,
    pub suggestions: Vec<Suggestion>,
}

impl SuggestionSet {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.suggestions.iter().map(|s| s.blob_index)
    }

    pub fn contains(&self, blob_index: usize) -> bool {
        self.indices().any(|i| i == blob_index)
    }

    /// 0-based position of `blob_index` in the ranking, if suggested.
    pub fn position(&self, blob_index: usize) -> Option<usize> {
        self.indices().position(|i| i == blob_index)
    }
}

/// Descending by score, ties by ascending index. NaN sorts last.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    match (a.1.is_nan(), b.1.is_nan()) {
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal),
    }
    .then(a.0.cmp(&b.0))
}

/// Ranks `scores` and keeps the top `k`. The result carries an empty
/// document id and label; [`suggest`] fills them in.
pub fn rank_blobs(scores: &[(usize, f64)], k: usize) -> Result<SuggestionSet> {
    if k < 1 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::Argument("cannot rank an empty score list".into()));
    }
    let mut ranked = scores.to_vec();
    let n = k.min(ranked.len());
    if n < ranked.len() {
        ranked.select_nth_unstable_by(n - 1, rank_order);
        ranked.truncate(n);
    }
    ranked.sort_by(rank_order);
    let threshold = ranked.last().map(|s| s.1).unwrap_or(f64::NAN);
    Ok(SuggestionSet {
        document_id: String::new(),
        label: LabelId::new(""),
        k,
        threshold,
        suggestions: ranked
            .into_iter()
            .map(|(blob_index, score)| Suggestion { blob_index, score })
            .collect(),
    })
}

/// Scores every blob of `document` with `model` and returns its top `k`.
pub fn suggest(document: &Document, model: &ExtractionModel, label: &LabelId, k: usize) -> Result<SuggestionSet> {
    if k < 1 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let scores = document
        .blobs
        .iter()
        .map(|b| Ok((b.index, score_blob(model, b, label)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut set = rank_blobs(&scores, k)?;
    set.document_id = document.id.clone();
    set.label = label.clone();
    Ok(set)
}
