//! Per-label training data derived from annotated documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabelId};
use crate::models::tensor::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingBlob {
    pub index: usize,
    pub text: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDoc {
    pub id: String,
    pub blobs: Vec<TrainingBlob>,
}

impl TrainingDoc {
    pub fn positives(&self) -> impl Iterator<Item = &TrainingBlob> {
        self.blobs.iter().filter(|b| b.value)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &TrainingBlob> {
        self.blobs.iter().filter(|b| !b.value)
    }
}

/// How unannotated blobs of a document are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// The whole document was reviewed for the label: unannotated blobs are
    /// negatives. Applies to the seed corpus.
    Full,
    /// Only explicit annotations are known, except that a document with at
    /// least one positive counts as reviewed for that label.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub label: LabelId,
    pub language: String,
    pub docs: Vec<TrainingDoc>,
}

impl TrainingSet {
    pub fn from_documents<'a>(
        label: &LabelId,
        docs: impl IntoIterator<Item = (&'a Document, Coverage)>,
    ) -> TrainingSet {
        let mut languages: BTreeMap<String, usize> = BTreeMap::new();
        let mut out = Vec::new();
        for (doc, coverage) in docs {
            *languages.entry(doc.language.clone()).or_default() += 1;
            let reviewed = coverage == Coverage::Full || doc.contains_label(label);
            let blobs: Vec<TrainingBlob> = doc
                .blobs
                .iter()
                .filter_map(|b| {
                    let value = match (b.human_value(label), reviewed) {
                        (Some(v), _) => v,
                        (None, true) => false,
                        (None, false) => return None,
                    };
                    Some(TrainingBlob {
                        index: b.index,
                        text: b.text.clone(),
                        value,
                    })
                })
                .collect();
            if !blobs.is_empty() {
                out.push(TrainingDoc {
                    id: doc.id.clone(),
                    blobs,
                });
            }
        }
        let language = languages
            .into_iter()
            .max_by_key(|(_, n)| *n)
            .map(|(l, _)| l)
            .unwrap_or_else(|| "de".to_string());
        TrainingSet {
            label: label.clone(),
            language,
            docs: out,
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = &TrainingBlob> {
        self.docs.iter().flat_map(|d| d.blobs.iter())
    }

    pub fn len(&self) -> usize {
        self.docs.iter().map(|d| d.blobs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positive_count(&self) -> usize {
        self.examples().filter(|b| b.value).count()
    }

    /// Order-independent digest of (document, blob, value, text) tuples.
    pub fn fingerprint(&self) -> String {
        let mut rows: Vec<String> = self
            .docs
            .iter()
            .flat_map(|d| {
                d.blobs.iter().map(move |b| {
                    format!(
                        "{}\t{}\t{}\t{}",
                        d.id,
                        b.index,
                        u8::from(b.value),
                        &sha256_hex(b.text.as_bytes())[..16]
                    )
                })
            })
            .collect();
        rows.sort();
        let mut buf = format!("label={}\n", self.label);
        for r in rows {
            buf.push_str(&r);
            buf.push('\n');
        }
        sha256_hex(buf.as_bytes())
    }
}
