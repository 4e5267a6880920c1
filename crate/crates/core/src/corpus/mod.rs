//! Document model for privacy policies: paragraph segmentation, policy
//! record parsing, corpus loading and the hierarchical label schema.

mod schema;
mod shim;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rights::Right;

pub use schema::{load_label_schema, LabelNode, LabelSchema};
pub use shim::{parse_tiltify_policy, TILTIFY_LABEL_ALIASES};

/// Identifier of a schema label (a data subject right or any other TILT label).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(String);

impl LabelId {
    pub fn new(id: impl Into<String>) -> Self {
        LabelId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LabelId {
    fn from(s: &str) -> Self {
        LabelId::new(s)
    }
}

impl From<Right> for LabelId {
    fn from(r: Right) -> Self {
        r.label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Human,
    Model,
}

/// Marks that a blob does (`value = true`) or does not contain a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: LabelId,
    #[serde(with = "binary_indicator")]
    pub value: bool,
    pub source: AnnotationSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    pub created_at: DateTime<Utc>,
    /// Passage the annotator marked, kept for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage: Option<String>,
}

impl Annotation {
    pub fn human(label: LabelId, value: bool) -> Self {
        Annotation {
            label,
            value,
            source: AnnotationSource::Human,
            model_version: None,
            created_at: Utc::now(),
            passage: None,
        }
    }
}

/// Serializes booleans as the integers 0/1; accepts either form on input.
pub mod binary_indicator {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(b) => Ok(b),
            Raw::Int(0) => Ok(false),
            Raw::Int(1) => Ok(true),
            Raw::Int(other) => Err(de::Error::custom(format!(
                "annotation value must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// One paragraph of a policy; the unit of retrieval and annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub index: usize,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
}

impl Blob {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        Blob {
            index,
            text: text.into(),
            annotations: Vec::new(),
        }
    }

    /// Adds an annotation. A human annotation replaces any earlier human
    /// annotation for the same label.
    pub fn annotate(&mut self, annotation: Annotation) {
        if annotation.source == AnnotationSource::Human {
            self.annotations
                .retain(|a| !(a.source == AnnotationSource::Human && a.label == annotation.label));
        }
        self.annotations.push(annotation);
    }

    pub fn human_value(&self, label: &LabelId) -> Option<bool> {
        self.annotations
            .iter()
            .find(|a| a.source == AnnotationSource::Human && &a.label == label)
            .map(|a| a.value)
    }

    pub fn is_positive(&self, label: &LabelId) -> bool {
        self.human_value(label) == Some(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub language: String,
    pub blobs: Vec<Blob>,
}

impl Document {
    pub fn positives(&self, label: &LabelId) -> Vec<usize> {
        self.blobs
            .iter()
            .filter(|b| b.is_positive(label))
            .map(|b| b.index)
            .collect()
    }

    pub fn contains_label(&self, label: &LabelId) -> bool {
        self.blobs.iter().any(|b| b.is_positive(label))
    }

    pub fn normalized_text(&self) -> String {
        self.blobs
            .iter()
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join(BLOB_DELIMITER)
    }

    /// Serializes back into the policy file format. Only human annotations are
    /// written; each carries its stored passage, or the blob text when none
    /// was recorded.
    pub fn to_record(&self) -> PolicyRecord {
        let annotations = self
            .blobs
            .iter()
            .flat_map(|b| {
                b.annotations
                    .iter()
                    .filter(|a| a.source == AnnotationSource::Human)
                    .map(move |a| RecordAnnotation {
                        label: a.label.clone(),
                        passage: a.passage.clone().unwrap_or_else(|| b.text.clone()),
                        value: if a.value { None } else { Some(0) },
                    })
            })
            .collect();
        PolicyRecord {
            id: self.id.clone(),
            title: self.title.clone(),
            language: self.language.clone(),
            text: self.normalized_text(),
            annotations,
        }
    }
}

/// Policy file format: one JSON object per policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default = "default_language")]
    pub language: String,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<RecordAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnnotation {
    pub label: LabelId,
    pub passage: String,
    /// Optional explicit negative (`0`). Absent means a positive annotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u8>,
}

fn default_language() -> String {
    "de".to_string()
}

/// Delimiter placed between blobs when reconstructing normalized text.
pub const BLOB_DELIMITER: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// Blank lines separate blobs.
    #[default]
    Paragraph,
    /// Every line break separates blobs.
    Line,
}

fn paragraph_break() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // A newline followed by one or more (whitespace-only line + newline).
    RE.get_or_init(|| Regex::new(r"\n(?:[^\S\n]*\n)+").unwrap())
}

fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Splits policy text into paragraphs on runs of two or more newlines.
pub fn segment_blobs(text: &str) -> Result<Vec<Blob>> {
    segment_with(text, Segmentation::Paragraph)
}

pub fn segment_with(text: &str, segmentation: Segmentation) -> Result<Vec<Blob>> {
    let normalized = normalize_newlines(text);
    let pieces: Vec<&str> = match segmentation {
        Segmentation::Paragraph => paragraph_break().split(&normalized).collect(),
        Segmentation::Line => normalized.split('\n').collect(),
    };
    let blobs: Vec<Blob> = pieces
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| Blob::new(i, s))
        .collect();
    if blobs.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(blobs)
}

/// Parses a policy file format JSON string into a [`Document`].
pub fn parse_policy(raw: &str) -> Result<Document> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let record: PolicyRecord = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    document_from_record(record, Segmentation::Paragraph)
}

pub fn document_from_record(record: PolicyRecord, segmentation: Segmentation) -> Result<Document> {
    if record.id.trim().is_empty() {
        return Err(Error::Parse {
            path: "id".into(),
            message: "policy id must not be empty".into(),
        });
    }
    let mut blobs = segment_with(&record.text, segmentation)?;
    for (i, ann) in record.annotations.into_iter().enumerate() {
        let value = match ann.value {
            None | Some(1) => true,
            Some(0) => false,
            Some(v) => {
                return Err(Error::Parse {
                    path: format!("annotations[{i}].value"),
                    message: format!("annotation value must be 0 or 1, got {v}"),
                })
            }
        };
        let passage = normalize_newlines(&ann.passage).trim().to_string();
        if passage.is_empty() {
            return Err(Error::Parse {
                path: format!("annotations[{i}].passage"),
                message: "passage must not be empty".into(),
            });
        }
        let blob = blobs
            .iter_mut()
            .find(|b| b.text.contains(&passage))
            .ok_or_else(|| Error::OrphanAnnotation {
                label: ann.label.to_string(),
                passage: passage.clone(),
            })?;
        let mut annotation = Annotation::human(ann.label, value);
        annotation.passage = Some(passage);
        blob.annotate(annotation);
    }
    Ok(Document {
        id: record.id,
        title: record.title,
        language: record.language,
        blobs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// Detect per file: policy file format if it has a top-level `text`,
    /// otherwise the published dataset layout.
    #[default]
    Auto,
    Policy,
    Tiltify,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub format: CorpusFormat,
    /// Overrides the segmentation used for the published dataset layout.
    pub segmentation: Option<Segmentation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub rights: Vec<LabelId>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus {
            documents,
            rights: Right::ALL.iter().map(|r| r.label()).collect(),
        }
    }

    pub fn blob_count(&self) -> usize {
        self.documents.iter().map(|d| d.blobs.len()).sum()
    }

    /// Positive blob count per covered right.
    pub fn positive_counts(&self) -> BTreeMap<LabelId, usize> {
        self.rights
            .iter()
            .map(|r| {
                let n = self.documents.iter().map(|d| d.positives(r).len()).sum();
                (r.clone(), n)
            })
            .collect()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Checks that every human annotation label exists in `schema`.
    pub fn validate_labels(&self, schema: &LabelSchema) -> Result<()> {
        for doc in &self.documents {
            for blob in &doc.blobs {
                for a in &blob.annotations {
                    if !schema.contains(&a.label) {
                        return Err(Error::Validation(format!(
                            "document {} blob {} uses label `{}` not present in schema",
                            doc.id, blob.index, a.label
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> CorpusSummary {
        CorpusSummary {
            documents: self.documents.len(),
            blobs: self.blob_count(),
            positives: self.positive_counts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub documents: usize,
    pub blobs: usize,
    pub positives: BTreeMap<LabelId, usize>,
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} documents, {} blobs", self.documents, self.blobs)?;
        for (label, n) in &self.positives {
            writeln!(f, "{label}: {n}")?;
        }
        Ok(())
    }
}

pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    load_corpus_with(dir, &LoadOptions::default())
}

pub fn load_corpus_with(dir: impl AsRef<Path>, options: &LoadOptions) -> Result<Corpus> {
    let dir = dir.as_ref();
    let files = policy_files(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus(dir.to_path_buf()));
    }
    let documents = files
        .par_iter()
        .map(|file| {
            load_policy_file(file, options).map_err(|e| Error::CorpusFile {
                file: file.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(documents))
}

/// `*.json` files directly inside `dir`, sorted by file name.
pub fn policy_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_policy_file(path: &Path, options: &LoadOptions) -> Result<Document> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = match options.format {
        CorpusFormat::Auto => {
            let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| Error::Parse {
                path: ".".into(),
                message: e.to_string(),
            })?;
            if value.get("text").is_some_and(|t| t.is_string()) && value.get("id").is_some() {
                CorpusFormat::Policy
            } else {
                CorpusFormat::Tiltify
            }
        }
        f => f,
    };
    match format {
        CorpusFormat::Tiltify => {
            let fallback_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            parse_tiltify_policy(&raw, &fallback_id, options.segmentation.unwrap_or(Segmentation::Line))
        }
        _ => match options.segmentation {
            None | Some(Segmentation::Paragraph) => parse_policy(&raw),
            Some(seg) => {
                let record: PolicyRecord = serde_json::from_str(&raw)?;
                document_from_record(record, seg)
            }
        },
    }
}

/// Writes each document as `<dir>/<id>.json` in the policy file format.
pub fn write_corpus(dir: impl AsRef<Path>, documents: &[Document]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for doc in documents {
        let path = dir.join(format!("{}.json", sanitize_file_stem(&doc.id)));
        let json = serde_json::to_string_pretty(&doc.to_record())?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn sanitize_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
