//! Import of the published annotated-policies layout.
//!
//! Those files are annotation-tool exports rather than policy file format
//! records. The reader accepts the common key spellings (`document.text`,
//! `annotation_label`, `annotation_start`, ...) and maps right names onto the
//! built-in right ids. Labels that are not data subject rights are skipped.

use serde_json::Value;

use super::{Annotation, Blob, Document, LabelId, Segmentation};
use crate::error::{Error, Result};
use crate::rights::Right;

/// Lowercased label spellings accepted for each right.
pub const TILTIFY_LABEL_ALIASES: &[(&str, Right)] = &[
    ("right to withdraw consent", Right::WithdrawConsent),
    ("right to withdraw", Right::WithdrawConsent),
    ("withdraw consent", Right::WithdrawConsent),
    ("widerrufsrecht", Right::WithdrawConsent),
    ("right to data portability", Right::DataPortability),
    ("data portability", Right::DataPortability),
    ("recht auf datenübertragbarkeit", Right::DataPortability),
    ("right to deletion", Right::Deletion),
    ("right to correction or deletion", Right::Deletion),
    ("right to rectification or deletion", Right::Deletion),
    ("right to erasure", Right::Deletion),
    ("recht auf löschung", Right::Deletion),
    ("right to complain", Right::Complaint),
    ("right to complaint", Right::Complaint),
    ("right to lodge a complaint", Right::Complaint),
    ("beschwerderecht", Right::Complaint),
    ("right to information", Right::Information),
    ("right to access", Right::Information),
    ("auskunftsrecht", Right::Information),
];

fn resolve_label(raw: &str) -> Option<Right> {
    if let Some(r) = Right::from_id(raw) {
        return Some(r);
    }
    let normalized = raw.trim().replace('_', " ").to_lowercase();
    TILTIFY_LABEL_ALIASES
        .iter()
        .find(|(alias, _)| *alias == normalized)
        .map(|(_, r)| *r)
}

fn str_at<'a>(value: &'a Value, paths: &[&[&str]]) -> Option<&'a str> {
    paths.iter().find_map(|path| {
        let mut v = value;
        for key in *path {
            v = v.get(key)?;
        }
        v.as_str()
    })
}

fn usize_at(value: &Value, keys: &[&str]) -> Option<usize> {
    keys.iter()
        .find_map(|k| value.get(k).and_then(Value::as_u64))
        .map(|n| n as usize)
}

/// Trimmed segment with its char span in the source text.
struct Span {
    start: usize,
    end: usize,
    text: String,
}

fn segment_spans(text: &str, segmentation: Segmentation) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut raw_segments: Vec<(usize, usize)> = Vec::new();
    let mut seg_start = 0;
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '\n' {
            match segmentation {
                Segmentation::Line => {
                    raw_segments.push((seg_start, i));
                    seg_start = i + 1;
                }
                Segmentation::Paragraph => {
                    // Look for at least one more newline after optional whitespace.
                    let mut j = i + 1;
                    let mut last_newline = None;
                    while j < chars.len() && chars[j].is_whitespace() {
                        if chars[j] == '\n' {
                            last_newline = Some(j);
                        }
                        j += 1;
                    }
                    if let Some(end) = last_newline {
                        raw_segments.push((seg_start, i));
                        seg_start = end + 1;
                        i = end;
                    }
                }
            }
        }
        i += 1;
    }
    raw_segments.push((seg_start, chars.len()));

    raw_segments
        .into_iter()
        .filter_map(|(s, e)| {
            let mut s = s;
            let mut e = e;
            while s < e && chars[s].is_whitespace() {
                s += 1;
            }
            while e > s && chars[e - 1].is_whitespace() {
                e -= 1;
            }
            (s < e).then(|| Span {
                start: s,
                end: e,
                text: chars[s..e].iter().collect(),
            })
        })
        .collect()
}

pub fn parse_tiltify_policy(raw: &str, fallback_id: &str, segmentation: Segmentation) -> Result<Document> {
    let value: Value = serde_json::from_str(raw).map_err(|e| Error::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let text = str_at(
        &value,
        &[
            &["document", "text"],
            &["text"],
            &["document_text"],
            &["policy_text"],
            &["document"],
        ],
    )
    .ok_or_else(|| Error::Parse {
        path: "document.text".into(),
        message: "no policy text found".into(),
    })?;
    let text = text.replace("\r\n", "\n");
    let title = str_at(
        &value,
        &[
            &["document", "document_name"],
            &["document", "title"],
            &["document_name"],
            &["title"],
            &["name"],
        ],
    )
    .unwrap_or(fallback_id)
    .to_string();
    let id = str_at(&value, &[&["id"], &["document", "id"]])
        .map(str::to_string)
        .unwrap_or_else(|| fallback_id.to_string());
    let language = str_at(&value, &[&["language"], &["document", "language"]])
        .unwrap_or("de")
        .to_string();

    let spans = segment_spans(&text, segmentation);
    if spans.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut blobs: Vec<Blob> = spans
        .iter()
        .enumerate()
        .map(|(i, s)| Blob::new(i, s.text.clone()))
        .collect();
    let chars: Vec<char> = text.chars().collect();

    let annotations = value
        .get("annotations")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    for (i, ann) in annotations.iter().enumerate() {
        let Some(label_raw) = str_at(ann, &[&["label"], &["annotation_label"], &["tilt_label"], &["labels"]]) else {
            continue;
        };
        let Some(right) = resolve_label(label_raw) else {
            tracing::debug!(label = label_raw, "skipping non-right label");
            continue;
        };
        let passage = str_at(ann, &[&["passage"], &["annotation_text"], &["text"]]).map(|p| p.replace("\r\n", "\n"));
        let start = usize_at(ann, &["start", "annotation_start"]);
        let end = usize_at(ann, &["end", "annotation_end"]);

        let mut hit: Vec<usize> = Vec::new();
        if let (Some(s), Some(e)) = (start, end) {
            let consistent = s < e
                && e <= chars.len()
                && passage
                    .as_deref()
                    .is_none_or(|p| chars[s..e].iter().collect::<String>().trim() == p.trim());
            if consistent {
                hit = spans
                    .iter()
                    .enumerate()
                    .filter(|(_, sp)| sp.start < e && s < sp.end)
                    .map(|(i, _)| i)
                    .collect();
            }
        }
        if hit.is_empty() {
            let Some(p) = passage.as_deref().map(str::trim).filter(|p| !p.is_empty()) else {
                return Err(Error::Parse {
                    path: format!("annotations[{i}]"),
                    message: "annotation has neither usable offsets nor passage".into(),
                });
            };
            if let Some(b) = blobs.iter().position(|b| b.text.contains(p)) {
                hit.push(b);
            } else {
                // Passage spans several blobs: mark each piece in order.
                let mut from = 0;
                for piece in segment_spans(p, segmentation) {
                    match blobs[from..].iter().position(|b| b.text.contains(&piece.text)) {
                        Some(off) => {
                            hit.push(from + off);
                            from += off;
                        }
                        None => {
                            return Err(Error::OrphanAnnotation {
                                label: right.id().to_string(),
                                passage: p.to_string(),
                            })
                        }
                    }
                }
            }
        }
        for b in hit {
            let mut a = Annotation::human(LabelId::from(right), true);
            a.passage = passage.clone().map(|p| p.trim().to_string());
            blobs[b].annotate(a);
        }
    }

    Ok(Document {
        id,
        title,
        language,
        blobs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_mark_every_overlapped_line() {
        let text = "Intro\nSie koennen Ihre Einwilligung\njederzeit widerrufen.\nKontakt";
        let start = text.find("Sie").unwrap();
        let end = text.find("Kontakt").unwrap() - 1;
        let raw = serde_json::json!({
            "document": {"document_name": "Shop", "text": text},
            "annotations": [
                {"annotation_label": "Right to Withdraw Consent", "annotation_start": start, "annotation_end": end,
                 "annotation_text": &text[start..end]},
                {"annotation_label": "Controller Name", "annotation_start": 0, "annotation_end": 5}
            ]
        });
        let doc = parse_tiltify_policy(&raw.to_string(), "shop", Segmentation::Line).unwrap();
        assert_eq!(doc.id, "shop");
        assert_eq!(doc.title, "Shop");
        assert_eq!(doc.blobs.len(), 4);
        let label = Right::WithdrawConsent.label();
        assert_eq!(doc.positives(&label), vec![1, 2]);
        assert!(doc.blobs[0].annotations.is_empty());
    }

    #[test]
    fn passage_fallback_when_offsets_missing() {
        let raw = serde_json::json!({
            "text": "A\n\nSie haben ein Beschwerderecht.\n\nC",
            "annotations": [{"label": "Right to Complain", "text": "ein Beschwerderecht"}]
        });
        let doc = parse_tiltify_policy(&raw.to_string(), "x", Segmentation::Paragraph).unwrap();
        assert_eq!(doc.positives(&Right::Complaint.label()), vec![1]);
    }

    #[test]
    fn paragraph_spans_match_segment_blobs() {
        let text = "\n\n  \n\nX\n\n\nY\n\n";
        let spans = segment_spans(text, Segmentation::Paragraph);
        let blobs = super::super::segment_blobs(text).unwrap();
        assert_eq!(
            spans.iter().map(|s| s.text.as_str()).collect::<Vec<_>>(),
            blobs.iter().map(|b| b.text.as_str()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn label_aliases() {
        assert_eq!(resolve_label("Right to Correction or Deletion"), Some(Right::Deletion));
        assert_eq!(resolve_label("right_complaint"), Some(Right::Complaint));
        assert_eq!(resolve_label("Right_to_Information"), Some(Right::Information));
        assert_eq!(resolve_label("Third Country Transfers"), None);
    }
}
