//! Append-only log of human feedback, one JSON record per line.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::LabelId;
use crate::error::{Error, Result};
use crate::models::tensor::sha256_hex;

/// One human decision: blob `blob_index` of `document_id` does (value 1) or
/// does not (value 0) contain `label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub document_id: String,
    pub blob_index: usize,
    pub label: LabelId,
    #[serde(with = "crate::corpus::binary_indicator")]
    pub value: bool,
    pub timestamp: DateTime<Utc>,
}

impl FeedbackEntry {
    pub fn new(document_id: impl Into<String>, blob_index: usize, label: LabelId, value: bool) -> Self {
        FeedbackEntry {
            document_id: document_id.into(),
            blob_index,
            label,
            value,
            timestamp: Utc::now(),
        }
    }
}

#[derive(Debug)]
pub struct FeedbackLog {
    path: PathBuf,
    entries: Vec<FeedbackEntry>,
    lines: Vec<String>,
}

impl FeedbackLog {
    /// Opens the log at `path`, reading existing records. A missing file is
    /// an empty log.
    pub fn open(path: &Path) -> Result<Self> {
        let mut log = FeedbackLog {
            path: path.to_path_buf(),
            entries: Vec::new(),
            lines: Vec::new(),
        };
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(log),
            Err(e) => return Err(Error::io(path, e)),
        };
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FeedbackEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: format!("{}:{}", path.display(), n + 1),
                message: e.to_string(),
            })?;
            log.entries.push(entry);
            log.lines.push(line);
        }
        Ok(log)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn entries(&self) -> &[FeedbackEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends and fsyncs `entries` as one write.
    pub fn append(&mut self, entries: &[FeedbackEntry]) -> Result<()> {
        if entries.is_empty() {
            return Ok(());
        }
        let mut lines = Vec::with_capacity(entries.len());
        let mut buf = String::new();
        for e in entries {
            let line = serde_json::to_string(e)?;
            buf.push_str(&line);
            buf.push('\n');
            lines.push(line);
        }
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        f.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.entries.extend_from_slice(entries);
        self.lines.extend(lines);
        Ok(())
    }

    /// Digest of the first `count` records as stored on disk.
    pub fn fingerprint(&self, count: usize) -> String {
        let mut buf = String::new();
        for l in &self.lines[..count.min(self.lines.len())] {
            buf.push_str(l);
            buf.push('\n');
        }
        sha256_hex(buf.as_bytes())
    }
}
