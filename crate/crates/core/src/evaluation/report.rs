//! Benchmark report: JSON structure and the monospace "mean (std)" table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::MeanStd;
use crate::corpus::LabelId;
use crate::models::ModelKind;
use crate::rights::Right;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub hit_at_k: BTreeMap<usize, f64>,
    pub krank_f1: BTreeMap<usize, f64>,
    pub classification_f1: f64,
    pub brier: f64,
    pub model_version: u64,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub test_documents: usize,
    pub test_documents_with_label: usize,
    pub test_blobs: usize,
    pub test_positives: usize,
    pub train_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub right: LabelId,
    pub kind: ModelKind,
    pub status: CellStatus,
    pub error: Option<String>,
    pub support: Support,
    pub hit_at_k: BTreeMap<usize, MeanStd>,
    pub krank_f1: BTreeMap<usize, MeanStd>,
    pub classification_f1: Option<MeanStd>,
    pub brier: Option<MeanStd>,
    pub runs: Vec<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub fingerprint: String,
    pub seed: u64,
    pub test_fraction: f64,
    pub train_documents: usize,
    pub test_documents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub split: SplitInfo,
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
    pub kinds: Vec<ModelKind>,
    pub rights: Vec<LabelId>,
    pub cells: Vec<CellReport>,
}

fn title(label: &LabelId) -> String {
    match Right::from_id(label.as_str()) {
        Some(r) => format!("{} (GDPR Art. {})", r.display_name(), r.gdpr_references()),
        None => label.to_string(),
    }
}

impl EvaluationReport {
    pub fn cell(&self, right: &LabelId, kind: ModelKind) -> Option<&CellReport> {
        self.cells.iter().find(|c| &c.right == right && c.kind == kind)
    }

    pub fn succeeded(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Ok).count()
    }

    /// Mean over rights of each right's mean hit@k for `kind`.
    pub fn mean_hit_at_k(&self, kind: ModelKind, k: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.kind == kind && c.status == CellStatus::Ok)
            .filter_map(|c| c.hit_at_k.get(&k).map(|m| m.mean))
            .collect();
        (v.len() == self.rights.len() && !v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// One block per right: rows are k-rank hit rates, classification F1,
    /// k-rank micro F1 and weighted Brier; columns are model kinds.
    pub fn to_table(&self) -> String {
        let width = 18;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "split {} ({} train / {} test documents), seeds {:?}",
            &self.split.fingerprint[..12.min(self.split.fingerprint.len())],
            self.split.train_documents,
            self.split.test_documents,
            self.seeds
        );
        for right in &self.rights {
            let _ = writeln!(out);
            let _ = writeln!(out, "{}", title(right));
            let mut header = format!("{:<18}", "");
            for k in &self.kinds {
                let _ = write!(header, "{:<width$}", k.display_name());
            }
            let _ = writeln!(out, "{}", header.trim_end());
            let cells: Vec<Option<&CellReport>> = self.kinds.iter().map(|k| self.cell(right, *k)).collect();
            let row = |out: &mut String, name: &str, f: &dyn Fn(&CellReport) -> Option<MeanStd>| {
                let mut line = format!("{name:<18}");
                for c in &cells {
                    let text = match c {
                        Some(c) if c.status == CellStatus::Ok => {
                            f(c).map(|m| m.to_string()).unwrap_or_else(|| "-".into())
                        }
                        Some(_) => "failed".into(),
                        None => "-".into(),
                    };
                    let _ = write!(line, "{text:<width$}");
                }
                let _ = writeln!(out, "{}", line.trim_end());
            };
            for &k in &self.ks {
                row(&mut out, &format!("{k}-rank"), &|c| c.hit_at_k.get(&k).copied());
            }
            row(&mut out, "classification", &|c| c.classification_f1);
            for &k in &self.ks {
                row(&mut out, &format!("{k}-rank F1"), &|c| c.krank_f1.get(&k).copied());
            }
            row(&mut out, "Brier (weighted)", &|c| c.brier);
        }
        let failed: Vec<&CellReport> = self.cells.iter().filter(|c| c.status == CellStatus::Failed).collect();
        if !failed.is_empty() {
            let _ = writeln!(out);
            for c in failed {
                let _ = writeln!(
                    out,
                    "failed {} / {}: {}",
                    c.right,
                    c.kind,
                    c.error.as_deref().unwrap_or("")
                );
            }
        }
        out
    }
}
