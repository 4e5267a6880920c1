//! Benchmark runner: one fixed split, repeated seeded training per
//! (right, model kind) cell, all metrics per repetition.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{brier_score, class_balanced_weights, classification_f1, krank_f1, MeanStd};
use super::report::{CellReport, CellStatus, EvaluationReport, RunMetrics, SplitInfo, Support};
use super::split::{split_corpus, CorpusSplit};
use crate::corpus::{Corpus, Document, LabelId};
use crate::error::{Error, Result};
use crate::models::data::{Coverage, TrainingSet};
use crate::models::{train_model, ModelKind, ModelSettings};
use crate::retrieval::rank_blobs;
use crate::rights::Right;
use crate::text::{hash_str, mix64};

pub const DEFAULT_KS: [usize; 3] = [5, 10, 25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub kinds: Vec<ModelKind>,
    /// Empty means the corpus rights.
    pub rights: Vec<LabelId>,
    pub ks: Vec<usize>,
    pub repetitions: usize,
    /// Per-repetition seeds; derived from `seed` when shorter than
    /// `repetitions`.
    pub seeds: Vec<u64>,
    pub seed: u64,
    pub split_seed: u64,
    pub test_fraction: f64,
    pub threshold: f64,
    pub settings: ModelSettings,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            kinds: ModelKind::ALL.to_vec(),
            rights: Vec::new(),
            ks: DEFAULT_KS.to_vec(),
            repetitions: 2,
            seeds: Vec::new(),
            seed: 2023,
            split_seed: 7,
            test_fraction: 0.2,
            threshold: 0.5,
            settings: ModelSettings::default(),
            jobs: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn repetition_seeds(&self) -> Vec<u64> {
        (0..self.repetitions)
            .map(|r| {
                self.seeds
                    .get(r)
                    .copied()
                    .unwrap_or_else(|| self.seed.wrapping_add(r as u64))
            })
            .collect()
    }
}

fn anchor_for(label: &LabelId, language: &str) -> String {
    Right::from_id(label.as_str())
        .map(|r| r.anchor_text(language))
        .unwrap_or_else(|| label.to_string())
}

/// Trains one model and computes every metric on the test documents.
pub fn evaluate_run(
    split: &CorpusSplit,
    label: &LabelId,
    kind: ModelKind,
    ks: &[usize],
    settings: &ModelSettings,
    threshold: f64,
    seed: u64,
) -> Result<RunMetrics> {
    let train = TrainingSet::from_documents(label, split.train.iter().map(|d| (d, Coverage::Full)));
    let anchor = anchor_for(label, &train.language);
    let model_seed = mix64(seed ^ hash_str(label.as_str(), kind as u64));
    let model = train_model(kind, &train, settings, &anchor, model_seed)?;

    let max_k = ks.iter().copied().max().unwrap_or(1);
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    let mut ranked: Vec<(crate::retrieval::SuggestionSet, &Document)> = Vec::new();
    for doc in &split.test {
        let s = model.score_blobs(&doc.blobs);
        for (i, p) in &s {
            scores.push(*p);
            truth.push(doc.blobs[*i].is_positive(label));
        }
        if !doc.blobs.is_empty() {
            ranked.push((rank_blobs(&s, max_k)?, doc));
        }
    }
    let mut hit_at_k = BTreeMap::new();
    let mut krank = BTreeMap::new();
    for &k in ks {
        let truncated: Vec<_> = ranked
            .iter()
            .map(|(set, doc)| {
                let mut s = set.clone();
                s.suggestions.truncate(k);
                s.k = k;
                (s, *doc)
            })
            .collect();
        let score = krank_f1(truncated.iter().map(|(s, d)| (s, *d)), label);
        hit_at_k.insert(k, score.hit_rate);
        krank.insert(k, score.f1);
    }
    let weights = class_balanced_weights(&truth);
    Ok(RunMetrics {
        seed,
        hit_at_k,
        krank_f1: krank,
        classification_f1: classification_f1(&scores, &truth, threshold)?,
        brier: brier_score(&scores, &truth, &weights)?,
        model_version: model.version,
        epoch_losses: model.info.epoch_losses.clone(),
    })
}

fn support(split: &CorpusSplit, label: &LabelId) -> Support {
    Support {
        test_documents: split.test.len(),
        test_documents_with_label: split.test.iter().filter(|d| d.contains_label(label)).count(),
        test_blobs: split.test.iter().map(|d| d.blobs.len()).sum(),
        test_positives: split.test.iter().map(|d| d.positives(label).len()).sum(),
        train_positives: split.train.iter().map(|d| d.positives(label).len()).sum(),
    }
}

fn summarize(
    runs: &[RunMetrics],
    ks: &[usize],
) -> (BTreeMap<usize, MeanStd>, BTreeMap<usize, MeanStd>, MeanStd, MeanStd) {
    let col = |f: &dyn Fn(&RunMetrics) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    let hit = ks.iter().map(|&k| (k, col(&|r| r.hit_at_k[&k]))).collect();
    let f1 = ks.iter().map(|&k| (k, col(&|r| r.krank_f1[&k]))).collect();
    (hit, f1, col(&|r| r.classification_f1), col(&|r| r.brier))
}

pub fn run_benchmark(corpus: &Corpus, config: &BenchmarkConfig) -> Result<EvaluationReport> {
    if config.repetitions == 0 {
        return Err(Error::Argument("repetitions must be at least 1".into()));
    }
    if config.ks.is_empty() || config.ks.contains(&0) {
        return Err(Error::Argument("ks must be non-empty positive integers".into()));
    }
    let rights = if config.rights.is_empty() {
        corpus.rights.clone()
    } else {
        config.rights.clone()
    };
    let split = split_corpus(corpus, &rights, config.test_fraction, config.split_seed)?;
    run_on_split(&split, &rights, config)
}

/// Runs every (right, kind, repetition) on a prepared split.
pub fn run_on_split(split: &CorpusSplit, rights: &[LabelId], config: &BenchmarkConfig) -> Result<EvaluationReport> {
    let seeds = config.repetition_seeds();
    let mut ks = config.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let (n_kinds, n_seeds) = (config.kinds.len(), seeds.len());
    let tasks: Vec<(usize, usize, usize)> = (0..rights.len())
        .flat_map(|r| (0..n_kinds).flat_map(move |k| (0..n_seeds).map(move |s| (r, k, s))))
        .collect();
    let run = |&(r, k, s): &(usize, usize, usize)| {
        let result = evaluate_run(
            split,
            &rights[r],
            config.kinds[k],
            &ks,
            &config.settings,
            config.threshold,
            seeds[s],
        );
        if let Err(e) = &result {
            tracing::warn!(right = %rights[r], kind = %config.kinds[k], seed = seeds[s], error = %e, "benchmark run failed");
        }
        result
    };
    let results: Vec<Result<RunMetrics>> = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?
            .install(|| tasks.par_iter().map(run).collect()),
        None => tasks.par_iter().map(run).collect(),
    };

    let mut cells = Vec::new();
    let mut it = results.into_iter();
    for right in rights {
        for &kind in &config.kinds {
            let mut runs = Vec::new();
            let mut errors = Vec::new();
            for _ in 0..seeds.len() {
                match it.next().expect("one result per task") {
                    Ok(m) => runs.push(m),
                    Err(e) => errors.push(e.to_string()),
                }
            }
            let cell = if errors.is_empty() {
                let (hit, f1, cls, brier) = summarize(&runs, &ks);
                CellReport {
                    right: right.clone(),
                    kind,
                    status: CellStatus::Ok,
                    error: None,
                    support: support(split, right),
                    hit_at_k: hit,
                    krank_f1: f1,
                    classification_f1: Some(cls),
                    brier: Some(brier),
                    runs,
                }
            } else {
                CellReport {
                    right: right.clone(),
                    kind,
                    status: CellStatus::Failed,
                    error: Some(errors.join("; ")),
                    support: support(split, right),
                    hit_at_k: BTreeMap::new(),
                    krank_f1: BTreeMap::new(),
                    classification_f1: None,
                    brier: None,
                    runs,
                }
            };
            cells.push(cell);
        }
    }
    Ok(EvaluationReport {
        split: SplitInfo {
            fingerprint: split.fingerprint(),
            seed: split.seed,
            test_fraction: split.test_fraction,
            train_documents: split.train.len(),
            test_documents: split.test.len(),
        },
        seeds,
        ks,
        kinds: config.kinds.clone(),
        rights: rights.to_vec(),
        cells,
    })
}
