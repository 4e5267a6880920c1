//! Benchmark harness: split, retrieval and calibration metrics, reports.

mod benchmark;
pub mod metrics;
mod report;
pub mod split;

pub use benchmark::{evaluate_run, run_benchmark, run_on_split, BenchmarkConfig, DEFAULT_KS};
pub use metrics::{
    brier_score, class_balanced_weights, classification_f1, hit_at_k, krank_f1, Confusion, HitOutcome, KRankScore,
    MeanStd,
};
pub use report::{CellReport, CellStatus, EvaluationReport, RunMetrics, SplitInfo, Support};
pub use split::{split_corpus, CorpusSplit};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::models::{ModelKind, ModelSettings};
    use crate::synth::{synth_corpus, SynthConfig};

    fn corpus() -> Corpus {
        Corpus::new(synth_corpus(&SynthConfig {
            documents: 20,
            blobs_per_document: 20,
            ..SynthConfig::default()
        }))
    }

    #[test]
    fn report_shape_and_reproducibility() {
        let c = corpus();
        let config = BenchmarkConfig {
            kinds: vec![ModelKind::GaussianNb],
            repetitions: 2,
            settings: ModelSettings::fast(),
            jobs: Some(2),
            ..BenchmarkConfig::default()
        };
        let a = run_benchmark(&c, &config).unwrap();
        let b = run_benchmark(&c, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 5);
        for cell in &a.cells {
            assert_eq!(cell.status, CellStatus::Ok);
            assert_eq!(cell.runs.len(), 2);
            for m in cell.hit_at_k.values().chain(cell.krank_f1.values()) {
                assert!((0.0..=1.0).contains(&m.mean) && m.std >= 0.0);
            }
            let brier = cell.brier.unwrap();
            assert!((0.0..=1.0).contains(&brier.mean));
            // Hit rate never drops as k grows.
            assert!(cell.hit_at_k[&5].mean <= cell.hit_at_k[&10].mean);
            assert!(cell.hit_at_k[&10].mean <= cell.hit_at_k[&25].mean);
        }
        let table = a.to_table();
        for row in ["5-rank", "10-rank", "25-rank", "classification"] {
            assert!(table.lines().any(|l| l.starts_with(row)), "{table}");
        }
        assert!(table.contains("GaussianNB"));
        let json: EvaluationReport = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(json, a);
    }

    #[test]
    fn single_repetition_has_zero_std() {
        let config = BenchmarkConfig {
            kinds: vec![ModelKind::GaussianNb, ModelKind::SentenceEmbedder],
            repetitions: 1,
            settings: ModelSettings::fast(),
            ..BenchmarkConfig::default()
        };
        let r = run_benchmark(&corpus(), &config).unwrap();
        for cell in &r.cells {
            assert!(cell.hit_at_k.values().all(|m| m.std == 0.0));
            assert_eq!(cell.brier.unwrap().std, 0.0);
        }
        assert!(r.to_table().contains("(0.00)"));
    }

    #[test]
    fn failing_kind_is_isolated() {
        let mut settings = ModelSettings::fast();
        settings.binary_classifier.encoder_source = "/missing/encoder".into();
        let config = BenchmarkConfig {
            kinds: vec![ModelKind::GaussianNb, ModelKind::BinaryClassifier],
            repetitions: 1,
            settings,
            ..BenchmarkConfig::default()
        };
        let r = run_benchmark(&corpus(), &config).unwrap();
        for cell in &r.cells {
            match cell.kind {
                ModelKind::BinaryClassifier => assert_eq!(cell.status, CellStatus::Failed),
                _ => assert_eq!(cell.status, CellStatus::Ok),
            }
        }
        assert!(r.to_table().contains("failed"));
    }
}
