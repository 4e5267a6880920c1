//! Extraction models: Gaussian naive Bayes over static embeddings, a binary
//! classifier over a fine-tuned encoder, and a triplet-loss sentence
//! embedder with a logistic calibrator.

pub mod calibration;
pub mod classifier;
pub mod data;
pub mod encoder;
pub mod naive_bayes;
pub mod optim;
pub mod sampling;
pub mod static_embed;
pub mod tensor;
pub mod triplet;

mod artifact;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Blob, LabelId};
use crate::error::{Error, Result};
use calibration::Calibrator;
use classifier::{train_binary_classifier, BinaryClassifier, ClassifierConfig};
use data::TrainingSet;
use naive_bayes::{fit_gaussian_nb, GaussianNb};
use sampling::inverse_frequency_weights;
use static_embed::{embed_blob_static, StaticVectorsSpec, TokenVectors};
use triplet::{build_triplets, train_sentence_embedder, SentenceEmbedder, TripletConfig};

pub use artifact::{load_model, save_model, ModelManifest, MANIFEST_FILE, WEIGHTS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GaussianNb,
    BinaryClassifier,
    SentenceEmbedder,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::BinaryClassifier,
        ModelKind::SentenceEmbedder,
        ModelKind::GaussianNb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::BinaryClassifier => "binary_classifier",
            ModelKind::SentenceEmbedder => "sentence_embedder",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::GaussianNb => "GaussianNB",
            ModelKind::BinaryClassifier => "BinaryClassifier",
            ModelKind::SentenceEmbedder => "SentenceEmbedder",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbConfig {
    pub vectors: StaticVectorsSpec,
}

/// Training configuration for every model kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub gaussian_nb: NbConfig,
    pub binary_classifier: ClassifierConfig,
    pub sentence_embedder: TripletConfig,
}

impl ModelSettings {
    /// Small encoders and a single epoch, for smoke runs and tests.
    pub fn fast() -> Self {
        let encoder = encoder::EncoderConfig {
            buckets: 1024,
            embed_dim: 16,
            output_dim: 16,
            ..encoder::EncoderConfig::default()
        };
        let mut s = ModelSettings::default();
        s.binary_classifier.encoder = encoder.clone();
        s.binary_classifier.epochs = 1;
        s.binary_classifier.samples_per_epoch = Some(128);
        s.sentence_embedder.encoder = encoder;
        s.sentence_embedder.epochs = 1;
        s.sentence_embedder.max_triplets = 500;
        s
    }
}

/// Gaussian naive Bayes over mean static token vectors.
#[derive(Clone)]
pub struct StaticNb {
    pub vectors_spec: StaticVectorsSpec,
    pub nb: GaussianNb,
    vectors: Arc<dyn TokenVectors>,
}

impl fmt::Debug for StaticNb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StaticNb")
            .field("vectors_spec", &self.vectors_spec)
            .field("nb", &self.nb)
            .finish()
    }
}

impl StaticNb {
    pub fn new(vectors_spec: StaticVectorsSpec, nb: GaussianNb) -> Result<Self> {
        let vectors: Arc<dyn TokenVectors> = Arc::from(vectors_spec.load()?);
        if vectors.dim() != nb.dim() {
            return Err(Error::Shape {
                expected: nb.dim(),
                actual: vectors.dim(),
            });
        }
        Ok(StaticNb {
            vectors_spec,
            nb,
            vectors,
        })
    }

    pub fn score(&self, text: &str) -> f64 {
        let e = embed_blob_static(self.vectors.as_ref(), text);
        self.nb
            .predict_proba(&e.vector)
            .expect("embedding dimension is checked at construction")
    }
}

#[derive(Debug, Clone)]
pub enum ModelParams {
    GaussianNb(StaticNb),
    BinaryClassifier(BinaryClassifier),
    SentenceEmbedder(SentenceEmbedder),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub training_fingerprint: String,
    pub training_examples: usize,
    pub training_positives: usize,
    pub epoch_losses: Vec<f64>,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub delta_fingerprint: Option<String>,
    #[serde(default)]
    pub delta_count: usize,
}

/// A trained estimator bound to one label.
#[derive(Debug, Clone)]
pub struct ExtractionModel {
    pub kind: ModelKind,
    pub label: LabelId,
    pub version: u64,
    pub params: ModelParams,
    pub info: ModelInfo,
}

impl ExtractionModel {
    /// Probability that `text` contains the model's label.
    pub fn score_text(&self, text: &str) -> f64 {
        match &self.params {
            ModelParams::GaussianNb(m) => m.score(text),
            ModelParams::BinaryClassifier(m) => m.score(text),
            ModelParams::SentenceEmbedder(m) => m.score(text),
        }
    }

    pub fn calibrator(&self) -> Option<Calibrator> {
        match &self.params {
            ModelParams::SentenceEmbedder(m) => Some(m.calibrator),
            _ => None,
        }
    }

    /// Scores every blob of a document, in blob order.
    pub fn score_blobs(&self, blobs: &[Blob]) -> Vec<(usize, f64)> {
        blobs.iter().map(|b| (b.index, self.score_text(&b.text))).collect()
    }
}

/// Scores one blob; the model must have been trained for `label`.
pub fn score_blob(model: &ExtractionModel, blob: &Blob, label: &LabelId) -> Result<f64> {
    if &model.label != label {
        return Err(Error::NotTrained(format!(
            "{label} (model was trained for {})",
            model.label
        )));
    }
    Ok(model.score_text(&blob.text))
}

/// Trains one model of `kind` on `data`. The returned model has version 0;
/// registries assign versions.
pub fn train_model(
    kind: ModelKind,
    data: &TrainingSet,
    settings: &ModelSettings,
    anchor_text: &str,
    seed: u64,
) -> Result<ExtractionModel> {
    let (params, losses) = match kind {
        ModelKind::GaussianNb => {
            let vectors_spec = settings.gaussian_nb.vectors.clone();
            let vectors = vectors_spec.load()?;
            let mut features = Vec::with_capacity(data.len());
            let mut values = Vec::with_capacity(data.len());
            let mut all_oov = 0usize;
            for b in data.examples() {
                let e = embed_blob_static(vectors.as_ref(), &b.text);
                all_oov += usize::from(e.all_out_of_vocabulary);
                features.push(e.vector);
                values.push(b.value);
            }
            if all_oov > 0 {
                tracing::warn!(label = %data.label, blobs = all_oov, "blobs without any in-vocabulary token");
            }
            let weights = inverse_frequency_weights(&values)?;
            let nb = fit_gaussian_nb(&features, &values, &weights)?;
            (ModelParams::GaussianNb(StaticNb::new(vectors_spec, nb)?), Vec::new())
        }
        ModelKind::BinaryClassifier => {
            let (m, log) = train_binary_classifier(data, &settings.binary_classifier, seed)?;
            (ModelParams::BinaryClassifier(m), log.epoch_losses)
        }
        ModelKind::SentenceEmbedder => {
            let mut config = settings.sentence_embedder.clone();
            if config.anchor_text.trim().is_empty() {
                config.anchor_text = anchor_text.to_string();
            }
            let triplets = build_triplets(data, &config.anchor_text, config.max_triplets, seed)?;
            let (m, log) = train_sentence_embedder(&triplets, data, &config, seed)?;
            (ModelParams::SentenceEmbedder(m), log.epoch_losses)
        }
    };
    Ok(ExtractionModel {
        kind,
        label: data.label.clone(),
        version: 0,
        params,
        info: ModelInfo {
            training_fingerprint: data.fingerprint(),
            training_examples: data.len(),
            training_positives: data.positive_count(),
            epoch_losses: losses,
            seed,
            created_at: Utc::now(),
            delta_fingerprint: None,
            delta_count: 0,
        },
    })
}
