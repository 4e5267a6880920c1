//! On-disk model artifacts: `manifest.json` plus a `weights.bin` of
//! little-endian f64 tensors whose checksum the manifest records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::calibration::Calibrator;
use super::classifier::BinaryClassifier;
use super::encoder::{EncoderConfig, HashedEncoder};
use super::naive_bayes::GaussianNb;
use super::static_embed::StaticVectorsSpec;
use super::tensor::{read_tensors, take_tensor, write_tensors, Tensor, WeightsInfo};
use super::triplet::SentenceEmbedder;
use super::{ExtractionModel, ModelInfo, ModelKind, ModelParams, StaticNb};
use crate::corpus::LabelId;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamsMeta {
    GaussianNb {
        vectors: StaticVectorsSpec,
        dim: usize,
    },
    BinaryClassifier {
        encoder: EncoderConfig,
    },
    SentenceEmbedder {
        encoder: EncoderConfig,
        anchor_text: String,
        calibrator: Calibrator,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: u32,
    pub label: LabelId,
    pub kind: ModelKind,
    pub version: u64,
    pub params: ParamsMeta,
    pub info: ModelInfo,
    pub weights: WeightsInfo,
}

impl ModelManifest {
    pub fn extractor_name(&self) -> String {
        format!("{}/{}/v{:03}", self.label, self.kind, self.version)
    }
}

fn to_tensors(params: &ModelParams) -> (ParamsMeta, Vec<Tensor>) {
    match params {
        ModelParams::GaussianNb(m) => {
            let nb = &m.nb;
            let d = nb.dim();
            let tensors = vec![
                Tensor::new("nb.mean_neg", vec![d], nb.means[0].clone()),
                Tensor::new("nb.mean_pos", vec![d], nb.means[1].clone()),
                Tensor::new("nb.var_neg", vec![d], nb.variances[0].clone()),
                Tensor::new("nb.var_pos", vec![d], nb.variances[1].clone()),
                Tensor::new("nb.priors", vec![2], nb.priors.to_vec()),
            ];
            (
                ParamsMeta::GaussianNb {
                    vectors: m.vectors_spec.clone(),
                    dim: d,
                },
                tensors,
            )
        }
        ModelParams::BinaryClassifier(m) => {
            let mut tensors = m.encoder.to_tensors("encoder.");
            tensors.push(Tensor::new("head.w", vec![m.head_w.len()], m.head_w.clone()));
            tensors.push(Tensor::new("head.b", vec![1], vec![m.head_b]));
            (
                ParamsMeta::BinaryClassifier {
                    encoder: m.encoder.config().clone(),
                },
                tensors,
            )
        }
        ModelParams::SentenceEmbedder(m) => (
            ParamsMeta::SentenceEmbedder {
                encoder: m.encoder.config().clone(),
                anchor_text: m.anchor_text.clone(),
                calibrator: m.calibrator,
            },
            m.encoder.to_tensors("encoder."),
        ),
    }
}

fn from_tensors(meta: &ParamsMeta, tensors: &mut Vec<Tensor>) -> std::result::Result<ModelParams, String> {
    Ok(match meta {
        ParamsMeta::GaussianNb { vectors, dim } => {
            let nb = GaussianNb {
                means: [
                    take_tensor(tensors, "nb.mean_neg", *dim)?,
                    take_tensor(tensors, "nb.mean_pos", *dim)?,
                ],
                variances: [
                    take_tensor(tensors, "nb.var_neg", *dim)?,
                    take_tensor(tensors, "nb.var_pos", *dim)?,
                ],
                priors: {
                    let p = take_tensor(tensors, "nb.priors", 2)?;
                    [p[0], p[1]]
                },
            };
            ModelParams::GaussianNb(StaticNb::new(vectors.clone(), nb).map_err(|e| e.to_string())?)
        }
        ParamsMeta::BinaryClassifier { encoder } => {
            let enc = HashedEncoder::from_tensors(encoder.clone(), "encoder.", tensors)?;
            let head_w = take_tensor(tensors, "head.w", encoder.output_dim)?;
            let head_b = take_tensor(tensors, "head.b", 1)?[0];
            ModelParams::BinaryClassifier(BinaryClassifier {
                encoder: enc,
                head_w,
                head_b,
            })
        }
        ParamsMeta::SentenceEmbedder {
            encoder,
            anchor_text,
            calibrator,
        } => {
            let enc = HashedEncoder::from_tensors(encoder.clone(), "encoder.", tensors)?;
            let calibrator = Calibrator::new(calibrator.scale, calibrator.offset).map_err(|e| e.to_string())?;
            ModelParams::SentenceEmbedder(SentenceEmbedder::new(enc, anchor_text.clone(), calibrator))
        }
    })
}

/// Writes `model` into `dir` (created if needed).
pub fn save_model(dir: &Path, model: &ExtractionModel) -> Result<ModelManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (params, tensors) = to_tensors(&model.params);
    let weights = write_tensors(&dir.join(WEIGHTS_FILE), &tensors)?;
    let manifest = ModelManifest {
        format: FORMAT,
        label: model.label.clone(),
        kind: model.kind,
        version: model.version,
        params,
        info: model.info.clone(),
        weights,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads a model directory, verifying the weights against the manifest.
pub fn load_model(dir: &Path) -> Result<ExtractionModel> {
    let fallback = dir.display().to_string();
    let integrity = |extractor: &str, message: String| Error::Integrity {
        extractor: extractor.to_string(),
        message,
    };
    let path = dir.join(MANIFEST_FILE);
    let raw = std::fs::read(&path).map_err(|e| integrity(&fallback, format!("cannot read manifest: {e}")))?;
    let manifest: ModelManifest =
        serde_json::from_slice(&raw).map_err(|e| integrity(&fallback, format!("invalid manifest: {e}")))?;
    let name = manifest.extractor_name();
    if manifest.format != FORMAT {
        return Err(integrity(
            &name,
            format!("unsupported artifact format {}", manifest.format),
        ));
    }
    let kind_matches = matches!(
        (&manifest.params, manifest.kind),
        (ParamsMeta::GaussianNb { .. }, ModelKind::GaussianNb)
            | (ParamsMeta::BinaryClassifier { .. }, ModelKind::BinaryClassifier)
            | (ParamsMeta::SentenceEmbedder { .. }, ModelKind::SentenceEmbedder)
    );
    if !kind_matches {
        return Err(integrity(&name, "parameter block does not match model kind".into()));
    }
    let mut tensors =
        read_tensors(&dir.join(&manifest.weights.file), &manifest.weights).map_err(|e| integrity(&name, e))?;
    let params = from_tensors(&manifest.params, &mut tensors).map_err(|e| integrity(&name, e))?;
    if let Some(extra) = tensors.first() {
        return Err(integrity(&name, format!("unexpected tensor `{}`", extra.name)));
    }
    Ok(ExtractionModel {
        kind: manifest.kind,
        label: manifest.label,
        version: manifest.version,
        params,
        info: manifest.info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::data::{TrainingBlob, TrainingDoc, TrainingSet};
    use crate::models::{train_model, ModelSettings};

    fn data() -> TrainingSet {
        let blobs = (0..12)
            .map(|i| TrainingBlob {
                index: i,
                text: if i % 4 == 0 {
                    format!("delete my personal data {i}")
                } else {
                    format!("cookies are small files {i}")
                },
                value: i % 4 == 0,
            })
            .collect();
        TrainingSet {
            label: "right_deletion".into(),
            language: "en".into(),
            docs: vec![TrainingDoc { id: "d".into(), blobs }],
        }
    }

    fn settings() -> ModelSettings {
        let enc = EncoderConfig {
            buckets: 256,
            embed_dim: 8,
            output_dim: 8,
            ..EncoderConfig::default()
        };
        let mut s = ModelSettings::default();
        s.binary_classifier.encoder = enc.clone();
        s.binary_classifier.epochs = 1;
        s.sentence_embedder.encoder = enc;
        s.sentence_embedder.epochs = 1;
        s
    }

    #[test]
    fn round_trip_preserves_scores() {
        let d = data();
        for kind in ModelKind::ALL {
            let mut m = train_model(kind, &d, &settings(), "erasure", 1).unwrap();
            m.version = 4;
            let dir = tempfile::tempdir().unwrap();
            save_model(dir.path(), &m).unwrap();
            let back = load_model(dir.path()).unwrap();
            assert_eq!(back.kind, kind);
            assert_eq!(back.version, 4);
            assert_eq!(back.info, m.info);
            for b in d.examples() {
                assert_eq!(back.score_text(&b.text), m.score_text(&b.text), "{kind}");
            }
        }
    }

    #[test]
    fn corrupted_weights_are_integrity_errors() {
        let m = train_model(ModelKind::GaussianNb, &data(), &settings(), "", 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &m).unwrap();
        let w = dir.path().join(WEIGHTS_FILE);
        let mut bytes = std::fs::read(&w).unwrap();
        bytes[3] ^= 0xff;
        std::fs::write(&w, &bytes).unwrap();
        match load_model(dir.path()) {
            Err(Error::Integrity { extractor, message }) => {
                assert_eq!(extractor, "right_deletion/gaussian_nb/v000");
                assert!(message.contains("checksum"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&w, &bytes[..8]).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Integrity { .. })));
    }

    #[test]
    fn missing_manifest_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Integrity { .. })));
    }
}
