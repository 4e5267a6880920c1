//! Trainable text encoder shared by the binary classifier and the sentence
//! embedder.
//!
//! A blob is reduced to hashed sparse features (word unigrams, word bigrams,
//! character n-grams of each word). Their embedding rows are summed and
//! scaled by `1/sqrt(n)`, then passed through a dense `tanh` projection. The
//! gradient of a loss with respect to the projection output is pushed back
//! through both layers by [`HashedEncoder::backward`].

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{AdamW, Moments};
use super::tensor::{read_tensors, take_tensor, write_tensors, Tensor, WeightsInfo};
use crate::error::{Error, Result};
use crate::text::{hash_str, tokenize};

/// Identifier of the built-in, seeded encoder initialisation. An optional
/// `@<seed>` suffix selects a different initialisation seed.
pub const BUILTIN_ENCODER: &str = "builtin:hashed-ngram";
const BUILTIN_SEED: u64 = 0x5eed_0fe4_c0de;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub buckets: usize,
    pub embed_dim: usize,
    pub output_dim: usize,
    pub word_bigrams: bool,
    /// Character n-gram length; 0 disables character features.
    pub char_ngram: usize,
    pub hash_seed: u64,
    /// Half-width of the uniform initialisation of embedding rows.
    pub init_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            buckets: 1 << 14,
            embed_dim: 64,
            output_dim: 64,
            word_bigrams: true,
            char_ngram: 4,
            hash_seed: 17,
            init_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashedEncoder {
    config: EncoderConfig,
    embeddings: Vec<f64>,
    proj_w: Vec<f64>,
    proj_b: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    pub pooled: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub rows: HashMap<u32, Vec<f64>>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

impl EncoderGrads {
    pub fn scale(&mut self, factor: f64) {
        self.rows.values_mut().flatten().for_each(|g| *g *= factor);
        self.proj_w.iter_mut().for_each(|g| *g *= factor);
        self.proj_b.iter_mut().for_each(|g| *g *= factor);
    }
}

#[derive(Debug, Clone)]
pub struct EncoderMoments {
    embeddings: Moments,
    proj_w: Moments,
    proj_b: Moments,
}

impl HashedEncoder {
    pub fn init(config: EncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = config.init_scale;
        let embeddings = (0..config.buckets * config.embed_dim)
            .map(|_| rng.random_range(-a..a))
            .collect();
        let limit = (6.0 / (config.embed_dim + config.output_dim) as f64).sqrt();
        let proj_w = (0..config.embed_dim * config.output_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let proj_b = vec![0.0; config.output_dim];
        HashedEncoder {
            config,
            embeddings,
            proj_w,
            proj_b,
        }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    fn bucket(&self, feature: &str) -> u32 {
        (hash_str(feature, self.config.hash_seed) % self.config.buckets as u64) as u32
    }

    /// Hashed feature ids of `text`, with repetitions.
    pub fn features(&self, text: &str) -> Vec<u32> {
        let tokens = tokenize(text);
        let mut out = Vec::with_capacity(tokens.len() * 8);
        for t in &tokens {
            out.push(self.bucket(&format!("w:{t}")));
        }
        if self.config.word_bigrams {
            for pair in tokens.windows(2) {
                out.push(self.bucket(&format!("b:{} {}", pair[0], pair[1])));
            }
        }
        let n = self.config.char_ngram;
        if n > 0 {
            for t in &tokens {
                let chars: Vec<char> = format!("<{t}>").chars().collect();
                if chars.len() <= n {
                    continue;
                }
                for gram in chars.windows(n) {
                    let g: String = gram.iter().collect();
                    out.push(self.bucket(&format!("c:{g}")));
                }
            }
        }
        out
    }

    pub fn forward(&self, features: &[u32]) -> EncoderTrace {
        let d = self.config.embed_dim;
        let mut pooled = vec![0.0; d];
        if !features.is_empty() {
            for &f in features {
                let row = &self.embeddings[f as usize * d..(f as usize + 1) * d];
                for (p, e) in pooled.iter_mut().zip(row) {
                    *p += e;
                }
            }
            let scale = 1.0 / (features.len() as f64).sqrt();
            pooled.iter_mut().for_each(|p| *p *= scale);
        }
        let output = (0..self.config.output_dim)
            .map(|o| {
                let w = &self.proj_w[o * d..(o + 1) * d];
                let z: f64 = w.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>() + self.proj_b[o];
                z.tanh()
            })
            .collect();
        EncoderTrace { pooled, output }
    }

    pub fn encode(&self, text: &str) -> Vec<f64> {
        self.forward(&self.features(text)).output
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            rows: HashMap::new(),
            proj_w: vec![0.0; self.proj_w.len()],
            proj_b: vec![0.0; self.proj_b.len()],
        }
    }

    /// Accumulates into `grads` the parameter gradient given `d_output`, the
    /// loss gradient with respect to the encoder output.
    pub fn backward(&self, features: &[u32], trace: &EncoderTrace, d_output: &[f64], grads: &mut EncoderGrads) {
        let d = self.config.embed_dim;
        let mut d_pooled = vec![0.0; d];
        for (o, (&h, &dh)) in trace.output.iter().zip(d_output).enumerate() {
            let dz = dh * (1.0 - h * h);
            if dz == 0.0 {
                continue;
            }
            grads.proj_b[o] += dz;
            let w = &self.proj_w[o * d..(o + 1) * d];
            let gw = &mut grads.proj_w[o * d..(o + 1) * d];
            for j in 0..d {
                gw[j] += dz * trace.pooled[j];
                d_pooled[j] += dz * w[j];
            }
        }
        if features.is_empty() {
            return;
        }
        let scale = 1.0 / (features.len() as f64).sqrt();
        for &f in features {
            let row = grads.rows.entry(f).or_insert_with(|| vec![0.0; d]);
            for (r, g) in row.iter_mut().zip(&d_pooled) {
                *r += g * scale;
            }
        }
    }

    pub fn moments(&self) -> EncoderMoments {
        EncoderMoments {
            embeddings: Moments::zeros(self.embeddings.len()),
            proj_w: Moments::zeros(self.proj_w.len()),
            proj_b: Moments::zeros(self.proj_b.len()),
        }
    }

    /// Applies one optimiser update. `opt.begin_step()` must already have
    /// been called for this step.
    pub fn apply(&mut self, grads: &EncoderGrads, opt: &AdamW, moments: &mut EncoderMoments) {
        opt.step_rows(
            &mut self.embeddings,
            self.config.embed_dim,
            &grads.rows,
            &mut moments.embeddings,
        );
        opt.step_dense(&mut self.proj_w, &grads.proj_w, &mut moments.proj_w);
        opt.step_dense(&mut self.proj_b, &grads.proj_b, &mut moments.proj_b);
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<Tensor> {
        let c = &self.config;
        vec![
            Tensor::new(
                format!("{prefix}embeddings"),
                vec![c.buckets, c.embed_dim],
                self.embeddings.clone(),
            ),
            Tensor::new(
                format!("{prefix}proj_w"),
                vec![c.output_dim, c.embed_dim],
                self.proj_w.clone(),
            ),
            Tensor::new(format!("{prefix}proj_b"), vec![c.output_dim], self.proj_b.clone()),
        ]
    }

    pub fn from_tensors(
        config: EncoderConfig,
        prefix: &str,
        tensors: &mut Vec<Tensor>,
    ) -> std::result::Result<Self, String> {
        let embeddings = take_tensor(
            tensors,
            &format!("{prefix}embeddings"),
            config.buckets * config.embed_dim,
        )?;
        let proj_w = take_tensor(
            tensors,
            &format!("{prefix}proj_w"),
            config.output_dim * config.embed_dim,
        )?;
        let proj_b = take_tensor(tensors, &format!("{prefix}proj_b"), config.output_dim)?;
        Ok(HashedEncoder {
            config,
            embeddings,
            proj_w,
            proj_b,
        })
    }

    /// Writes a standalone checkpoint (`encoder.json` + `encoder.bin`) that
    /// [`load_encoder`] accepts as a source path.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let weights = write_tensors(&dir.join("encoder.bin"), &self.to_tensors(""))?;
        let manifest = CheckpointManifest {
            config: self.config.clone(),
            weights,
        };
        let path = dir.join("encoder.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    config: EncoderConfig,
    weights: WeightsInfo,
}

/// Resolves an encoder source: the built-in identifier (optionally with
/// `@seed`) or a checkpoint directory.
pub fn load_encoder(source: &str, config: &EncoderConfig) -> Result<HashedEncoder> {
    if let Some(rest) = source.strip_prefix(BUILTIN_ENCODER) {
        let seed = match rest.strip_prefix('@') {
            None if rest.is_empty() => BUILTIN_SEED,
            Some(s) => s
                .parse()
                .map_err(|_| Error::ModelAsset(format!("invalid seed in encoder identifier `{source}`")))?,
            None => return Err(Error::ModelAsset(format!("unknown encoder `{source}`"))),
        };
        return Ok(HashedEncoder::init(config.clone(), seed));
    }
    let dir = Path::new(source);
    let manifest_path = dir.join("encoder.json");
    let raw = std::fs::read(&manifest_path)
        .map_err(|e| Error::ModelAsset(format!("encoder checkpoint `{source}` unavailable: {e}")))?;
    let manifest: CheckpointManifest = serde_json::from_slice(&raw)
        .map_err(|e| Error::ModelAsset(format!("encoder checkpoint `{source}` has invalid manifest: {e}")))?;
    let mut tensors = read_tensors(&dir.join(&manifest.weights.file), &manifest.weights)
        .map_err(|e| Error::ModelAsset(format!("encoder checkpoint `{source}`: {e}")))?;
    HashedEncoder::from_tensors(manifest.config, "", &mut tensors)
        .map_err(|e| Error::ModelAsset(format!("encoder checkpoint `{source}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EncoderConfig {
        EncoderConfig {
            buckets: 64,
            embed_dim: 5,
            output_dim: 4,
            ..EncoderConfig::default()
        }
    }

    #[test]
    fn features_are_deterministic_and_in_range() {
        let enc = HashedEncoder::init(small(), 1);
        let f = enc.features("Sie haben das Recht auf Löschung.");
        assert_eq!(f, enc.features("Sie haben das Recht auf Löschung."));
        assert!(f.iter().all(|&b| (b as usize) < 64));
        // 6 unigrams + 5 bigrams + char 4-grams of words longer than 2 chars.
        assert!(f.len() > 11);
    }

    #[test]
    fn empty_text_encodes_to_bias_only() {
        let enc = HashedEncoder::init(small(), 1);
        let out = enc.encode("--");
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Loss = sum_k c_k * output_k; check d/dW, d/db and one embedding row.
        let enc = HashedEncoder::init(small(), 3);
        let feats = enc.features("right to withdraw consent");
        let coeffs = [0.3, -1.2, 0.7, 0.05];
        let loss =
            |e: &HashedEncoder| -> f64 { e.forward(&feats).output.iter().zip(&coeffs).map(|(o, c)| o * c).sum() };
        let trace = enc.forward(&feats);
        let mut grads = enc.zero_grads();
        enc.backward(&feats, &trace, &coeffs, &mut grads);

        let h = 1e-6;
        for i in [0, 7, 13] {
            let mut plus = enc.clone();
            plus.proj_w[i] += h;
            let mut minus = enc.clone();
            minus.proj_w[i] -= h;
            let num = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (num - grads.proj_w[i]).abs() < 1e-7,
                "w[{i}]: {num} vs {}",
                grads.proj_w[i]
            );
        }
        let row = feats[0];
        for j in 0..5 {
            let idx = row as usize * 5 + j;
            let mut plus = enc.clone();
            plus.embeddings[idx] += h;
            let mut minus = enc.clone();
            minus.embeddings[idx] -= h;
            let num = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((num - grads.rows[&row][j]).abs() < 1e-7);
        }
        let mut plus = enc.clone();
        plus.proj_b[2] += h;
        let mut minus = enc.clone();
        minus.proj_b[2] -= h;
        let num = (loss(&plus) - loss(&minus)) / (2.0 * h);
        assert!((num - grads.proj_b[2]).abs() < 1e-7);
    }

    #[test]
    fn builtin_and_checkpoint_sources() {
        let a = load_encoder(BUILTIN_ENCODER, &small()).unwrap();
        let b = load_encoder(BUILTIN_ENCODER, &small()).unwrap();
        assert_eq!(a, b);
        let c = load_encoder(&format!("{BUILTIN_ENCODER}@9"), &small()).unwrap();
        assert_ne!(a, c);

        let dir = tempfile::tempdir().unwrap();
        a.save_checkpoint(dir.path()).unwrap();
        let loaded = load_encoder(dir.path().to_str().unwrap(), &EncoderConfig::default()).unwrap();
        assert_eq!(loaded, a);
    }

    #[test]
    fn missing_checkpoint_is_asset_error() {
        let err = load_encoder("/nonexistent/bert-base-german-cased", &small()).unwrap_err();
        assert!(matches!(err, Error::ModelAsset(_)));
        assert!(matches!(
            load_encoder("builtin:other", &small()),
            Err(Error::ModelAsset(_))
        ));
    }
}
