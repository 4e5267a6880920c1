//! Binary relevance classifier: the shared encoder with a logistic head,
//! trained end to end with binary cross entropy under AdamW.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calibration::sigmoid;
use super::data::TrainingSet;
use super::encoder::{load_encoder, EncoderConfig, HashedEncoder, BUILTIN_ENCODER};
use super::optim::{AdamW, AdamWConfig, Moments};
use super::sampling::BalancedSampler;
use super::TrainingLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Balanced draws per epoch; defaults to the number of training blobs.
    pub samples_per_epoch: Option<usize>,
    pub encoder_source: String,
    pub encoder: EncoderConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            epochs: 5,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            batch_size: 16,
            samples_per_epoch: None,
            encoder_source: BUILTIN_ENCODER.to_string(),
            encoder: EncoderConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClassifier {
    pub encoder: HashedEncoder,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl BinaryClassifier {
    pub fn init(encoder: HashedEncoder, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_w = (0..encoder.output_dim())
            .map(|_| rng.random_range(-0.05..0.05))
            .collect();
        BinaryClassifier {
            encoder,
            head_w,
            head_b: 0.0,
        }
    }

    fn logit(&self, hidden: &[f64]) -> f64 {
        self.head_w.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>() + self.head_b
    }

    pub fn score(&self, text: &str) -> f64 {
        sigmoid(self.logit(&self.encoder.encode(text)))
    }
}

/// `log(1 + e^z) - y z`, the cross entropy of a logit against a 0/1 target.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - y * z
}

pub fn train_binary_classifier(
    data: &TrainingSet,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<(BinaryClassifier, TrainingLog)> {
    config.validate()?;
    let examples: Vec<_> = data.examples().collect();
    let values: Vec<bool> = examples.iter().map(|b| b.value).collect();
    let mut sampler = BalancedSampler::new(&values, seed)?;
    let encoder = load_encoder(&config.encoder_source, &config.encoder)?;
    let mut model = BinaryClassifier::init(encoder, seed.wrapping_add(1));

    let mut features: HashMap<usize, Vec<u32>> = HashMap::new();
    let mut opt = AdamW::new(AdamWConfig::new(config.learning_rate, config.weight_decay));
    let mut enc_moments = model.encoder.moments();
    let mut head_moments = Moments::zeros(model.head_w.len());
    let mut bias_moments = Moments::zeros(1);
    let per_epoch = config.samples_per_epoch.unwrap_or(examples.len()).max(1);
    let mut log = TrainingLog::default();

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut drawn = 0;
        while drawn < per_epoch {
            let batch = sampler.draw(config.batch_size.min(per_epoch - drawn));
            drawn += batch.len();
            opt.begin_step();
            let mut grads = model.encoder.zero_grads();
            let mut head_grad = vec![0.0; model.head_w.len()];
            let mut bias_grad = 0.0;
            for &i in &batch {
                let f = features
                    .entry(i)
                    .or_insert_with(|| model.encoder.features(&examples[i].text));
                let trace = model.encoder.forward(f);
                let z = model.logit(&trace.output);
                let y = if examples[i].value { 1.0 } else { 0.0 };
                epoch_loss += bce_with_logit(z, y);
                let dz = sigmoid(z) - y;
                for (g, h) in head_grad.iter_mut().zip(&trace.output) {
                    *g += dz * h;
                }
                bias_grad += dz;
                let d_hidden: Vec<f64> = model.head_w.iter().map(|w| dz * w).collect();
                model.encoder.backward(f, &trace, &d_hidden, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.scale(scale);
            head_grad.iter_mut().for_each(|g| *g *= scale);
            bias_grad *= scale;
            model.encoder.apply(&grads, &opt, &mut enc_moments);
            opt.step_dense(&mut model.head_w, &head_grad, &mut head_moments);
            let mut b = [model.head_b];
            opt.step_dense(&mut b, &[bias_grad], &mut bias_moments);
            model.head_b = b[0];
        }
        let mean = epoch_loss / per_epoch as f64;
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "cross entropy is {mean} in epoch {epoch}"
            )));
        }
        tracing::debug!(epoch, loss = mean, "classifier epoch");
        log.epoch_losses.push(mean);
    }
    Ok((model, log))
}
