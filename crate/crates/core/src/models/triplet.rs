//! Sentence embedder fine-tuned with the triplet loss against a fixed anchor
//! query (the statutory text of the right).

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calibration::Calibrator;
use super::data::TrainingSet;
use super::encoder::{load_encoder, EncoderConfig, EncoderTrace, HashedEncoder, BUILTIN_ENCODER};
use super::optim::{AdamW, AdamWConfig};
use super::sampling::inverse_frequency_weights;
use super::TrainingLog;
use crate::error::{Error, Result};

/// Mean loss below which training stops before the configured epochs.
pub const EARLY_STOP_LOSS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripletConfig {
    /// Anchor query; filled in per label when empty.
    pub anchor_text: String,
    pub margin: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Upper bound on triplets per training run; larger cross products are
    /// uniformly subsampled.
    pub max_triplets: usize,
    pub encoder_source: String,
    pub encoder: EncoderConfig,
}

impl Default for TripletConfig {
    fn default() -> Self {
        TripletConfig {
            anchor_text: String::new(),
            margin: 1.0,
            epochs: 5,
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            max_triplets: 100_000,
            encoder_source: BUILTIN_ENCODER.to_string(),
            encoder: EncoderConfig::default(),
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Argument(format!(
                "triplet margin must be >= 0, got {}",
                self.margin
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be positive".into()));
        }
        if self.anchor_text.trim().is_empty() {
            return Err(Error::Argument("anchor text must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet<'a> {
    pub anchor: &'a str,
    pub positive: &'a str,
    pub negative: &'a str,
}

/// Cross product of positive and negative blobs within each document,
/// subsampled to `cap` triplets (seeded, order preserved) when larger.
pub fn build_triplets<'a>(set: &'a TrainingSet, anchor: &'a str, cap: usize, seed: u64) -> Result<Vec<Triplet<'a>>> {
    if set.positive_count() == 0 {
        return Err(Error::DegenerateTrainingSet(format!(
            "no positive blobs for `{}`",
            set.label
        )));
    }
    let mut all = Vec::new();
    for doc in &set.docs {
        for p in doc.positives() {
            for n in doc.negatives() {
                all.push(Triplet {
                    anchor,
                    positive: &p.text,
                    negative: &n.text,
                });
            }
        }
    }
    if all.is_empty() {
        return Err(Error::DegenerateTrainingSet(format!(
            "no document holds both positive and negative blobs for `{}`",
            set.label
        )));
    }
    if all.len() <= cap {
        return Ok(all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = index::sample(&mut rng, all.len(), cap).into_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| all[i]).collect())
}

fn check_dims(q: &[f64], pos: &[f64], neg: &[f64]) -> Result<()> {
    for v in [pos, neg] {
        if v.len() != q.len() {
            return Err(Error::Shape {
                expected: q.len(),
                actual: v.len(),
            });
        }
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `max(||q - pos|| - ||q - neg|| + margin, 0)`.
pub fn triplet_loss(q: &[f64], pos: &[f64], neg: &[f64], margin: f64) -> Result<f64> {
    check_dims(q, pos, neg)?;
    Ok((euclidean(q, pos) - euclidean(q, neg) + margin).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    pub d_anchor: Vec<f64>,
    pub d_positive: Vec<f64>,
    pub d_negative: Vec<f64>,
}

/// Loss and its gradient with respect to each embedding. The gradient is
/// taken as zero on the inactive side of the hinge and for a zero distance.
pub fn triplet_loss_grad(q: &[f64], pos: &[f64], neg: &[f64], margin: f64) -> Result<TripletGrad> {
    check_dims(q, pos, neg)?;
    let dp = euclidean(q, pos);
    let dn = euclidean(q, neg);
    let raw = dp - dn + margin;
    let dim = q.len();
    let mut g = TripletGrad {
        loss: raw.max(0.0),
        d_anchor: vec![0.0; dim],
        d_positive: vec![0.0; dim],
        d_negative: vec![0.0; dim],
    };
    if raw <= 0.0 {
        return Ok(g);
    }
    for j in 0..dim {
        let up = if dp > 0.0 { (q[j] - pos[j]) / dp } else { 0.0 };
        let un = if dn > 0.0 { (q[j] - neg[j]) / dn } else { 0.0 };
        g.d_anchor[j] = up - un;
        g.d_positive[j] = -up;
        g.d_negative[j] = un;
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedder {
    pub encoder: HashedEncoder,
    pub anchor_text: String,
    anchor: Vec<f64>,
    pub calibrator: Calibrator,
}

impl SentenceEmbedder {
    pub fn new(encoder: HashedEncoder, anchor_text: String, calibrator: Calibrator) -> Self {
        let anchor = encoder.encode(&anchor_text);
        SentenceEmbedder {
            encoder,
            anchor_text,
            anchor,
            calibrator,
        }
    }

    pub fn anchor_embedding(&self) -> &[f64] {
        &self.anchor
    }

    pub fn distance(&self, text: &str) -> f64 {
        euclidean(&self.anchor, &self.encoder.encode(text))
    }

    pub fn score(&self, text: &str) -> f64 {
        self.calibrator.apply(-self.distance(text))
    }
}

struct FeatureCache<'a> {
    encoder_features: HashMap<&'a str, Vec<u32>>,
}

impl<'a> FeatureCache<'a> {
    fn new(encoder: &HashedEncoder, texts: impl Iterator<Item = &'a str>) -> Self {
        let mut encoder_features = HashMap::new();
        for t in texts {
            encoder_features.entry(t).or_insert_with(|| encoder.features(t));
        }
        FeatureCache { encoder_features }
    }

    fn get(&self, t: &str) -> &[u32] {
        &self.encoder_features[t]
    }
}

/// Fine-tunes the encoder on `triplets`, then fits the probability
/// calibrator on `calibration` (all training blobs of the label).
pub fn train_sentence_embedder(
    triplets: &[Triplet<'_>],
    calibration: &TrainingSet,
    config: &TripletConfig,
    seed: u64,
) -> Result<(SentenceEmbedder, TrainingLog)> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(Error::DegenerateTrainingSet("no triplets to train on".into()));
    }
    let mut encoder = load_encoder(&config.encoder_source, &config.encoder)?;
    let anchor_text = config.anchor_text.as_str();
    let cache = FeatureCache::new(
        &encoder,
        std::iter::once(anchor_text).chain(triplets.iter().flat_map(|t| [t.positive, t.negative])),
    );
    let anchor_features = encoder.features(anchor_text);

    let mut opt = AdamW::new(AdamWConfig::new(config.learning_rate, config.weight_decay));
    let mut moments = encoder.moments();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            opt.begin_step();
            let mut grads = encoder.zero_grads();
            let anchor_trace = encoder.forward(&anchor_features);
            let mut d_anchor = vec![0.0; encoder.output_dim()];
            let mut pending: Vec<(&[u32], EncoderTrace, Vec<f64>)> = Vec::with_capacity(batch.len() * 2);
            for &i in batch {
                let t = &triplets[i];
                let (pf, nf) = (cache.get(t.positive), cache.get(t.negative));
                let pt = encoder.forward(pf);
                let nt = encoder.forward(nf);
                let g = triplet_loss_grad(&anchor_trace.output, &pt.output, &nt.output, config.margin)?;
                epoch_loss += g.loss;
                if g.loss > 0.0 {
                    for (a, d) in d_anchor.iter_mut().zip(&g.d_anchor) {
                        *a += d;
                    }
                    pending.push((pf, pt, g.d_positive));
                    pending.push((nf, nt, g.d_negative));
                }
            }
            for (f, trace, d) in &pending {
                encoder.backward(f, trace, d, &mut grads);
            }
            encoder.backward(&anchor_features, &anchor_trace, &d_anchor, &mut grads);
            grads.scale(1.0 / batch.len() as f64);
            encoder.apply(&grads, &opt, &mut moments);
        }
        let mean = epoch_loss / triplets.len() as f64;
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "triplet loss is {mean} in epoch {epoch}"
            )));
        }
        tracing::debug!(epoch, loss = mean, "triplet epoch");
        log.epoch_losses.push(mean);
        if mean < EARLY_STOP_LOSS {
            break;
        }
    }

    let mut model = SentenceEmbedder::new(encoder, config.anchor_text.clone(), Calibrator::identity());
    let (raw, values): (Vec<f64>, Vec<bool>) = calibration
        .examples()
        .map(|b| (-model.distance(&b.text), b.value))
        .unzip();
    let weights = inverse_frequency_weights(&values)?;
    model.calibrator = Calibrator::fit(&raw, &values, &weights)?;
    Ok((model, log))
}
