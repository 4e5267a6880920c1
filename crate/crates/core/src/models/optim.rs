//! Adam with decoupled weight decay.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamWConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamWConfig {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Moments {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamWConfig,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        AdamW { config, step: 0 }
    }

    /// Advances the shared step counter; call once per optimisation step
    /// before updating the individual tensors.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step.max(1) as i32;
        (1.0 - self.config.beta1.powi(t), 1.0 - self.config.beta2.powi(t))
    }

    fn update(&self, p: &mut f64, g: f64, m: &mut f64, v: &mut f64, bc1: f64, bc2: f64) {
        let c = &self.config;
        *p *= 1.0 - c.learning_rate * c.weight_decay;
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.eps);
    }

    pub fn step_dense(&self, params: &mut [f64], grads: &[f64], state: &mut Moments) {
        debug_assert_eq!(params.len(), grads.len());
        let (bc1, bc2) = self.corrections();
        for i in 0..params.len() {
            self.update(&mut params[i], grads[i], &mut state.m[i], &mut state.v[i], bc1, bc2);
        }
    }

    /// Lazy update of the rows of a row-major matrix that received gradient.
    /// Rows without gradient keep their moments and skip weight decay.
    pub fn step_rows(&self, params: &mut [f64], row_len: usize, grads: &HashMap<u32, Vec<f64>>, state: &mut Moments) {
        let (bc1, bc2) = self.corrections();
        for (&row, g) in grads {
            let base = row as usize * row_len;
            for (j, &gj) in g.iter().enumerate().take(row_len) {
                let i = base + j;
                self.update(&mut params[i], gj, &mut state.m[i], &mut state.v[i], bc1, bc2);
            }
        }
    }
}
