use serde::{Deserialize, Serialize};

use super::{NnError, ParameterStore};

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    /// One update of every non-frozen parameter from its stored gradient.
    ///
    /// `p ← p − lr·(m̂ / (√v̂ + ε) + wd·p)` with bias-corrected moments.
    /// Fails before touching anything if a trainable parameter has no gradient.
    pub fn step(&self, store: &mut ParameterStore) -> Result<(), NnError> {
        if let Some((name, _)) = store
            .iter()
            .find(|(_, p)| !p.options.frozen && p.tensor.grad().is_none())
        {
            return Err(NnError::MissingGradient(name.to_string()));
        }
        store.step += 1;
        let t = store.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (_, p) in store.iter_mut() {
            if p.options.frozen {
                continue;
            }
            let lr = p.options.learning_rate.unwrap_or(self.learning_rate);
            let wd = if p.options.weight_decay { self.weight_decay } else { 0.0 };
            let grad = p.tensor.grad().expect("checked above").to_vec();
            let (m, v) = (&mut p.first_moment, &mut p.second_moment);
            for (k, x) in p.tensor.values_mut().iter_mut().enumerate() {
                let g = grad[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                *x -= lr * (m_hat / (v_hat.sqrt() + self.eps) + wd * *x);
            }
        }
        Ok(())
    }
}
