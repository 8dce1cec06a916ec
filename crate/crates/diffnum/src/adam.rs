use std::collections::BTreeMap;

use crate::array::Array;
use crate::error::{DiffError, Result};
use crate::params::{Gradients, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// Adam with decoupled weight decay.
///
/// Each step first shrinks a trainable parameter by `lr · weight_decay · w`
/// and then applies the bias-corrected adaptive update. Frozen slots are
/// never touched.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        // Validate everything before mutating anything.
        for (name, g) in grads {
            if !g.is_finite() {
                return Err(DiffError::NonFiniteGradient(name.clone()));
            }
            let slot = store
                .slot(name)
                .ok_or_else(|| DiffError::UnknownSlot(name.clone()))?;
            if slot.value.shape() != g.shape() {
                return Err(DiffError::Shape {
                    op: "adam_step",
                    lhs: slot.value.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (name, g) in grads {
            let slot = store.slot_mut(name).expect("validated above");
            if !slot.trainable {
                continue;
            }
            let n = g.len();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let w = slot.value.data_mut();
            for i in 0..n {
                let gi = g.data()[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                w[i] -= lr * weight_decay * w[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// First and second moment estimates for a slot, if it has been stepped.
    pub fn moments(&self, name: &str) -> Option<(Array, Array)> {
        let m = self.m.get(name)?;
        let v = self.v.get(name)?;
        Some((Array::vector(m.clone()), Array::vector(v.clone())))
    }
}
