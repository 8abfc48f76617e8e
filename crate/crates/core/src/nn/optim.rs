use serde::{Deserialize, Serialize};

use super::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// Adam with bias correction. Frozen tensors are skipped entirely: their
/// values and moments stay bitwise unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn step(&self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![store.len()],
                actual: vec![grads.len()],
            });
        }
        for (p, g) in store.iter().zip(grads.tensors()) {
            g.ensure_shape(p.value.shape())?;
        }
        let t = store.increment_step() as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (p, g) in store.iter_mut().zip(grads.tensors()) {
            if !p.trainable {
                continue;
            }
            let value = p.value.data_mut();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            for (((x, m), v), g) in value.iter_mut().zip(m).zip(v).zip(g.data()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
