use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam with `f64` moment accumulators.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Adam {
    pub fn new<T: Scalar>(net: &DenseNet<T>, config: AdamConfig) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Non-finite gradients are rejected before any
    /// parameter or moment is touched.
    pub fn step<T: Scalar>(&mut self, net: &mut DenseNet<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != self.first.len()
            || grads
                .layers
                .iter()
                .zip(&self.first)
                .any(|(g, (m, b))| g.weights.dim() != m.dim() || g.bias.len() != b.len())
        {
            return Err(Error::shape("gradients matching optimizer state", "mismatched gradients"));
        }
        if !grads.all_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient at step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let update = |p: &mut T, g: &T, m: &mut f64, v: &mut f64| {
            let g = g.as_f64();
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = T::cast_from(p.as_f64() - learning_rate * m_hat / (v_hat.sqrt() + epsilon));
        };
        for (((layer, grad), (m_w, m_b)), (v_w, v_b)) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            Zip::from(&mut layer.weights)
                .and(&grad.weights)
                .and(m_w)
                .and(v_w)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&grad.bias)
                .and(m_b)
                .and(v_b)
                .for_each(update);
        }
        Ok(())
    }
}
