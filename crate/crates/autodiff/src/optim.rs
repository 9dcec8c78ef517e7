//! First-order optimizers over named parameter stores.

use std::collections::BTreeMap;

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Gradients keyed by parameter name. BTreeMap keeps iteration (and thus
/// update order) deterministic.
pub type GradMap = BTreeMap<String, Vec<f64>>;

/// Adam with bias correction. Moment buffers are allocated lazily per
/// parameter on first use.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Apply one update. Every parameter must have a gradient entry of the
    /// same length; a missing or misshapen entry is a usage error so silent
    /// partial updates cannot happen.
    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor>, grads: &GradMap) -> Result<()> {
        for name in grads.keys() {
            if !params.contains_key(name) {
                return Err(AutodiffError::Usage(format!("gradient for unknown parameter {name}")));
            }
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (name, tensor) in params.iter_mut() {
            let Some(grad) = grads.get(name) else {
                return Err(AutodiffError::Usage(format!("missing gradient for parameter {name}")));
            };
            if grad.len() != tensor.numel() {
                return Err(AutodiffError::dim("adam", tensor.shape(), &[grad.len()]));
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; grad.len()]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; grad.len()]);
            let data = tensor.data_mut();
            for i in 0..grad.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / b1t;
                let v_hat = v[i] / b2t;
                data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(vals: &[(&str, Vec<f64>)]) -> BTreeMap<String, Tensor> {
        vals.iter()
            .map(|(n, v)| (n.to_string(), Tensor::new(vec![v.len()], v.clone()).unwrap()))
            .collect()
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr * sign(grad) up to eps.
        let mut params = store(&[("w", vec![1.0, -2.0])]);
        let mut grads = GradMap::new();
        grads.insert("w".into(), vec![0.5, -0.25]);
        let mut opt = Adam::new(0.1);
        opt.step(&mut params, &grads).unwrap();
        let w = params["w"].data();
        assert!((w[0] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((w[1] - (-2.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn quadratic_converges() {
        // Minimize (w - 3)^2 by feeding its gradient.
        let mut params = store(&[("w", vec![0.0])]);
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let w = params["w"].data()[0];
            let mut grads = GradMap::new();
            grads.insert("w".into(), vec![2.0 * (w - 3.0)]);
            opt.step(&mut params, &grads).unwrap();
        }
        assert!((params["w"].data()[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn missing_gradient_is_rejected() {
        let mut params = store(&[("a", vec![0.0]), ("b", vec![0.0])]);
        let mut grads = GradMap::new();
        grads.insert("a".into(), vec![1.0]);
        let mut opt = Adam::new(0.1);
        assert!(opt.step(&mut params, &grads).is_err());
    }
}
