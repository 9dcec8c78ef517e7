//! Stateful layer helpers that sit on top of the graph ops.

use crate::error::{AutodiffError, Result};
use crate::graph::{BnBatchStats, BnMode, Graph, Var};

/// Running-statistics side of batch normalization. The learned gamma/beta
/// live with the model's other parameters; this tracks the exponential
/// moving average used at eval time.
///
/// Stats start at (mean 0, var 1) but are considered uninitialized until the
/// first recorded batch; eval before that is a state error.
#[derive(Clone, Debug)]
pub struct BatchNormState {
    channels: usize,
    pub eps: f64,
    pub momentum: f64,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    initialized: bool,
}

impl BatchNormState {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            channels,
            eps: 1e-5,
            momentum: 0.1,
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            initialized: false,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn initialized(&self) -> bool {
        self.initialized
    }

    pub fn running(&self) -> (&[f64], &[f64]) {
        (&self.running_mean, &self.running_var)
    }

    /// Reinstate stats saved in a checkpoint.
    pub fn restore(&mut self, mean: Vec<f64>, var: Vec<f64>, initialized: bool) -> Result<()> {
        if mean.len() != self.channels || var.len() != self.channels {
            return Err(AutodiffError::dim("batch_norm", &[self.channels], &[mean.len()]));
        }
        self.running_mean = mean;
        self.running_var = var;
        self.initialized = initialized;
        Ok(())
    }

    /// Normalize by batch statistics and hand them back so the caller can
    /// fold them into the running average once the batch commits.
    pub fn forward_train(
        &self,
        g: &mut Graph,
        x: Var,
        gamma: Var,
        beta: Var,
    ) -> Result<(Var, BnBatchStats)> {
        let (out, stats) = g.batch_norm(x, gamma, beta, self.eps, BnMode::Train)?;
        Ok((out, stats.expect("train mode returns stats")))
    }

    pub fn forward_eval(&self, g: &mut Graph, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        if !self.initialized {
            return Err(AutodiffError::State(
                "batch_norm eval requested before any training batch initialized running stats".into(),
            ));
        }
        let mode = BnMode::Eval { mean: self.running_mean.clone(), var: self.running_var.clone() };
        let (out, _) = g.batch_norm(x, gamma, beta, self.eps, mode)?;
        Ok(out)
    }

    /// Exponential moving average update from one observed batch.
    pub fn apply(&mut self, stats: &BnBatchStats) {
        debug_assert_eq!(stats.mean.len(), self.channels);
        let m = self.momentum;
        for c in 0..self.channels {
            self.running_mean[c] = (1.0 - m) * self.running_mean[c] + m * stats.mean[c];
            self.running_var[c] = (1.0 - m) * self.running_var[c] + m * stats.var[c];
        }
        self.initialized = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn eval_before_train_is_state_error() {
        let bn = BatchNormState::new(2);
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(vec![2, 1, 2, 2]));
        let gamma = g.constant(Tensor::full(vec![2], 1.0));
        let beta = g.constant(Tensor::zeros(vec![2]));
        let err = bn.forward_eval(&mut g, x, gamma, beta).unwrap_err();
        assert!(matches!(err, AutodiffError::State(_)));
    }

    #[test]
    fn ema_moves_toward_batch_stats() {
        let mut bn = BatchNormState::new(1);
        let stats = BnBatchStats { mean: vec![10.0], var: vec![4.0] };
        bn.apply(&stats);
        let (m, v) = bn.running();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!((v[0] - 1.3).abs() < 1e-12);
        assert!(bn.initialized());
        for _ in 0..200 {
            bn.apply(&stats);
        }
        let (m, v) = bn.running();
        assert!((m[0] - 10.0).abs() < 1e-6);
        assert!((v[0] - 4.0).abs() < 1e-6);
    }
}
