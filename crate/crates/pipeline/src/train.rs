//! Mini-batch training loop: Adam on the weighted two-task loss, with
//! optional rotation augmentation of the training split and a per-epoch
//! history of loss and accuracy.

use std::fs;
use std::path::Path;

use mmkit_autodiff::{Adam, GradMap, Graph};
use mmkit_data::{augment_sample, Sample, ACTION_CLASSES, AUGMENT_ANGLES};
use mmkit_model::{adapt_sample, Mode, Model, ModelInput};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Knobs of one training run. `learning_rate` may be zero (a no-op run);
/// everything else must be positive and the betas must sit in [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Passes over the training split.
    pub epochs: usize,
    /// Samples per optimizer step; the trailing batch may be smaller.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Seeds the epoch shuffles.
    pub seed: u64,
    /// Expand each training sample with the four rotation angles.
    pub augment: bool,
    /// Weight of the action-classification loss term.
    pub w_action: f64,
    /// Weight of the ASD-classification loss term.
    pub w_asd: f64,
    /// Fraction of each stratum assigned to the training split.
    pub split_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 4,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            augment: false,
            w_action: 0.5,
            w_asd: 0.5,
            split_ratio: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(PipelineError::config("train config", msg));
        if self.epochs == 0 {
            return err("epochs must be positive".to_string());
        }
        if self.batch_size == 0 {
            return err("batch_size must be positive".to_string());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return err(format!("learning_rate {} must be finite and non-negative", self.learning_rate));
        }
        for (name, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !value.is_finite() || !(0.0..1.0).contains(&value) {
                return err(format!("{name} {value} must lie in [0, 1)"));
            }
        }
        if !self.adam_eps.is_finite() || self.adam_eps <= 0.0 {
            return err(format!("adam_eps {} must be positive", self.adam_eps));
        }
        for (name, value) in [("w_action", self.w_action), ("w_asd", self.w_asd)] {
            if !value.is_finite() || value < 0.0 {
                return err(format!("{name} {value} must be finite and non-negative"));
            }
        }
        if !self.split_ratio.is_finite() || self.split_ratio <= 0.0 || self.split_ratio >= 1.0 {
            return err(format!("split_ratio {} must lie strictly between 0 and 1", self.split_ratio));
        }
        Ok(())
    }
}

/// One epoch's aggregates, evaluated over every training input with the
/// parameters as they stand at the end of the epoch. (A running mean taken
/// during the epoch would mix losses from different parameter states and
/// reads high while the optimizer's moment estimates are still warming up.)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    pub action_accuracy: f64,
    pub asd_accuracy: f64,
}

/// Record of a completed training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Training inputs per epoch after augmentation.
    pub train_inputs: usize,
    pub warnings: Vec<String>,
}

pub fn write_history(path: &Path, history: &History) -> Result<()> {
    let json = serde_json::to_string_pretty(history).expect("history serialize");
    fs::write(path, json)?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<History> {
    serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| PipelineError::format(path.display(), e.to_string()))
}

/// A training instance already shaped for the model.
struct Instance {
    input: ModelInput,
    action: usize,
    asd: usize,
}

/// Train `model` on `train` in place. Augmented copies (when enabled) are
/// derived here and never written back, so the caller's samples are
/// untouched. A non-finite loss aborts with the epoch and batch that
/// produced it; otherwise the returned history has one record per epoch.
pub fn train_loop(model: &mut Model, train: &[Sample], cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(PipelineError::input("train_loop", "training split is empty".to_string()));
    }

    let mut warnings = Vec::new();
    let mut class_seen = [false; ACTION_CLASSES];
    for sample in train {
        class_seen[sample.action_label] = true;
    }
    for (class, seen) in class_seen.iter().enumerate() {
        if !seen {
            warnings.push(format!("action class {class} has no samples in the training split"));
        }
    }

    // Shape every instance up front; augmented full-size copies are dropped
    // as soon as their model-sized inputs exist.
    let mut instances = Vec::new();
    for sample in train {
        instances.push(Instance {
            input: adapt_sample(model.config(), sample)?,
            action: sample.action_label,
            asd: sample.asd_label,
        });
        if cfg.augment {
            for angle in AUGMENT_ANGLES {
                let rotated = augment_sample(sample, angle);
                instances.push(Instance {
                    input: adapt_sample(model.config(), &rotated)?,
                    action: rotated.action_label,
                    asd: rotated.asd_label,
                });
            }
        }
    }

    let mut fusion = model.config().fusion.clone();
    fusion.w_action = cfg.w_action;
    fusion.w_asd = cfg.w_asd;

    let mut adam = Adam::new(cfg.learning_rate);
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.adam_eps;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut batches = 0;

        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            batches = batch_index + 1;
            let mut accumulated = GradMap::new();
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let instance = &instances[idx];
                let mut g = Graph::new();
                let pass = model.forward(&mut g, &instance.input, Mode::Train)?;
                let loss = mmkit_model::combined_loss(
                    &mut g,
                    &fusion,
                    pass.action_logits,
                    pass.asd_logits,
                    instance.action,
                    instance.asd,
                )?;
                let loss_value = g.value(loss);
                if !loss_value.is_finite() {
                    return Err(PipelineError::Diverged { epoch, batch: batch_index + 1 });
                }
                g.backward(loss)?;
                for (name, grad) in pass.binder.grads(&g) {
                    let slot = accumulated.entry(name).or_insert_with(|| vec![0.0; grad.len()]);
                    for (acc, g) in slot.iter_mut().zip(&grad) {
                        *acc += scale * g;
                    }
                }
                model.apply_bn_updates(&pass.bn_updates)?;
            }
            adam.step(model.params_mut(), &accumulated)?;
        }

        // End-of-epoch evaluation over every training input; batch statistics
        // are observed but not folded back in.
        let mut loss_sum = 0.0;
        let mut action_hits = 0usize;
        let mut asd_hits = 0usize;
        for instance in &instances {
            let mut g = Graph::new();
            let pass = model.forward(&mut g, &instance.input, Mode::Train)?;
            let loss = mmkit_model::combined_loss(
                &mut g,
                &fusion,
                pass.action_logits,
                pass.asd_logits,
                instance.action,
                instance.asd,
            )?;
            let loss_value = g.value(loss);
            if !loss_value.is_finite() {
                // The last optimizer step of the epoch pushed the parameters
                // out of the finite range.
                return Err(PipelineError::Diverged { epoch, batch: batches });
            }
            loss_sum += loss_value;
            if argmax(g.data(pass.action_logits)) == instance.action {
                action_hits += 1;
            }
            if argmax(g.data(pass.asd_logits)) == instance.asd {
                asd_hits += 1;
            }
        }

        let total = instances.len() as f64;
        epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / total,
            action_accuracy: action_hits as f64 / total,
            asd_accuracy: asd_hits as f64 / total,
        });
    }

    Ok(History { epochs, train_inputs: instances.len(), warnings })
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
