//! Held-out evaluation and single-sample prediction. Both run the model in
//! eval mode, so its normalization statistics must already be initialized
//! (by training or a loaded checkpoint).

use mmkit_autodiff::Graph;
use mmkit_data::{Sample, ACTION_CLASSES};
use mmkit_model::{adapt_sample, Mode, Model};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::metrics::{compute_metrics, EvalReport};
use crate::synth::ACTION_NAMES;
use crate::train::argmax;

/// One sample's predicted labels with the class-probability vectors behind
/// them. Ties in the probabilities resolve to the lowest class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub action: usize,
    pub action_name: String,
    pub asd: bool,
    pub action_probs: Vec<f64>,
    pub asd_probs: Vec<f64>,
}

/// Score `model` on `test`: argmax per task, confusion matrices, accuracy,
/// and macro-F1 over all classes of each task.
pub fn evaluate(model: &Model, test: &[Sample]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(PipelineError::input("evaluate", "test split is empty".to_string()));
    }
    let mut action_truths = Vec::with_capacity(test.len());
    let mut action_preds = Vec::with_capacity(test.len());
    let mut asd_truths = Vec::with_capacity(test.len());
    let mut asd_preds = Vec::with_capacity(test.len());
    for sample in test {
        let prediction = predict_sample(model, sample)?;
        action_truths.push(sample.action_label);
        action_preds.push(prediction.action);
        asd_truths.push(sample.asd_label);
        asd_preds.push(prediction.asd as usize);
    }
    Ok(EvalReport {
        action: compute_metrics(&action_truths, &action_preds, ACTION_CLASSES)?,
        asd: compute_metrics(&asd_truths, &asd_preds, 2)?,
    })
}

/// Predict both labels for one sample; its own labels are ignored.
pub fn predict_sample(model: &Model, sample: &Sample) -> Result<Prediction> {
    let input = adapt_sample(model.config(), sample)?;
    let mut g = Graph::new();
    let pass = model.forward(&mut g, &input, Mode::Eval)?;
    let action_probs = g.softmax(pass.action_logits, 0)?;
    let asd_probs = g.softmax(pass.asd_logits, 0)?;
    let action_probs = g.data(action_probs).to_vec();
    let asd_probs = g.data(asd_probs).to_vec();
    let action = argmax(&action_probs);
    Ok(Prediction {
        action,
        action_name: ACTION_NAMES[action].to_string(),
        asd: argmax(&asd_probs) == 1,
        action_probs,
        asd_probs,
    })
}
