//! Independent-mode training: one model instance per task, each trained
//! with the other task's loss weight at zero, so the two classification
//! problems are learned in isolation from identical initializations.

use mmkit_data::Sample;
use mmkit_model::{Model, ModelConfig};

use crate::error::Result;
use crate::eval::evaluate;
use crate::metrics::EvalReport;
use crate::train::{train_loop, History, TrainConfig};

/// One task's trained model with its history and held-out report. The
/// report covers both heads; only the trained task's half is meaningful.
pub struct IndependentRun {
    pub model: Model,
    pub history: History,
    pub report: EvalReport,
}

pub struct IndependentOutcome {
    pub action: IndependentRun,
    pub asd: IndependentRun,
}

/// Train and evaluate the two tasks independently. Both models start from
/// `Model::new(config, seed)`; the runs differ from a joint run only in the
/// loss weights, which silence the inactive head's gradient entirely.
pub fn independent_mode(
    config: &ModelConfig,
    train: &[Sample],
    test: &[Sample],
    base: &TrainConfig,
    seed: u64,
) -> Result<IndependentOutcome> {
    let action_cfg = TrainConfig { w_action: 1.0, w_asd: 0.0, ..base.clone() };
    let asd_cfg = TrainConfig { w_action: 0.0, w_asd: 1.0, ..base.clone() };

    let mut action_model = Model::new(config.clone(), seed)?;
    let action_history = train_loop(&mut action_model, train, &action_cfg)?;
    let action_report = evaluate(&action_model, test)?;

    let mut asd_model = Model::new(config.clone(), seed)?;
    let asd_history = train_loop(&mut asd_model, train, &asd_cfg)?;
    let asd_report = evaluate(&asd_model, test)?;

    Ok(IndependentOutcome {
        action: IndependentRun { model: action_model, history: action_history, report: action_report },
        asd: IndependentRun { model: asd_model, history: asd_history, report: asd_report },
    })
}
