//! End-to-end harness over the modality crates and the model: dataset
//! containers with disk manifests, a balanced synthetic generator, joint
//! (action, ASD)-stratified splitting, the mini-batch training loop,
//! metrics, held-out evaluation, and independent per-task training.

mod dataset;
mod error;
mod eval;
mod independent;
mod metrics;
mod split;
mod synth;
mod train;

pub use dataset::{
    append_sample, dataset_clip_ids, dataset_provenance, read_dataset, read_sample, write_dataset,
    Dataset, Provenance,
};
pub use error::{PipelineError, Result};
pub use eval::{evaluate, predict_sample, Prediction};
pub use independent::{independent_mode, IndependentOutcome, IndependentRun};
pub use metrics::{
    compute_metrics, macro_f1, read_eval_report, write_eval_report, EvalReport, Metrics,
};
pub use split::{split_indices, stratified_split, Split};
pub use synth::{synth_dataset, ACTION_NAMES, ASD_AMPLITUDE_FACTOR};
pub use train::{
    argmax, read_history, train_loop, write_history, EpochRecord, History, TrainConfig,
};
