//! Reverse-mode automatic differentiation over dense f64 tensors, plus the
//! layer primitives (attention, LSTM cell, batch norm, Adam) the multimodal
//! model is assembled from.
//!
//! A [`Graph`] records one forward pass; [`Graph::backward`] replays it in
//! reverse and deposits gradients on every tensor that requires them. Graphs
//! are cheap and meant to be discarded after each step.

mod attention;
mod error;
mod gradcheck;
mod graph;
mod io;
mod nn;
mod optim;
mod recurrent;
mod tensor;
mod volume;

pub use attention::{multi_head_attention, AttentionWeights};
pub use error::{AutodiffError, Result};
pub use gradcheck::grad_check;
pub use graph::{Activation, BnBatchStats, BnMode, Graph, Var};
pub use io::{load_checkpoint, read_tensor, save_checkpoint, write_tensor};
pub use nn::BatchNormState;
pub use optim::{Adam, GradMap};
pub use recurrent::{lstm_step, LstmWeights};
pub use tensor::{Parameter, Tensor};
pub use volume::conv_out_extent;
