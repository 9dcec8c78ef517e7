//! Three-branch multimodal classifier over privacy-preserving features.
//!
//! A video transformer encodes body-mesh raster clips as tubelet tokens, a
//! residual 3-D CNN encodes colorized optical flow, and a stacked LSTM
//! encodes skeleton sequences. Cross-attention fuses the three features into
//! one vector that independent heads score for 11-way action classification
//! and binary ASD classification, trained jointly with a weighted
//! cross-entropy sum on a reverse-mode tape.

mod cnn3d;
mod config;
mod error;
mod fusion;
mod lstm;
mod model;
mod params;
mod vivit;

pub use cnn3d::{cnn3d_encode, init_bn_states, BnUpdate, Mode};
pub use config::{Cnn3dConfig, FusionConfig, LstmConfig, ModelConfig, ViViTConfig};
pub use error::{ModelError, Result};
pub use fusion::{classify, combined_loss, fuse};
pub use lstm::lstm_encode;
pub use model::{adapt_sample, ForwardPass, Model, ModelInput};
pub use params::{init_params, param_specs, Init, ParamBinder};
pub use vivit::{tubelet_embed, vivit_encode, LAYER_NORM_EPS};
