//! Dense optical flow for privacy-preserving motion features.
//!
//! The estimator follows the polynomial expansion approach: every pixel
//! neighborhood is fitted with a quadratic surface, and displacement falls
//! out of how the quadratic coefficients move between two frames. A scale
//! pyramid handles motion larger than the fitting window, and `colorize`
//! renders fields as HSV wheels for downstream models that consume RGB.

mod colorize;
mod error;
mod flow;
mod gray;
mod poly;

pub use colorize::{colorize, max_magnitude, RgbFrame};
pub use error::{FlowError, Result};
pub use flow::{
    displacement_step, farneback, read_flow, write_flow, FlowConfig, FlowField,
};
pub use gray::{downsample, GrayFrame};
pub use poly::{poly_expansion, PolyExpansion};
