use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Video transformer branch. The input clip is cut into non-overlapping
/// tubelet x patch x patch blocks, each flattened and projected to the
/// embedding width, so frames must divide by `tubelet` and both spatial
/// extents by `patch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViViTConfig {
    /// Frames per tubelet.
    pub tubelet: usize,
    /// Spatial patch side in pixels.
    pub patch: usize,
    /// Embedding width.
    pub d: usize,
    /// Self-attention heads per block.
    pub heads: usize,
    /// Encoder block count.
    pub blocks: usize,
    /// Feed-forward expansion factor.
    pub mlp_ratio: usize,
    /// Frames the branch consumes; longer inputs are subsampled to this.
    pub frames: usize,
    /// Spatial side the branch consumes.
    pub side: usize,
}

impl Default for ViViTConfig {
    fn default() -> Self {
        ViViTConfig { tubelet: 2, patch: 10, d: 192, heads: 12, blocks: 4, mlp_ratio: 2, frames: 20, side: 100 }
    }
}

/// Residual 3-D convolution branch over the optical-flow clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn3dConfig {
    /// Stem output channels.
    pub stem: usize,
    /// Output channels of the four residual stages.
    pub stages: [usize; 4],
    /// Residual blocks per stage; the first block of each stage downsamples.
    pub blocks_per_stage: usize,
    /// Frames the branch consumes; sample adaptation subsamples to this.
    pub frames: usize,
}

impl Default for Cnn3dConfig {
    fn default() -> Self {
        Cnn3dConfig { stem: 16, stages: [16, 32, 64, 128], blocks_per_stage: 1, frames: 40 }
    }
}

/// Stacked LSTM branch over the skeleton sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    /// Stacked layer count.
    pub layers: usize,
    /// Hidden width per layer.
    pub hidden: usize,
    /// Per-frame input width (joints x 3 coordinates).
    pub input_dim: usize,
    /// Frames the branch consumes; inputs must match exactly.
    pub frames: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig { layers: 4, hidden: 64, input_dim: 99, frames: 180 }
    }
}

/// Cross-attention fusion of the three branch features and loss weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Shared feature width every branch projects to.
    pub d_f: usize,
    /// Cross-attention heads.
    pub heads: usize,
    /// Weight of the action-classification loss term.
    pub w_action: f64,
    /// Weight of the ASD-classification loss term.
    pub w_asd: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { d_f: 128, heads: 8, w_action: 0.5, w_asd: 0.5 }
    }
}

/// Full three-branch model configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vivit: ViViTConfig,
    pub cnn: Cnn3dConfig,
    pub lstm: LstmConfig,
    pub fusion: FusionConfig,
}

impl ModelConfig {
    /// Shrunken preset for fast tests: same topology, tiny widths.
    /// Mesh input is 4 frames of 20x20, skeleton input 8 frames of 4 joints.
    pub fn micro() -> Self {
        ModelConfig {
            vivit: ViViTConfig { tubelet: 2, patch: 10, d: 24, heads: 12, blocks: 2, mlp_ratio: 2, frames: 4, side: 20 },
            cnn: Cnn3dConfig { stem: 4, stages: [4, 8, 16, 32], blocks_per_stage: 1, frames: 8 },
            lstm: LstmConfig { layers: 2, hidden: 16, input_dim: 12, frames: 8 },
            fusion: FusionConfig { d_f: 16, heads: 8, w_action: 0.5, w_asd: 0.5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.vivit;
        for (name, value) in [
            ("vivit.tubelet", v.tubelet),
            ("vivit.patch", v.patch),
            ("vivit.d", v.d),
            ("vivit.heads", v.heads),
            ("vivit.blocks", v.blocks),
            ("vivit.mlp_ratio", v.mlp_ratio),
            ("vivit.frames", v.frames),
            ("vivit.side", v.side),
            ("cnn.stem", self.cnn.stem),
            ("cnn.blocks_per_stage", self.cnn.blocks_per_stage),
            ("cnn.frames", self.cnn.frames),
            ("lstm.layers", self.lstm.layers),
            ("lstm.hidden", self.lstm.hidden),
            ("lstm.input_dim", self.lstm.input_dim),
            ("lstm.frames", self.lstm.frames),
            ("fusion.d_f", self.fusion.d_f),
            ("fusion.heads", self.fusion.heads),
        ] {
            if value == 0 {
                return Err(ModelError::config("validate", format!("{name} must be positive")));
            }
        }
        for (i, &c) in self.cnn.stages.iter().enumerate() {
            if c == 0 {
                return Err(ModelError::config("validate", format!("cnn.stages[{i}] must be positive")));
            }
        }
        if v.d % v.heads != 0 {
            return Err(ModelError::config(
                "validate",
                format!("embedding width {} is not divisible by head count {}", v.d, v.heads),
            ));
        }
        if v.frames % v.tubelet != 0 {
            return Err(ModelError::config(
                "validate",
                format!("frame axis {} is not divisible by tubelet size {}", v.frames, v.tubelet),
            ));
        }
        if v.side % v.patch != 0 {
            return Err(ModelError::config(
                "validate",
                format!("spatial side {} is not divisible by patch size {}", v.side, v.patch),
            ));
        }
        if self.fusion.d_f % self.fusion.heads != 0 {
            return Err(ModelError::config(
                "validate",
                format!("fused width {} is not divisible by head count {}", self.fusion.d_f, self.fusion.heads),
            ));
        }
        for (name, w) in [("fusion.w_action", self.fusion.w_action), ("fusion.w_asd", self.fusion.w_asd)] {
            if !w.is_finite() || w < 0.0 {
                return Err(ModelError::config("validate", format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}
