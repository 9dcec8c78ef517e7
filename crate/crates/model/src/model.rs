use std::collections::BTreeMap;
use std::path::Path;

use mmkit_autodiff::{load_checkpoint, save_checkpoint, BatchNormState, Graph, Tensor, Var};
use mmkit_data::{
    resize_clip, sample_frames, sample_indices, standardize_skeleton, Clip, Sample, SkeletonSequence,
};
use serde::{Deserialize, Serialize};

use crate::cnn3d::{cnn3d_encode, init_bn_states, BnUpdate, Mode};
use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::fusion::{classify, combined_loss, fuse};
use crate::lstm::lstm_encode;
use crate::params::{init_params, ParamBinder};
use crate::vivit::vivit_encode;

/// One sample's three modalities: the body-mesh raster clip for the
/// transformer branch (subsampled to its frame budget on entry), the
/// colorized optical-flow clip for the CNN branch, and the standardized
/// skeleton sequence for the LSTM branch.
#[derive(Debug, Clone)]
pub struct ModelInput {
    pub mesh: Clip,
    pub flow: Clip,
    pub skeleton: SkeletonSequence,
}

/// Shape a preprocessed sample to a configuration's input geometry: the mesh
/// clip is subsampled to the transformer's frame budget and resized to its
/// spatial side, the flow clip is subsampled to the CNN's frame budget, and
/// the skeleton is standardized then subsampled to the LSTM's frame count.
/// Checkpoints carry the configuration, so a loaded model shapes inputs the
/// same way the training run did.
pub fn adapt_sample(cfg: &ModelConfig, sample: &Sample) -> Result<ModelInput> {
    let mesh = resize_clip(
        &sample_frames(&sample.mesh_clip, cfg.vivit.frames),
        cfg.vivit.side,
        cfg.vivit.side,
    );
    let flow = sample_frames(&sample.flow_clip, cfg.cnn.frames);
    let standardized = standardize_skeleton(&sample.skeleton);
    let per = standardized.joints() * 3;
    let mut rows = Vec::with_capacity(cfg.lstm.frames * per);
    for idx in sample_indices(standardized.frames(), cfg.lstm.frames) {
        rows.extend_from_slice(&standardized.data()[idx * per..(idx + 1) * per]);
    }
    let skeleton = SkeletonSequence::new(cfg.lstm.frames, standardized.joints(), rows)?;
    Ok(ModelInput { mesh, flow, skeleton })
}

/// Everything one forward pass produced: logits for both tasks, the fused
/// feature, every attention matrix (transformer blocks first, fusion last),
/// pending batch-norm updates, and the binder that maps parameter names to
/// graph leaves for gradient harvesting.
pub struct ForwardPass {
    pub action_logits: Var,
    pub asd_logits: Var,
    pub fused: Var,
    pub attention: Vec<Var>,
    pub bn_updates: Vec<BnUpdate>,
    pub binder: ParamBinder,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    config: ModelConfig,
    seed: u64,
    bn_initialized: BTreeMap<String, bool>,
}

const MANIFEST_FILE: &str = "model.json";

/// Three-branch multimodal classifier: transformer over mesh tubelets,
/// residual 3-D CNN over optical flow, stacked LSTM over skeletons, fused by
/// cross-attention into action (11-way) and ASD (binary) heads.
pub struct Model {
    config: ModelConfig,
    params: BTreeMap<String, Tensor>,
    bn: BTreeMap<String, BatchNormState>,
    seed: u64,
}

impl Model {
    /// Fresh model with seed-determined parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, seed);
        let bn = init_bn_states(&config.cnn);
        Ok(Model { config, params, bn, seed })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut BTreeMap<String, Tensor> {
        &mut self.params
    }

    /// True once every normalization layer has seen at least one train batch
    /// (or been restored from a checkpoint that had).
    pub fn bn_ready(&self) -> bool {
        self.bn.values().all(|s| s.initialized())
    }

    /// Run the three branches, fuse, and classify. Train mode normalizes with
    /// batch statistics and reports them in `bn_updates`; eval mode uses the
    /// stored running statistics and needs them initialized.
    pub fn forward(&self, g: &mut Graph, input: &ModelInput, mode: Mode) -> Result<ForwardPass> {
        let mesh = sample_frames(&input.mesh, self.config.vivit.frames);
        let mut binder = ParamBinder::new();
        let (f_vivit, mut attention) =
            vivit_encode(g, &mut binder, &self.params, &self.config.vivit, &mesh)?;
        let (f_cnn, bn_updates) =
            cnn3d_encode(g, &mut binder, &self.params, &self.bn, &self.config.cnn, &input.flow, mode)?;
        let f_lstm = lstm_encode(g, &mut binder, &self.params, &self.config.lstm, &input.skeleton)?;
        let (fused, fusion_attention) =
            fuse(g, &mut binder, &self.params, &self.config.fusion, f_vivit, f_cnn, f_lstm)?;
        attention.extend(fusion_attention);
        let (action_logits, asd_logits) = classify(g, &mut binder, &self.params, fused)?;
        Ok(ForwardPass { action_logits, asd_logits, fused, attention, bn_updates, binder })
    }

    /// Weighted two-task loss for a forward pass.
    pub fn loss(&self, g: &mut Graph, pass: &ForwardPass, action_label: usize, asd_label: usize) -> Result<Var> {
        combined_loss(g, &self.config.fusion, pass.action_logits, pass.asd_logits, action_label, asd_label)
    }

    /// Fold the batch statistics from a train-mode pass into the running
    /// averages, in the order the pass recorded them.
    pub fn apply_bn_updates(&mut self, updates: &[BnUpdate]) -> Result<()> {
        for update in updates {
            let state = self
                .bn
                .get_mut(&update.name)
                .ok_or_else(|| ModelError::State(format!("batch-norm state {} is missing", update.name)))?;
            state.apply(&update.stats);
        }
        Ok(())
    }

    /// Write the model to a directory: every parameter and batch-norm running
    /// statistic as a tensor file, plus a JSON manifest with the
    /// configuration, the seed, and each norm layer's initialized flag.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut combined = self.params.clone();
        for (name, state) in &self.bn {
            let (mean, var) = state.running();
            let c = state.channels();
            combined.insert(format!("bn.{name}.mean"), Tensor::new(vec![c], mean.to_vec())?);
            combined.insert(format!("bn.{name}.var"), Tensor::new(vec![c], var.to_vec())?);
        }
        save_checkpoint(dir, &combined)?;
        let manifest = ModelManifest {
            config: self.config.clone(),
            seed: self.seed,
            bn_initialized: self.bn.iter().map(|(k, v)| (k.clone(), v.initialized())).collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| ModelError::format(dir.display(), format!("manifest encode: {e}")))?;
        std::fs::write(dir.join(MANIFEST_FILE), json)?;
        Ok(())
    }

    /// Read a model saved by [`Model::save`]. Every parameter and statistic
    /// the configuration calls for must be present with the right shape.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let json = std::fs::read_to_string(&manifest_path)?;
        let manifest: ModelManifest = serde_json::from_str(&json)
            .map_err(|e| ModelError::format(manifest_path.display(), format!("manifest parse: {e}")))?;
        manifest.config.validate()?;
        let combined = load_checkpoint(dir)?;

        let mut params = BTreeMap::new();
        for (name, shape, _) in crate::params::param_specs(&manifest.config) {
            let tensor = combined
                .get(&name)
                .ok_or_else(|| ModelError::format(dir.display(), format!("parameter {name} is missing")))?;
            if tensor.shape() != shape.as_slice() {
                return Err(ModelError::format(
                    dir.display(),
                    format!("parameter {name} has shape {:?}, expected {shape:?}", tensor.shape()),
                ));
            }
            params.insert(name, tensor.clone());
        }

        let mut bn = init_bn_states(&manifest.config.cnn);
        for (name, state) in bn.iter_mut() {
            let initialized = *manifest.bn_initialized.get(name).ok_or_else(|| {
                ModelError::format(dir.display(), format!("norm layer {name} is missing from the manifest"))
            })?;
            let mean = combined
                .get(&format!("bn.{name}.mean"))
                .ok_or_else(|| ModelError::format(dir.display(), format!("bn.{name}.mean is missing")))?;
            let var = combined
                .get(&format!("bn.{name}.var"))
                .ok_or_else(|| ModelError::format(dir.display(), format!("bn.{name}.var is missing")))?;
            state.restore(mean.data().to_vec(), var.data().to_vec(), initialized)?;
        }

        Ok(Model { config: manifest.config, params, bn, seed: manifest.seed })
    }

}
