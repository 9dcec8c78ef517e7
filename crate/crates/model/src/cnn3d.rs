use std::collections::BTreeMap;

use mmkit_autodiff::{BatchNormState, BnBatchStats, Graph, Tensor, Var};
use mmkit_data::Clip;

use crate::config::Cnn3dConfig;
use crate::error::{ModelError, Result};
use crate::params::ParamBinder;

/// Whether a forward pass normalizes with batch statistics (and reports them
/// for the running averages) or with the stored running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Batch statistics observed by one normalization layer during a train-mode
/// pass, to be folded into its running averages after the step.
#[derive(Debug, Clone)]
pub struct BnUpdate {
    pub name: String,
    pub stats: BnBatchStats,
}

fn batch_norm(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    bn: &BTreeMap<String, BatchNormState>,
    name: &str,
    x: Var,
    mode: Mode,
    updates: &mut Vec<BnUpdate>,
) -> Result<Var> {
    let gamma = binder.bind(g, params, &format!("{name}.g"))?;
    let beta = binder.bind(g, params, &format!("{name}.b"))?;
    let state = bn
        .get(name)
        .ok_or_else(|| ModelError::State(format!("batch-norm state {name} is missing from the model")))?;
    match mode {
        Mode::Train => {
            let (out, stats) = state.forward_train(g, x, gamma, beta)?;
            updates.push(BnUpdate { name: name.to_string(), stats });
            Ok(out)
        }
        Mode::Eval => Ok(state.forward_eval(g, x, gamma, beta)?),
    }
}

/// Residual 3-D CNN over the optical-flow clip: a stride-(1,2,2) stem with
/// norm, relu, and a 2x2x2 max pool, then four residual stages whose first
/// block downsamples by (2,2,2) through both the conv path and a 1x1x1
/// projection shortcut; later blocks keep shape and use identity shortcuts.
/// Global average pooling and a linear map produce the shared feature width.
///
/// Train mode requires every normalized volume to keep at least two elements
/// per channel, which holds for the 100x100 crop contract but not for
/// arbitrarily small inputs.
pub fn cnn3d_encode(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    bn: &BTreeMap<String, BatchNormState>,
    cfg: &Cnn3dConfig,
    clip: &Clip,
    mode: Mode,
) -> Result<(Var, Vec<BnUpdate>)> {
    if clip.channels() != 3 {
        return Err(ModelError::input(
            "cnn3d_encode",
            format!("flow clip must have 3 channels, got {}", clip.channels()),
        ));
    }
    let (f, c, h, w) = (clip.frames(), clip.channels(), clip.height(), clip.width());
    let mut volume = Vec::with_capacity(c * f * h * w);
    for cc in 0..c {
        for ff in 0..f {
            volume.extend_from_slice(clip.plane(ff, cc));
        }
    }
    let mut x = g.constant(Tensor::new(vec![c, f, h, w], volume)?);
    let mut updates = Vec::new();

    let stem_w = binder.bind(g, params, "cnn.stem.conv.w")?;
    x = g.conv3d(x, stem_w, [1, 2, 2], [1, 1, 1])?;
    x = batch_norm(g, binder, params, bn, "cnn.stem.bn", x, mode, &mut updates)?;
    x = g.relu(x);
    x = g.max_pool3d(x, [2, 2, 2], [2, 2, 2])?;

    for i in 0..cfg.stages.len() {
        for b in 0..cfg.blocks_per_stage {
            let prefix = format!("cnn.s{i}.b{b}");
            let stride = if b == 0 { [2, 2, 2] } else { [1, 1, 1] };
            let input = x;
            let w1 = binder.bind(g, params, &format!("{prefix}.conv1.w"))?;
            let mut y = g.conv3d(input, w1, stride, [1, 1, 1])?;
            y = batch_norm(g, binder, params, bn, &format!("{prefix}.bn1"), y, mode, &mut updates)?;
            y = g.relu(y);
            let w2 = binder.bind(g, params, &format!("{prefix}.conv2.w"))?;
            y = g.conv3d(y, w2, [1, 1, 1], [1, 1, 1])?;
            y = batch_norm(g, binder, params, bn, &format!("{prefix}.bn2"), y, mode, &mut updates)?;
            let shortcut = if b == 0 {
                let pw = binder.bind(g, params, &format!("{prefix}.proj.w"))?;
                g.conv3d(input, pw, [2, 2, 2], [0, 0, 0])?
            } else {
                input
            };
            let summed = g.add(y, shortcut)?;
            x = g.relu(summed);
        }
    }

    let pooled = g.global_avg_pool(x)?;
    let out_w = binder.bind(g, params, "cnn.out.w")?;
    let out_b = binder.bind(g, params, "cnn.out.b")?;
    let feature = g.linear(pooled, out_w, out_b)?;
    Ok((feature, updates))
}

/// Fresh running-statistics states for every normalization layer in the
/// configuration, keyed by the same names the forward pass uses.
pub fn init_bn_states(cfg: &Cnn3dConfig) -> BTreeMap<String, BatchNormState> {
    let mut bn = BTreeMap::new();
    bn.insert("cnn.stem.bn".to_string(), BatchNormState::new(cfg.stem));
    for (i, &out_ch) in cfg.stages.iter().enumerate() {
        for b in 0..cfg.blocks_per_stage {
            bn.insert(format!("cnn.s{i}.b{b}.bn1"), BatchNormState::new(out_ch));
            bn.insert(format!("cnn.s{i}.b{b}.bn2"), BatchNormState::new(out_ch));
        }
    }
    bn
}
