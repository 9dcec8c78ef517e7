use std::collections::BTreeMap;

use mmkit_autodiff::{multi_head_attention, Graph, Tensor, Var};

use crate::config::FusionConfig;
use crate::error::{ModelError, Result};
use crate::params::ParamBinder;
use crate::vivit::bind_attention;

/// Cross-attention fusion. The transformer and CNN features form the query
/// and value tokens through one shared projection; the LSTM feature forms the
/// two key tokens through two separate projections. Multi-head cross
/// attention mixes them and the two output tokens are concatenated into one
/// fused vector of twice the shared width. Also returns the per-head
/// attention matrices.
pub fn fuse(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    cfg: &FusionConfig,
    f_vivit: Var,
    f_cnn: Var,
    f_lstm: Var,
) -> Result<(Var, Vec<Var>)> {
    for (name, v) in [("transformer", f_vivit), ("cnn", f_cnn), ("lstm", f_lstm)] {
        if g.shape(v) != [cfg.d_f] {
            return Err(ModelError::input(
                "fuse",
                format!("{name} feature has shape {:?}, expected [{}]", g.shape(v), cfg.d_f),
            ));
        }
    }
    let qv_w = binder.bind(g, params, "fuse.qv.w")?;
    let qv_b = binder.bind(g, params, "fuse.qv.b")?;
    let k1_w = binder.bind(g, params, "fuse.k1.w")?;
    let k1_b = binder.bind(g, params, "fuse.k1.b")?;
    let k2_w = binder.bind(g, params, "fuse.k2.w")?;
    let k2_b = binder.bind(g, params, "fuse.k2.b")?;

    let q1 = g.linear(f_vivit, qv_w, qv_b)?;
    let q2 = g.linear(f_cnn, qv_w, qv_b)?;
    let k1 = g.linear(f_lstm, k1_w, k1_b)?;
    let k2 = g.linear(f_lstm, k2_w, k2_b)?;

    let q1 = g.reshape(q1, vec![1, cfg.d_f])?;
    let q2 = g.reshape(q2, vec![1, cfg.d_f])?;
    let k1 = g.reshape(k1, vec![1, cfg.d_f])?;
    let k2 = g.reshape(k2, vec![1, cfg.d_f])?;
    let qv_seq = g.concat_rows(&[q1, q2])?;
    let k_seq = g.concat_rows(&[k1, k2])?;

    let weights = bind_attention(g, binder, params, "fuse.attn")?;
    let (out, attention) = multi_head_attention(g, qv_seq, k_seq, qv_seq, &weights, cfg.heads)?;
    let fused = g.reshape(out, vec![2 * cfg.d_f])?;
    Ok((fused, attention))
}

/// Independent affine heads over the fused vector: 11 action logits and 2
/// ASD logits with no shared parameters.
pub fn classify(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    fused: Var,
) -> Result<(Var, Var)> {
    let aw = binder.bind(g, params, "head.action.w")?;
    let ab = binder.bind(g, params, "head.action.b")?;
    let action = g.linear(fused, aw, ab)?;
    let sw = binder.bind(g, params, "head.asd.w")?;
    let sb = binder.bind(g, params, "head.asd.b")?;
    let asd = g.linear(fused, sw, sb)?;
    Ok((action, asd))
}

/// Weighted sum of the two cross-entropy terms:
/// w_action * CE(action) + w_asd * CE(asd).
pub fn combined_loss(
    g: &mut Graph,
    cfg: &FusionConfig,
    action_logits: Var,
    asd_logits: Var,
    action_label: usize,
    asd_label: usize,
) -> Result<Var> {
    let ce_action = g.cross_entropy(action_logits, action_label)?;
    let ce_asd = g.cross_entropy(asd_logits, asd_label)?;
    let weighted_action = g.scale(ce_action, cfg.w_action);
    let weighted_asd = g.scale(ce_asd, cfg.w_asd);
    Ok(g.add(weighted_action, weighted_asd)?)
}
