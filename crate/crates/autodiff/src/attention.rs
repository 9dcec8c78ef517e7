//! Multi-head attention assembled from primitive graph ops, so gradients
//! flow through the tape without a dedicated attention op.

use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Var};

/// Projection parameters for one attention layer. All weight matrices are
/// `[d, d]`, biases `[d]`.
pub struct AttentionWeights {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

/// Scaled dot-product attention with `heads` parallel heads.
///
/// `query` is `[n_q, d]`, `key` and `value` are `[n_kv, d]` (self-attention
/// passes the same Var three times). Returns the `[n_q, d]` output plus each
/// head's `[n_q, n_kv]` attention matrix; every attention row is a softmax
/// and sums to 1.
pub fn multi_head_attention(
    g: &mut Graph,
    query: Var,
    key: Var,
    value: Var,
    w: &AttentionWeights,
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let d = *g.shape(query).last().unwrap();
    if heads == 0 || d % heads != 0 {
        return Err(AutodiffError::config(
            "multi_head_attention",
            format!("model dim {d} not divisible by {heads} heads"),
        ));
    }
    if *g.shape(key).last().unwrap() != d || *g.shape(value).last().unwrap() != d {
        return Err(AutodiffError::dim("multi_head_attention", g.shape(query), g.shape(key)));
    }
    if g.shape(key)[0] != g.shape(value)[0] {
        return Err(AutodiffError::dim("multi_head_attention", g.shape(key), g.shape(value)));
    }
    let d_h = d / heads;

    let q = g.linear(query, w.wq, w.bq)?;
    let k = g.linear(key, w.wk, w.bk)?;
    let v = g.linear(value, w.wv, w.bv)?;

    let mut contexts = Vec::with_capacity(heads);
    let mut attentions = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * d_h, d_h)?;
        let kh = g.slice_cols(k, h * d_h, d_h)?;
        let vh = g.slice_cols(v, h * d_h, d_h)?;
        let kht = g.transpose(kh)?;
        let scores = g.matmul(qh, kht)?;
        let scaled = g.scale(scores, 1.0 / (d_h as f64).sqrt());
        let attn = g.softmax(scaled, 1)?;
        let ctx = g.matmul(attn, vh)?;
        contexts.push(ctx);
        attentions.push(attn);
    }
    let merged = g.concat_cols(&contexts)?;
    let out = g.linear(merged, w.wo, w.bo)?;
    Ok((out, attentions))
}
