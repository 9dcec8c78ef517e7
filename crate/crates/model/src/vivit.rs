use std::collections::BTreeMap;

use mmkit_autodiff::{multi_head_attention, AttentionWeights, Graph, Tensor, Var};
use mmkit_data::Clip;

use crate::config::ViViTConfig;
use crate::error::{ModelError, Result};
use crate::params::ParamBinder;

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) fn bind_attention(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    prefix: &str,
) -> Result<AttentionWeights> {
    Ok(AttentionWeights {
        wq: binder.bind(g, params, &format!("{prefix}.wq"))?,
        bq: binder.bind(g, params, &format!("{prefix}.bq"))?,
        wk: binder.bind(g, params, &format!("{prefix}.wk"))?,
        bk: binder.bind(g, params, &format!("{prefix}.bk"))?,
        wv: binder.bind(g, params, &format!("{prefix}.wv"))?,
        bv: binder.bind(g, params, &format!("{prefix}.bv"))?,
        wo: binder.bind(g, params, &format!("{prefix}.wo"))?,
        bo: binder.bind(g, params, &format!("{prefix}.bo"))?,
    })
}

/// Cut the clip into non-overlapping tubelet x patch x patch blocks, flatten
/// each one channel-major (then frame, row, column), project every block to
/// the embedding width, and add the learned positional table. Token order is
/// tubelet-major, then patch row, then patch column.
pub fn tubelet_embed(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    cfg: &ViViTConfig,
    clip: &Clip,
) -> Result<Var> {
    let (f, c, h, w) = (clip.frames(), clip.channels(), clip.height(), clip.width());
    let (t, p) = (cfg.tubelet, cfg.patch);
    if f % t != 0 {
        return Err(ModelError::config(
            "tubelet_embed",
            format!("frame axis {f} is not divisible by tubelet size {t}"),
        ));
    }
    if h % p != 0 {
        return Err(ModelError::config(
            "tubelet_embed",
            format!("spatial height {h} is not divisible by patch size {p}"),
        ));
    }
    if w % p != 0 {
        return Err(ModelError::config(
            "tubelet_embed",
            format!("spatial width {w} is not divisible by patch size {p}"),
        ));
    }
    let token_len = c * t * p * p;
    let tokens = (f / t) * (h / p) * (w / p);
    let mut rows = Vec::with_capacity(tokens * token_len);
    for ft in 0..f / t {
        for py in 0..h / p {
            for px in 0..w / p {
                for cc in 0..c {
                    for dt in 0..t {
                        for dy in 0..p {
                            for dx in 0..p {
                                rows.push(clip.at(ft * t + dt, cc, py * p + dy, px * p + dx));
                            }
                        }
                    }
                }
            }
        }
    }
    let x = g.constant(Tensor::new(vec![tokens, token_len], rows)?);
    let weight = binder.bind(g, params, "vivit.embed.w")?;
    if g.shape(weight) != [token_len, cfg.d] {
        return Err(ModelError::input(
            "tubelet_embed",
            format!("clip with token length {token_len} does not fit projection shape {:?}", g.shape(weight)),
        ));
    }
    let bias = binder.bind(g, params, "vivit.embed.b")?;
    let projected = g.linear(x, weight, bias)?;
    let pos = binder.bind(g, params, "vivit.pos")?;
    if g.shape(pos) != [tokens, cfg.d] {
        return Err(ModelError::input(
            "tubelet_embed",
            format!("{tokens} tokens do not fit positional table shape {:?}", g.shape(pos)),
        ));
    }
    Ok(g.add(projected, pos)?)
}

/// Transformer encoder over tubelet tokens: pre-normalized self-attention and
/// feed-forward blocks with residual connections, mean pooling over tokens,
/// and a projection to the shared feature width. Also returns every block's
/// per-head attention matrices.
pub fn vivit_encode(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    cfg: &ViViTConfig,
    clip: &Clip,
) -> Result<(Var, Vec<Var>)> {
    let mut x = tubelet_embed(g, binder, params, cfg, clip)?;
    let mut attention = Vec::new();
    for i in 0..cfg.blocks {
        let ln1_g = binder.bind(g, params, &format!("vivit.b{i}.ln1.g"))?;
        let ln1_b = binder.bind(g, params, &format!("vivit.b{i}.ln1.b"))?;
        let normed = g.layer_norm(x, ln1_g, ln1_b, LAYER_NORM_EPS)?;
        let weights = bind_attention(g, binder, params, &format!("vivit.b{i}.attn"))?;
        let (attended, maps) = multi_head_attention(g, normed, normed, normed, &weights, cfg.heads)?;
        attention.extend(maps);
        x = g.add(x, attended)?;

        let ln2_g = binder.bind(g, params, &format!("vivit.b{i}.ln2.g"))?;
        let ln2_b = binder.bind(g, params, &format!("vivit.b{i}.ln2.b"))?;
        let normed = g.layer_norm(x, ln2_g, ln2_b, LAYER_NORM_EPS)?;
        let w1 = binder.bind(g, params, &format!("vivit.b{i}.ff.w1"))?;
        let b1 = binder.bind(g, params, &format!("vivit.b{i}.ff.b1"))?;
        let w2 = binder.bind(g, params, &format!("vivit.b{i}.ff.w2"))?;
        let b2 = binder.bind(g, params, &format!("vivit.b{i}.ff.b2"))?;
        let hidden = g.linear(normed, w1, b1)?;
        let hidden = g.relu(hidden);
        let expanded = g.linear(hidden, w2, b2)?;
        x = g.add(x, expanded)?;
    }
    let pooled = g.mean_rows(x)?;
    let out_w = binder.bind(g, params, "vivit.out.w")?;
    let out_b = binder.bind(g, params, "vivit.out.b")?;
    let feature = g.linear(pooled, out_w, out_b)?;
    Ok((feature, attention))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::params::init_params;

    fn embed(cfg: &ViViTConfig, clip: &Clip) -> Result<(Graph, Var)> {
        let mut model_cfg = ModelConfig::micro();
        model_cfg.vivit = cfg.clone();
        let params = init_params(&model_cfg, 11);
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let var = tubelet_embed(&mut g, &mut binder, &params, cfg, clip)?;
        Ok((g, var))
    }

    fn embed_err(cfg: &ViViTConfig, clip: &Clip) -> String {
        match embed(cfg, clip) {
            Ok(_) => panic!("expected an error"),
            Err(e) => e.to_string(),
        }
    }

    #[test]
    fn full_size_clip_yields_one_thousand_tokens() {
        let cfg = ViViTConfig { d: 8, heads: 2, ..ViViTConfig::default() };
        let clip = Clip::filled(20, 3, 100, 100, 0.5).unwrap();
        let (g, tokens) = embed(&cfg, &clip).unwrap();
        assert_eq!(g.shape(tokens), [1000, 8]);
    }

    #[test]
    fn single_block_clip_yields_one_token() {
        let cfg = ViViTConfig { tubelet: 4, patch: 6, d: 8, heads: 2, frames: 4, side: 6, ..ViViTConfig::default() };
        let clip = Clip::filled(4, 3, 6, 6, 0.25).unwrap();
        let (g, tokens) = embed(&cfg, &clip).unwrap();
        assert_eq!(g.shape(tokens), [1, 8]);
    }

    #[test]
    fn zero_clip_with_zero_table_reduces_to_the_projection_bias() {
        let cfg = ModelConfig::micro();
        let mut params = init_params(&cfg, 5);
        let bias: Vec<f64> = (0..cfg.vivit.d).map(|i| i as f64 * 0.1 - 0.7).collect();
        params.insert("vivit.embed.b".into(), Tensor::new(vec![cfg.vivit.d], bias.clone()).unwrap());
        params.insert(
            "vivit.pos".into(),
            Tensor::zeros(vec![2 * 2 * 2, cfg.vivit.d]),
        );
        let clip = Clip::filled(4, 3, 20, 20, 0.0).unwrap();
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let tokens = tubelet_embed(&mut g, &mut binder, &params, &cfg.vivit, &clip).unwrap();
        let data = g.data(tokens);
        for row in 0..8 {
            for (j, &b) in bias.iter().enumerate() {
                assert!((data[row * cfg.vivit.d + j] - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn indivisible_axes_are_named_in_the_error() {
        let cfg = ViViTConfig { d: 8, heads: 2, ..ViViTConfig::default() };

        let clip = Clip::filled(5, 3, 100, 100, 0.1).unwrap();
        let msg = embed_err(&cfg, &clip);
        assert!(msg.contains("frame axis 5"), "{msg}");

        let clip = Clip::filled(20, 3, 95, 100, 0.1).unwrap();
        let msg = embed_err(&cfg, &clip);
        assert!(msg.contains("spatial height 95"), "{msg}");

        let clip = Clip::filled(20, 3, 100, 94, 0.1).unwrap();
        let msg = embed_err(&cfg, &clip);
        assert!(msg.contains("spatial width 94"), "{msg}");
    }

    #[test]
    fn token_order_is_tubelet_then_row_then_column() {
        // A clip that is non-zero only in frame 2, upper-right patch. With an
        // identity-column projection the hot block must land in token index
        // (frame block 1) * 4 + (row 0) * 2 + (col 1) = 5.
        let cfg = ModelConfig::micro();
        let mut params = init_params(&cfg, 5);
        let token_len = 3 * cfg.vivit.tubelet * cfg.vivit.patch * cfg.vivit.patch;
        let mut w = vec![0.0; token_len * cfg.vivit.d];
        for row in 0..token_len.min(cfg.vivit.d) {
            w[row * cfg.vivit.d + row] = 1.0;
        }
        params.insert("vivit.embed.w".into(), Tensor::new(vec![token_len, cfg.vivit.d], w).unwrap());
        params.insert("vivit.embed.b".into(), Tensor::zeros(vec![cfg.vivit.d]));
        params.insert("vivit.pos".into(), Tensor::zeros(vec![8, cfg.vivit.d]));

        let mut data = vec![0.0; 4 * 3 * 20 * 20];
        let plane = 20 * 20;
        for y in 0..10 {
            for x in 10..20 {
                data[2 * 3 * plane + y * 20 + x] = 1.0;
            }
        }
        let clip = Clip::new(4, 3, 20, 20, data).unwrap();
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let tokens = tubelet_embed(&mut g, &mut binder, &params, &cfg.vivit, &clip).unwrap();
        let out = g.data(tokens);
        let d = cfg.vivit.d;
        for row in 0..8 {
            let energy: f64 = out[row * d..(row + 1) * d].iter().map(|x| x.abs()).sum();
            if row == 5 {
                assert!(energy > 0.5, "hot token missing, energy {energy}");
            } else {
                assert_eq!(energy, 0.0, "token {row} should be empty");
            }
        }
    }

    #[test]
    fn encode_produces_the_shared_width_and_row_stochastic_attention() {
        let cfg = ModelConfig::micro();
        let params = init_params(&cfg, 2);
        let clip = Clip::filled(4, 3, 20, 20, 0.3).unwrap();
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let (feature, attention) = vivit_encode(&mut g, &mut binder, &params, &cfg.vivit, &clip).unwrap();
        assert_eq!(g.shape(feature), [16]);
        assert_eq!(attention.len(), cfg.vivit.blocks * cfg.vivit.heads);
        for map in attention {
            let shape = g.shape(map).to_vec();
            assert_eq!(shape, vec![8, 8]);
            for row in g.data(map).chunks(shape[1]) {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "attention row sums to {sum}");
            }
        }
    }
}
