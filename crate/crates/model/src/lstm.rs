use std::collections::BTreeMap;

use mmkit_autodiff::{lstm_step, Graph, LstmWeights, Tensor, Var};
use mmkit_data::SkeletonSequence;

use crate::config::LstmConfig;
use crate::error::{ModelError, Result};
use crate::params::ParamBinder;

fn bind_layer(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    layer: usize,
) -> Result<LstmWeights> {
    let p = |g: &mut Graph, binder: &mut ParamBinder, part: &str| {
        binder.bind(g, params, &format!("lstm.l{layer}.{part}"))
    };
    Ok(LstmWeights {
        w_ix: p(g, binder, "w_ix")?,
        w_ih: p(g, binder, "w_ih")?,
        b_i: p(g, binder, "b_i")?,
        w_fx: p(g, binder, "w_fx")?,
        w_fh: p(g, binder, "w_fh")?,
        b_f: p(g, binder, "b_f")?,
        w_ox: p(g, binder, "w_ox")?,
        w_oh: p(g, binder, "w_oh")?,
        b_o: p(g, binder, "b_o")?,
        w_gx: p(g, binder, "w_gx")?,
        w_gh: p(g, binder, "w_gh")?,
        b_g: p(g, binder, "b_g")?,
    })
}

/// Stacked LSTM over the skeleton sequence. Each frame is flattened to
/// joints x 3 coordinates and pushed through the stack (layer k consumes
/// layer k-1's hidden state at the same time step); the top layer's final
/// hidden state is projected to the shared feature width. The input must
/// carry exactly the configured frame and joint counts.
pub fn lstm_encode(
    g: &mut Graph,
    binder: &mut ParamBinder,
    params: &BTreeMap<String, Tensor>,
    cfg: &LstmConfig,
    skeleton: &SkeletonSequence,
) -> Result<Var> {
    if skeleton.frames() != cfg.frames {
        return Err(ModelError::input(
            "lstm_encode",
            format!("skeleton has {} frames, the branch consumes exactly {}", skeleton.frames(), cfg.frames),
        ));
    }
    if skeleton.joints() * 3 != cfg.input_dim {
        return Err(ModelError::input(
            "lstm_encode",
            format!(
                "skeleton frame width {} (joints x 3) does not match input width {}",
                skeleton.joints() * 3,
                cfg.input_dim
            ),
        ));
    }
    let mut weights = Vec::with_capacity(cfg.layers);
    for k in 0..cfg.layers {
        weights.push(bind_layer(g, binder, params, k)?);
    }
    let mut hidden: Vec<Var> = (0..cfg.layers).map(|_| g.constant(Tensor::zeros(vec![cfg.hidden]))).collect();
    let mut cell: Vec<Var> = (0..cfg.layers).map(|_| g.constant(Tensor::zeros(vec![cfg.hidden]))).collect();

    let per = cfg.input_dim;
    for frame in 0..cfg.frames {
        let row = skeleton.data()[frame * per..(frame + 1) * per].to_vec();
        let mut input = g.constant(Tensor::new(vec![per], row)?);
        for k in 0..cfg.layers {
            let (h_new, c_new) = lstm_step(g, input, hidden[k], cell[k], &weights[k])?;
            hidden[k] = h_new;
            cell[k] = c_new;
            input = h_new;
        }
    }
    let out_w = binder.bind(g, params, "lstm.out.w")?;
    let out_b = binder.bind(g, params, "lstm.out.b")?;
    Ok(g.linear(hidden[cfg.layers - 1], out_w, out_b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::params::init_params;

    fn skeleton(frames: usize, joints: usize) -> SkeletonSequence {
        let n = frames * joints * 3;
        let data: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.61).sin()).collect();
        SkeletonSequence::new(frames, joints, data).unwrap()
    }

    #[test]
    fn zero_weights_collapse_to_the_output_bias() {
        // With all weights zero every gate sits at sigmoid(0)=0.5 and the
        // candidate at tanh(0)=0, so cells and hidden states stay zero for
        // any input and the feature equals the projection bias.
        let cfg = ModelConfig::micro();
        let mut params = init_params(&cfg, 9);
        for k in 0..cfg.lstm.layers {
            for gate in ["i", "f", "o", "g"] {
                for part in [format!("w_{gate}x"), format!("w_{gate}h")] {
                    let name = format!("lstm.l{k}.{part}");
                    let shape = params[&name].shape().to_vec();
                    params.insert(name, Tensor::zeros(shape));
                }
            }
        }
        let bias: Vec<f64> = (0..16).map(|i| 0.3 - 0.05 * i as f64).collect();
        params.insert("lstm.out.b".into(), Tensor::new(vec![16], bias.clone()).unwrap());
        let mut w = vec![0.0; 16 * 16];
        for i in 0..16 {
            w[i * 16 + i] = 1.0;
        }
        params.insert("lstm.out.w".into(), Tensor::new(vec![16, 16], w).unwrap());

        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let feature = lstm_encode(&mut g, &mut binder, &params, &cfg.lstm, &skeleton(8, 4)).unwrap();
        for (got, want) in g.data(feature).iter().zip(&bias) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn single_unit_stack_matches_the_hand_formula() {
        let cfg = LstmConfig { layers: 1, hidden: 1, input_dim: 3, frames: 2 };
        let model_cfg = {
            let mut m = ModelConfig::micro();
            m.lstm = cfg.clone();
            m
        };
        let mut params = init_params(&model_cfg, 0);
        let wx = [0.1, 0.2, 0.3];
        for gate in ["i", "f", "o", "g"] {
            params.insert(format!("lstm.l0.w_{gate}x"), Tensor::new(vec![3, 1], wx.to_vec()).unwrap());
            params.insert(format!("lstm.l0.w_{gate}h"), Tensor::new(vec![1, 1], vec![0.4]).unwrap());
            params.insert(format!("lstm.l0.b_{gate}"), Tensor::new(vec![1], vec![0.05]).unwrap());
        }
        params.insert("lstm.out.w".into(), Tensor::new(vec![1, 16], vec![1.0; 16]).unwrap());
        params.insert("lstm.out.b".into(), Tensor::zeros(vec![16]));

        let frames = [[1.0, 2.0, 3.0], [0.5, -1.0, 2.0]];
        let skeleton = SkeletonSequence::new(2, 1, frames.concat()).unwrap();
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let feature = lstm_encode(&mut g, &mut binder, &params, &cfg, &skeleton).unwrap();

        let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (mut h, mut c) = (0.0f64, 0.0f64);
        for x in frames {
            let pre = 0.1 * x[0] + 0.2 * x[1] + 0.3 * x[2] + 0.4 * h + 0.05;
            let (i, f, o, cand) = (sigmoid(pre), sigmoid(pre), sigmoid(pre), pre.tanh());
            c = f * c + i * cand;
            h = o * c.tanh();
        }
        for &got in g.data(feature) {
            assert!((got - h).abs() < 1e-12, "got {got}, want {h}");
        }
    }

    #[test]
    fn frame_and_joint_mismatches_are_input_errors() {
        let cfg = ModelConfig::micro();
        let params = init_params(&cfg, 9);
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();

        let err = lstm_encode(&mut g, &mut binder, &params, &cfg.lstm, &skeleton(7, 4)).unwrap_err();
        assert!(err.to_string().contains("7 frames"), "{err}");

        let err = lstm_encode(&mut g, &mut binder, &params, &cfg.lstm, &skeleton(8, 5)).unwrap_err();
        assert!(err.to_string().contains("15"), "{err}");
    }

    #[test]
    fn exact_length_inputs_are_never_repadded() {
        // Standardization upstream is the identity on exact-length
        // sequences, so encoding before and after it must agree bitwise;
        // anything longer is refused instead of being silently re-padded.
        let cfg = LstmConfig::default();
        let params = init_params(&ModelConfig::default(), 14);
        let skel = skeleton(cfg.frames, 33);
        let standardized = mmkit_data::standardize_skeleton(&skel);
        assert_eq!(standardized.frames(), cfg.frames);

        let encode = |s: &SkeletonSequence| {
            let mut g = Graph::new();
            let mut binder = ParamBinder::new();
            let feature = lstm_encode(&mut g, &mut binder, &params, &cfg, s).unwrap();
            g.data(feature).to_vec()
        };
        assert_eq!(encode(&skel), encode(&standardized));

        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let err = match lstm_encode(&mut g, &mut binder, &params, &cfg, &skeleton(cfg.frames + 1, 33)) {
            Ok(_) => panic!("over-length input must be refused"),
            Err(e) => e.to_string(),
        };
        assert!(err.contains("181 frames"), "{err}");
    }

    #[test]
    fn encode_is_deterministic_and_feature_sized() {
        let cfg = ModelConfig::micro();
        let params = init_params(&cfg, 4);
        let run = || {
            let mut g = Graph::new();
            let mut binder = ParamBinder::new();
            let feature = lstm_encode(&mut g, &mut binder, &params, &cfg.lstm, &skeleton(8, 4)).unwrap();
            assert_eq!(g.shape(feature), [16]);
            g.data(feature).to_vec()
        };
        assert_eq!(run(), run());
    }
}
