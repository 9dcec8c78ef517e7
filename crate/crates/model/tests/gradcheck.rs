//! Finite-difference validation of every branch and of the full model: the
//! analytic gradient from one backward pass must match central differences
//! on randomly probed parameter components.

use std::collections::BTreeMap;

use mmkit_autodiff::{Graph, Tensor, Var};
use mmkit_data::{Clip, SkeletonSequence};
use mmkit_model::{
    cnn3d_encode, init_bn_states, init_params, lstm_encode, vivit_encode, Mode, Model, ModelConfig, ModelInput,
    ParamBinder,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_clip(rng: &mut ChaCha8Rng, frames: usize, side: usize) -> Clip {
    let n = frames * 3 * side * side;
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
    Clip::new(frames, 3, side, side, data).unwrap()
}

fn random_skeleton(rng: &mut ChaCha8Rng, frames: usize, joints: usize) -> SkeletonSequence {
    let n = frames * joints * 3;
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SkeletonSequence::new(frames, joints, data).unwrap()
}

/// Reduce a feature vector to one number with fixed mixing weights so the
/// whole output participates in the gradient.
fn scalarize(g: &mut Graph, v: Var) -> Var {
    let n = g.data(v).len();
    let weights: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * 0.7).sin()).collect();
    let row = g.reshape(v, vec![1, n]).unwrap();
    let col = g.constant(Tensor::new(vec![n, 1], weights).unwrap());
    g.matmul(row, col).unwrap()
}

/// Check probed components of named parameters against central differences.
/// `eval` maps a parameter set to (scalar value, analytic gradient map).
fn probe_params(
    params: &BTreeMap<String, Tensor>,
    probes: &[(&str, usize)],
    mut value_of: impl FnMut(&BTreeMap<String, Tensor>) -> f64,
    analytic: &BTreeMap<String, Vec<f64>>,
) {
    for &(name, raw_idx) in probes {
        let len = params[name].numel();
        let idx = raw_idx % len;
        let mut bumped = params.clone();
        bumped.get_mut(name).unwrap().data_mut()[idx] += STEP;
        let up = value_of(&bumped);
        bumped.get_mut(name).unwrap().data_mut()[idx] -= 2.0 * STEP;
        let down = value_of(&bumped);
        let fd = (up - down) / (2.0 * STEP);
        let an = analytic[name][idx];
        assert!(
            rel_err(fd, an) < TOLERANCE,
            "{name}[{idx}]: finite difference {fd} vs analytic {an} (rel {})",
            rel_err(fd, an),
        );
    }
}

#[test]
fn transformer_branch_gradients_match_finite_differences() {
    let cfg = ModelConfig::micro();
    let params = init_params(&cfg, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let clip = random_clip(&mut rng, 4, 20);

    let run = |params: &BTreeMap<String, Tensor>| {
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let (feature, _) = vivit_encode(&mut g, &mut binder, params, &cfg.vivit, &clip).unwrap();
        let loss = scalarize(&mut g, feature);
        (g, binder, loss)
    };
    let (mut g, binder, loss) = run(&params);
    g.backward(loss).unwrap();
    let analytic = binder.grads(&g);

    let probes = [
        ("vivit.embed.w", 137),
        ("vivit.embed.b", 5),
        ("vivit.pos", 91),
        ("vivit.b0.attn.wq", 333),
        ("vivit.b0.attn.wv", 217),
        ("vivit.b0.ln1.g", 7),
        ("vivit.b1.ff.w1", 518),
        ("vivit.b1.ln2.b", 11),
        ("vivit.out.w", 250),
    ];
    probe_params(&params, &probes, |p| { let (g, _, l) = run(p); g.value(l) }, &analytic);
}

#[test]
fn cnn_branch_gradients_match_finite_differences_in_train_mode() {
    let cfg = ModelConfig::micro();
    let params = init_params(&cfg, 22);
    let bn = init_bn_states(&cfg.cnn);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let clip = random_clip(&mut rng, 8, 100);

    let run = |params: &BTreeMap<String, Tensor>| {
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let (feature, _) =
            cnn3d_encode(&mut g, &mut binder, params, &bn, &cfg.cnn, &clip, Mode::Train).unwrap();
        let loss = scalarize(&mut g, feature);
        (g, binder, loss)
    };
    let (mut g, binder, loss) = run(&params);
    g.backward(loss).unwrap();
    let analytic = binder.grads(&g);

    let probes = [
        ("cnn.stem.conv.w", 77),
        ("cnn.stem.bn.g", 2),
        ("cnn.s0.b0.conv1.w", 191),
        ("cnn.s1.b0.bn1.b", 3),
        ("cnn.s2.b0.conv2.w", 1043),
        ("cnn.s3.b0.proj.w", 58),
        ("cnn.out.w", 301),
    ];
    probe_params(&params, &probes, |p| { let (g, _, l) = run(p); g.value(l) }, &analytic);
}

#[test]
fn lstm_branch_gradients_match_finite_differences() {
    let cfg = ModelConfig::micro();
    let params = init_params(&cfg, 23);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let skeleton = random_skeleton(&mut rng, 8, 4);

    let run = |params: &BTreeMap<String, Tensor>| {
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let feature = lstm_encode(&mut g, &mut binder, params, &cfg.lstm, &skeleton).unwrap();
        let loss = scalarize(&mut g, feature);
        (g, binder, loss)
    };
    let (mut g, binder, loss) = run(&params);
    g.backward(loss).unwrap();
    let analytic = binder.grads(&g);

    let probes = [
        ("lstm.l0.w_ix", 55),
        ("lstm.l0.w_fh", 120),
        ("lstm.l0.b_o", 9),
        ("lstm.l1.w_gx", 200),
        ("lstm.l1.w_oh", 33),
        ("lstm.out.w", 141),
    ];
    probe_params(&params, &probes, |p| { let (g, _, l) = run(p); g.value(l) }, &analytic);
}

#[test]
fn full_model_gradients_match_finite_differences_on_ten_random_parameters() {
    let cfg = ModelConfig::micro();
    let model = Model::new(cfg, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let input = ModelInput {
        mesh: random_clip(&mut rng, 4, 20),
        flow: random_clip(&mut rng, 8, 100),
        skeleton: random_skeleton(&mut rng, 8, 4),
    };
    let (action_label, asd_label) = (3, 1);

    let value_of = |model: &Model| {
        let mut g = Graph::new();
        let pass = model.forward(&mut g, &input, Mode::Train).unwrap();
        let loss = model.loss(&mut g, &pass, action_label, asd_label).unwrap();
        g.value(loss)
    };

    let mut g = Graph::new();
    let pass = model.forward(&mut g, &input, Mode::Train).unwrap();
    let loss = model.loss(&mut g, &pass, action_label, asd_label).unwrap();
    g.backward(loss).unwrap();
    let analytic = pass.binder.grads(&g);
    drop(g);

    let names: Vec<String> = model.params().keys().cloned().collect();
    let mut model = model;
    for probe in 0..10 {
        let name = names[rng.gen_range(0..names.len())].clone();
        let len = model.params()[&name].numel();
        let idx = rng.gen_range(0..len);

        let base = model.params()[&name].data()[idx];
        model.params_mut().get_mut(&name).unwrap().data_mut()[idx] = base + STEP;
        let up = value_of(&model);
        model.params_mut().get_mut(&name).unwrap().data_mut()[idx] = base - STEP;
        let down = value_of(&model);
        model.params_mut().get_mut(&name).unwrap().data_mut()[idx] = base;

        let fd = (up - down) / (2.0 * STEP);
        let an = analytic[&name][idx];
        assert!(
            rel_err(fd, an) < TOLERANCE,
            "probe {probe} {name}[{idx}]: finite difference {fd} vs analytic {an} (rel {})",
            rel_err(fd, an),
        );
    }
}
