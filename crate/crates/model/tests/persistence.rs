//! Checkpoint round trips: a saved model must come back bit-identical, and
//! damaged checkpoints must be rejected with a clear message.

use std::collections::BTreeMap;

use mmkit_autodiff::{write_tensor, Graph, Tensor};
use mmkit_data::{Clip, SkeletonSequence};
use mmkit_model::{Mode, Model, ModelConfig, ModelInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn micro_input(seed: u64) -> ModelInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clip = |rng: &mut ChaCha8Rng, frames: usize, side: usize| {
        let n = frames * 3 * side * side;
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        Clip::new(frames, 3, side, side, data).unwrap()
    };
    let mesh = clip(&mut rng, 4, 20);
    let flow = clip(&mut rng, 8, 100);
    let skel: Vec<f64> = (0..8 * 4 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ModelInput { mesh, flow, skeleton: SkeletonSequence::new(8, 4, skel).unwrap() }
}

fn trained_micro_model(seed: u64, input: &ModelInput) -> Model {
    let mut model = Model::new(ModelConfig::micro(), seed).unwrap();
    let mut g = Graph::new();
    let pass = model.forward(&mut g, input, Mode::Train).unwrap();
    let updates = pass.bn_updates.clone();
    drop(g);
    model.apply_bn_updates(&updates).unwrap();
    model
}

#[test]
fn round_trip_preserves_parameters_statistics_and_evaluation() {
    let input = micro_input(7);
    let model = trained_micro_model(42, &input);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let loaded = Model::load(dir.path()).unwrap();

    assert_eq!(loaded.config(), model.config());
    assert_eq!(loaded.seed(), 42);
    assert!(loaded.bn_ready());
    for (name, tensor) in model.params() {
        let other = &loaded.params()[name];
        assert_eq!(tensor.shape(), other.shape(), "{name}");
        for (a, b) in tensor.data().iter().zip(other.data()) {
            assert_eq!(a.to_bits(), b.to_bits(), "{name} drifted through the checkpoint");
        }
    }

    let eval = |m: &Model| {
        let mut g = Graph::new();
        let pass = m.forward(&mut g, &input, Mode::Eval).unwrap();
        (g.data(pass.action_logits).to_vec(), g.data(pass.asd_logits).to_vec())
    };
    assert_eq!(eval(&model), eval(&loaded));
}

#[test]
fn eval_before_any_training_batch_is_rejected() {
    let model = Model::new(ModelConfig::micro(), 1).unwrap();
    let input = micro_input(8);
    let mut g = Graph::new();
    let err = match model.forward(&mut g, &input, Mode::Eval) {
        Ok(_) => panic!("eval with uninitialized statistics must fail"),
        Err(e) => e.to_string(),
    };
    assert!(err.contains("running stats"), "{err}");
}

#[test]
fn uninitialized_statistics_survive_the_round_trip_as_uninitialized() {
    let model = Model::new(ModelConfig::micro(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let loaded = Model::load(dir.path()).unwrap();
    assert!(!loaded.bn_ready());
}

#[test]
fn missing_parameter_is_a_format_error() {
    let input = micro_input(9);
    let model = trained_micro_model(3, &input);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();

    let manifest_path = dir.path().join("manifest.json");
    let mut manifest: BTreeMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    manifest.remove("head.asd.w").unwrap();
    std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();

    let err = match Model::load(dir.path()) {
        Ok(_) => panic!("load must fail"),
        Err(e) => e.to_string(),
    };
    assert!(err.contains("head.asd.w") && err.contains("missing"), "{err}");
}

#[test]
fn misshapen_parameter_is_a_format_error() {
    let input = micro_input(10);
    let model = trained_micro_model(4, &input);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();

    write_tensor(&dir.path().join("head.asd.b.mmt"), &Tensor::zeros(vec![3])).unwrap();
    let err = match Model::load(dir.path()) {
        Ok(_) => panic!("load must fail"),
        Err(e) => e.to_string(),
    };
    assert!(err.contains("head.asd.b") && err.contains("expected"), "{err}");
}

#[test]
fn corrupt_manifest_is_a_format_error() {
    let input = micro_input(11);
    let model = trained_micro_model(5, &input);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    std::fs::write(dir.path().join("model.json"), "{ not json").unwrap();
    let err = match Model::load(dir.path()) {
        Ok(_) => panic!("load must fail"),
        Err(e) => e.to_string(),
    };
    assert!(err.contains("manifest parse"), "{err}");
}
