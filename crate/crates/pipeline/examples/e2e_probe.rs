//! Scratch probe for the full synthetic end-to-end run: 8 per class,
//! stratified 80/20, micro model widened to 33-joint skeletons, 30 epochs.
//! Reports accuracy for both normalization modes on both splits to separate
//! batch-statistics mismatch from genuine memorization.

use std::time::Instant;

use mmkit_autodiff::Graph;
use mmkit_data::Sample;
use mmkit_model::{adapt_sample, Mode, Model, ModelConfig};
use mmkit_pipeline::{argmax, evaluate, stratified_split, synth_dataset, train_loop, TrainConfig};

fn mode_accuracy(model: &Model, samples: &[Sample], mode: Mode) -> (f64, f64) {
    let mut action_hits = 0usize;
    let mut asd_hits = 0usize;
    for s in samples {
        let input = adapt_sample(model.config(), s).unwrap();
        let mut g = Graph::new();
        let pass = model.forward(&mut g, &input, mode).unwrap();
        if argmax(g.data(pass.action_logits)) == s.action_label {
            action_hits += 1;
        }
        if argmax(g.data(pass.asd_logits)) == s.asd_label {
            asd_hits += 1;
        }
    }
    let n = samples.len() as f64;
    (action_hits as f64 / n, asd_hits as f64 / n)
}

fn main() {
    let t0 = Instant::now();
    let seed = 42u64;
    let ds = synth_dataset(8, seed).unwrap();
    println!("synth: {} samples in {:.1}s", ds.len(), t0.elapsed().as_secs_f64());

    let split = stratified_split(ds, 0.8, seed).unwrap();
    println!("split: {} train / {} test", split.train.len(), split.test.len());

    let mut config = ModelConfig::micro();
    config.lstm.input_dim = 99;
    let mut model = Model::new(config, seed).unwrap();
    let cfg = TrainConfig { seed, ..TrainConfig::default() };

    let t1 = Instant::now();
    let history = train_loop(&mut model, split.train.samples(), &cfg).unwrap();
    println!("train: {:.1}s for {} epochs", t1.elapsed().as_secs_f64(), history.epochs.len());
    for e in history.epochs.iter().rev().take(3).rev() {
        println!(
            "epoch {:2}: loss {:.4} action_acc {:.3} asd_acc {:.3}",
            e.epoch, e.mean_loss, e.action_accuracy, e.asd_accuracy
        );
    }

    for (name, samples) in [("train", split.train.samples()), ("test", split.test.samples())] {
        for mode in [Mode::Train, Mode::Eval] {
            let (action, asd) = mode_accuracy(&model, samples, mode);
            println!("{name} set, {mode:?} mode: action_acc {action:.3} asd_acc {asd:.3}");
        }
    }

    let report = evaluate(&model, split.test.samples()).unwrap();
    println!(
        "test report: action_acc {:.3} macro_f1 {:.3} | asd_acc {:.3} macro_f1 {:.3}",
        report.action.accuracy, report.action.macro_f1, report.asd.accuracy, report.asd.macro_f1
    );
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
