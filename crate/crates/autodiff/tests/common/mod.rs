// Shared by several test binaries; not every binary uses every helper.
#![allow(dead_code)]

use mmkit_autodiff::{grad_check, Graph, Result, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(r: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    Tensor::from_fn(shape, |_| r.gen_range(-1.0..1.0))
}

/// Values bounded away from zero, for ops with a kink at the origin.
pub fn rand_tensor_off_origin(r: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let mag = r.gen_range(0.2..1.2);
        if r.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    })
}

/// Distinct values with pairwise gaps far larger than the finite-difference
/// step, so argmax selections cannot flip under perturbation.
pub fn rand_tensor_distinct(r: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n: usize = shape.iter().product();
    let mut grid: Vec<f64> = (0..4 * n).map(|i| i as f64 * 0.01).collect();
    for i in (1..grid.len()).rev() {
        let j = r.gen_range(0..=i);
        grid.swap(i, j);
    }
    Tensor::new(shape, grid[..n].to_vec()).unwrap()
}

/// Reduce any output to a scalar via a fixed random weighting, so gradient
/// routing mistakes cannot cancel out the way a plain sum would let them.
pub fn weighted_sum(g: &mut Graph, v: Var, weights: &Tensor) -> Result<Var> {
    let n = weights.numel();
    let w = g.constant(weights.clone());
    let flat_v = g.reshape(v, vec![n])?;
    let flat_w = g.reshape(w, vec![n])?;
    let prod = g.mul(flat_v, flat_w)?;
    let col = g.reshape(prod, vec![n, 1])?;
    let m = g.mean_rows(col)?;
    Ok(g.scale(m, n as f64))
}

/// Run grad_check on `build`'s output contracted against a random weighting.
/// `build` maps the differentiated input Var to the op output.
pub fn check_op_grad<F>(build: F, point: &Tensor, seed: u64) -> f64
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut probe = Graph::new();
    let x = probe.constant(point.clone());
    let out = build(&mut probe, x).expect("op builds on probe graph");
    let out_shape = probe.shape(out).to_vec();
    let weights = rand_tensor(&mut rng(seed ^ 0x5eed), out_shape);

    grad_check(
        |g, x| {
            let out = build(g, x)?;
            weighted_sum(g, out, &weights)
        },
        point,
        1e-5,
    )
    .expect("grad_check runs")
}
