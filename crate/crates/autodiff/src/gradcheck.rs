//! Central finite-difference verification of analytic gradients.

use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Compare the analytic gradient of `f` at `point` against central finite
/// differences with step `h`. `f` must build a scalar loss from the given
/// input Var. Returns the max over coordinates of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(AutodiffError::config("grad_check", format!("step h must be > 0, got {h}")));
    }

    let mut g = Graph::new();
    let mut leaf = point.clone();
    leaf.requires_grad = true;
    let x = g.leaf(leaf);
    let loss = f(&mut g, x)?;
    g.backward(loss)?;
    let analytic = g.grad(x).expect("backward populates input grad").to_vec();

    let eval = |data: &[f64]| -> Result<f64> {
        let mut g = Graph::new();
        let t = Tensor::new(point.shape().to_vec(), data.to_vec())?;
        let x = g.constant(t);
        let loss = f(&mut g, x)?;
        Ok(g.value(loss))
    };

    let mut worst = 0.0f64;
    let mut probe = point.data().to_vec();
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = eval(&probe)?;
        probe[i] = orig - h;
        let minus = eval(&probe)?;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
