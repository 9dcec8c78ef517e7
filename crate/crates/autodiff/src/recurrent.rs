//! Single LSTM cell step built from primitive graph ops.

use crate::error::Result;
use crate::graph::{Activation, Graph, Var};

/// Gate parameters for one LSTM layer: input (`i`), forget (`f`), output
/// (`o`) and candidate (`g`) each get an input projection `[d_in, d_h]`, a
/// recurrent projection `[d_h, d_h]` and a bias `[d_h]`.
pub struct LstmWeights {
    pub w_ix: Var,
    pub w_ih: Var,
    pub b_i: Var,
    pub w_fx: Var,
    pub w_fh: Var,
    pub b_f: Var,
    pub w_ox: Var,
    pub w_oh: Var,
    pub b_o: Var,
    pub w_gx: Var,
    pub w_gh: Var,
    pub b_g: Var,
}

/// One recurrence step:
/// i,f,o = sigmoid(x W_*x + h W_*h + b_*), g = tanh(x W_gx + h W_gh + b_g),
/// c' = f*c + i*g, h' = o * tanh(c'). Returns (h', c').
pub fn lstm_step(g: &mut Graph, x: Var, h: Var, c: Var, w: &LstmWeights) -> Result<(Var, Var)> {
    let gate = |g: &mut Graph, wx, bx, wh, kind| -> Result<Var> {
        let from_x = g.linear(x, wx, bx)?;
        let zeros = crate::tensor::Tensor::zeros(g.shape(from_x).to_vec());
        let zb = g.constant(zeros);
        let from_h = g.linear(h, wh, zb)?;
        let pre = g.add(from_x, from_h)?;
        Ok(g.activation(pre, kind))
    };
    let i = gate(g, w.w_ix, w.b_i, w.w_ih, Activation::Sigmoid)?;
    let f = gate(g, w.w_fx, w.b_f, w.w_fh, Activation::Sigmoid)?;
    let o = gate(g, w.w_ox, w.b_o, w.w_oh, Activation::Sigmoid)?;
    let cand = gate(g, w.w_gx, w.b_g, w.w_gh, Activation::Tanh)?;

    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_new = g.add(keep, write)?;
    let c_act = g.activation(c_new, Activation::Tanh);
    let h_new = g.mul(o, c_act)?;
    Ok((h_new, c_new))
}
