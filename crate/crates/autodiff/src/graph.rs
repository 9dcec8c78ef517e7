//! Dynamic computation tape. Each forward call records operations in
//! topological order; `backward` replays them once in reverse, accumulating
//! gradients into every reachable tensor that requires them. The graph is
//! meant to live for one forward/backward cycle and then be dropped.

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;
use crate::volume;

/// Handle to a node on a [`Graph`]. Only valid for the graph that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

/// Normalization source for [`Graph::batch_norm`].
pub enum BnMode {
    /// Normalize by the current batch statistics (returned to the caller so
    /// stateful layers can fold them into running averages).
    Train,
    /// Normalize by externally tracked running statistics.
    Eval { mean: Vec<f64>, var: Vec<f64> },
}

/// Batch statistics observed by a train-mode batch_norm, per channel.
#[derive(Clone, Debug)]
pub struct BnBatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

enum Op {
    Leaf,
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    AddBias { a: usize, bias: usize, width: usize },
    Matmul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Transpose { a: usize, rows: usize, cols: usize },
    Reshape { a: usize },
    ConcatRows { parts: Vec<usize>, rows: Vec<usize>, cols: usize },
    ConcatCols { parts: Vec<usize>, cols: Vec<usize>, rows: usize },
    SliceRows { a: usize, start: usize, len: usize, cols: usize },
    SliceCols { a: usize, start: usize, len: usize, in_cols: usize, rows: usize },
    MeanRows { a: usize, rows: usize, cols: usize },
    Activation { a: usize, kind: Activation },
    Softmax { a: usize, axis: usize },
    LayerNorm { a: usize, gamma: usize, beta: usize, mean: Vec<f64>, inv_std: Vec<f64>, width: usize },
    CrossEntropy { logits: usize, target: usize },
    Conv3d { input: usize, weight: usize, stride: [usize; 3], padding: [usize; 3] },
    BatchNorm { input: usize, gamma: usize, beta: usize, mean: Vec<f64>, inv_std: Vec<f64>, train: bool },
    MaxPool3d { input: usize, argmax: Vec<usize> },
    GlobalAvgPool { input: usize, per_channel: usize },
}

struct Node {
    tensor: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Row-major matrix product, (m,k) x (k,n).
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += a_ip * brow[j];
            }
        }
    }
    c
}

pub(crate) fn transpose_raw(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record a tensor as a graph input, keeping its `requires_grad` flag.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.push(tensor, Op::Leaf)
    }

    /// Record a tensor that never needs gradients.
    pub fn constant(&mut self, mut tensor: Tensor) -> Var {
        tensor.requires_grad = false;
        tensor.grad = None;
        self.push(tensor, Op::Leaf)
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].tensor.data()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].tensor.shape()
    }

    pub fn tensor(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].tensor
    }

    /// Gradient of a node, if backward has populated one.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].tensor.grad.as_deref()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].tensor.item()
    }

    // Non-finite values are allowed to flow: overflow under extreme
    // parameters is a runtime condition for callers to detect (e.g. a
    // training loop watching its loss), not an internal invariant.
    fn push(&mut self, tensor: Tensor, op: Op) -> Var {
        self.nodes.push(Node { tensor, op });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, shape: Vec<usize>, data: Vec<f64>, inputs: &[usize], op: Op) -> Var {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].tensor.requires_grad);
        let mut t = Tensor::new(shape, data).expect("internal shape bookkeeping");
        t.requires_grad = requires_grad;
        self.push(t, op)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(AutodiffError::dim(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    // ── elementwise and shape ops ───────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push_op(self.shape(a).to_vec(), data, &[a.0, b.0], Op::Add { a: a.0, b: b.0 }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push_op(self.shape(a).to_vec(), data, &[a.0, b.0], Op::Sub { a: a.0, b: b.0 }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push_op(self.shape(a).to_vec(), data, &[a.0, b.0], Op::Mul { a: a.0, b: b.0 }))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let data = self.data(a).iter().map(|x| x * c).collect();
        self.push_op(self.shape(a).to_vec(), data, &[a.0], Op::Scale { a: a.0, c })
    }

    /// Broadcast-add a `[d]` bias over the trailing axis of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let width = *self.shape(a).last().unwrap();
        if self.shape(bias) != [width] {
            return Err(AutodiffError::dim("add_bias", self.shape(a), self.shape(bias)));
        }
        let b = self.data(bias);
        let data = self
            .data(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + b[i % width])
            .collect();
        Ok(self.push_op(
            self.shape(a).to_vec(),
            data,
            &[a.0, bias.0],
            Op::AddBias { a: a.0, bias: bias.0, width },
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(AutodiffError::dim("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = matmul_raw(self.data(a), self.data(b), m, k, n);
        Ok(self.push_op(vec![m, n], data, &[a.0, b.0], Op::Matmul { a: a.0, b: b.0, m, k, n }))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(AutodiffError::dim("transpose", s, &[]));
        }
        let (rows, cols) = (s[0], s[1]);
        let data = transpose_raw(self.data(a), rows, cols);
        Ok(self.push_op(vec![cols, rows], data, &[a.0], Op::Transpose { a: a.0, rows, cols }))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.data(a).len() {
            return Err(AutodiffError::dim("reshape", self.shape(a), &shape));
        }
        let data = self.data(a).to_vec();
        Ok(self.push_op(shape, data, &[a.0], Op::Reshape { a: a.0 }))
    }

    fn as_rows(&self, v: Var) -> (usize, usize) {
        let s = self.shape(v);
        match s.len() {
            1 => (1, s[0]),
            _ => (s[..s.len() - 1].iter().product(), *s.last().unwrap()),
        }
    }

    /// Stack parts vertically. 1-D parts count as single rows; all parts must
    /// share the trailing width.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty());
        let (_, cols) = self.as_rows(parts[0]);
        let mut rows = Vec::with_capacity(parts.len());
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.as_rows(p);
            if c != cols {
                return Err(AutodiffError::dim("concat_rows", &[cols], self.shape(p)));
            }
            rows.push(r);
            data.extend_from_slice(self.data(p));
        }
        let total: usize = rows.iter().sum();
        let ids: Vec<usize> = parts.iter().map(|v| v.0).collect();
        Ok(self.push_op(
            vec![total, cols],
            data,
            &ids.clone(),
            Op::ConcatRows { parts: ids, rows, cols },
        ))
    }

    /// Concatenate parts along the trailing axis. All parts must share the
    /// leading row count (1-D parts count as single rows).
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty());
        let (rows, _) = self.as_rows(parts[0]);
        let mut cols = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.as_rows(p);
            if r != rows {
                return Err(AutodiffError::dim("concat_cols", self.shape(parts[0]), self.shape(p)));
            }
            cols.push(c);
        }
        let total: usize = cols.iter().sum();
        let mut data = vec![0.0; rows * total];
        let mut off = 0;
        for (pi, &p) in parts.iter().enumerate() {
            let c = cols[pi];
            let src = self.data(p);
            for r in 0..rows {
                data[r * total + off..r * total + off + c].copy_from_slice(&src[r * c..(r + 1) * c]);
            }
            off += c;
        }
        let ids: Vec<usize> = parts.iter().map(|v| v.0).collect();
        Ok(self.push_op(
            vec![rows, total],
            data,
            &ids.clone(),
            Op::ConcatCols { parts: ids, cols, rows },
        ))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.as_rows(a);
        if start + len > rows {
            return Err(AutodiffError::config(
                "slice_rows",
                format!("rows {start}..{} out of {rows}", start + len),
            ));
        }
        let data = self.data(a)[start * cols..(start + len) * cols].to_vec();
        Ok(self.push_op(
            vec![len, cols],
            data,
            &[a.0],
            Op::SliceRows { a: a.0, start, len, cols },
        ))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.as_rows(a);
        if start + len > cols {
            return Err(AutodiffError::config(
                "slice_cols",
                format!("cols {start}..{} out of {cols}", start + len),
            ));
        }
        let src = self.data(a);
        let mut data = vec![0.0; rows * len];
        for r in 0..rows {
            data[r * len..(r + 1) * len].copy_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        Ok(self.push_op(
            vec![rows, len],
            data,
            &[a.0],
            Op::SliceCols { a: a.0, start, len, in_cols: cols, rows },
        ))
    }

    /// Mean over the leading axis of a 2-D tensor, yielding `[cols]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(AutodiffError::dim("mean_rows", s, &[]));
        }
        let (rows, cols) = (s[0], s[1]);
        let src = self.data(a);
        let mut data = vec![0.0; cols];
        for r in 0..rows {
            for j in 0..cols {
                data[j] += src[r * cols + j];
            }
        }
        for v in &mut data {
            *v /= rows as f64;
        }
        Ok(self.push_op(vec![cols], data, &[a.0], Op::MeanRows { a: a.0, rows, cols }))
    }

    // ── nonlinearities ──────────────────────────────────────────────────

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let data = self
            .data(a)
            .iter()
            .map(|&x| match kind {
                Activation::Relu => {
                    if x > 0.0 {
                        x
                    } else {
                        0.0
                    }
                }
                Activation::Sigmoid => sigmoid(x),
                Activation::Tanh => x.tanh(),
            })
            .collect();
        self.push_op(self.shape(a).to_vec(), data, &[a.0], Op::Activation { a: a.0, kind })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    /// Numerically stable softmax along `axis`; every slice sums to 1.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() {
            return Err(AutodiffError::config(
                "softmax",
                format!("axis {axis} out of range for shape {s:?}"),
            ));
        }
        let outer: usize = s[..axis].iter().product();
        let len = s[axis];
        let inner: usize = s[axis + 1..].iter().product();
        let src = self.data(a);
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for l in 0..len {
                    mx = mx.max(src[base + l * inner]);
                }
                let mut sum = 0.0;
                for l in 0..len {
                    let e = (src[base + l * inner] - mx).exp();
                    data[base + l * inner] = e;
                    sum += e;
                }
                for l in 0..len {
                    data[base + l * inner] /= sum;
                }
            }
        }
        Ok(self.push_op(s, data, &[a.0], Op::Softmax { a: a.0, axis }))
    }

    /// Per-row standardization over the trailing axis with learned scale and
    /// shift, the pre-normalization used inside encoder blocks.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let width = *self.shape(a).last().unwrap();
        if self.shape(gamma) != [width] || self.shape(beta) != [width] {
            return Err(AutodiffError::dim("layer_norm", self.shape(a), self.shape(gamma)));
        }
        let rows = self.data(a).len() / width;
        let src = self.data(a);
        let g = self.data(gamma);
        let b = self.data(beta);
        let mut data = vec![0.0; src.len()];
        let mut means = Vec::with_capacity(rows);
        let mut inv_stds = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &src[r * width..(r + 1) * width];
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / width as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            for j in 0..width {
                data[r * width + j] = (row[j] - mean) * inv_std * g[j] + b[j];
            }
            means.push(mean);
            inv_stds.push(inv_std);
        }
        Ok(self.push_op(
            self.shape(a).to_vec(),
            data,
            &[a.0, gamma.0, beta.0],
            Op::LayerNorm { a: a.0, gamma: gamma.0, beta: beta.0, mean: means, inv_std: inv_stds, width },
        ))
    }

    /// Negative log-likelihood of `target` under softmax(logits), computed in
    /// log-space.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let s = self.shape(logits);
        if s.len() != 1 {
            return Err(AutodiffError::dim("cross_entropy", s, &[]));
        }
        let n = s[0];
        if target >= n {
            return Err(AutodiffError::IndexOutOfRange { index: target, n_classes: n });
        }
        let x = self.data(logits);
        let mx = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + x.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        let loss = lse - x[target];
        Ok(self.push_op(vec![1], vec![loss], &[logits.0], Op::CrossEntropy { logits: logits.0, target }))
    }

    /// Affine map over the trailing axis: `x W + b`. Accepts 1-D or n-D input.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(weight);
        if sw.len() != 2 || *sx.last().unwrap() != sw[0] {
            return Err(AutodiffError::dim("linear", &sx, sw));
        }
        let d_out = sw[1];
        let rows: usize = sx[..sx.len() - 1].iter().product();
        let flat = self.reshape(x, vec![rows.max(1), *sx.last().unwrap()])?;
        let prod = self.matmul(flat, weight)?;
        let biased = self.add_bias(prod, bias)?;
        let mut out_shape = sx;
        *out_shape.last_mut().unwrap() = d_out;
        self.reshape(biased, out_shape)
    }

    // ── volumetric ops ──────────────────────────────────────────────────

    /// Valid cross-correlation of a (C_in,D,H,W) input with a
    /// (C_out,C_in,kd,kh,kw) kernel over a zero-padded volume.
    pub fn conv3d(&mut self, input: Var, weight: Var, stride: [usize; 3], padding: [usize; 3]) -> Result<Var> {
        let si = self.shape(input);
        let sw = self.shape(weight);
        if si.len() != 4 || sw.len() != 5 || si[0] != sw[1] {
            return Err(AutodiffError::dim("conv3d", si, sw));
        }
        if stride.iter().any(|&s| s == 0) {
            return Err(AutodiffError::config("conv3d", format!("stride {stride:?} must be >= 1")));
        }
        let xs = [si[0], si[1], si[2], si[3]];
        let ws = [sw[0], sw[1], sw[2], sw[3], sw[4]];
        for (ax, (&ext, &k)) in si[1..].iter().zip(&sw[2..]).enumerate() {
            if volume::conv_out_extent(ext, k, stride[ax], padding[ax]).is_none() {
                return Err(AutodiffError::dim("conv3d", si, sw));
            }
        }
        let (data, os) = volume::conv3d_forward(self.data(input), xs, self.data(weight), ws, stride, padding);
        Ok(self.push_op(
            os.to_vec(),
            data,
            &[input.0, weight.0],
            Op::Conv3d { input: input.0, weight: weight.0, stride, padding },
        ))
    }

    /// Channel-wise normalization of a (C,D,H,W) volume.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
        mode: BnMode,
    ) -> Result<(Var, Option<BnBatchStats>)> {
        let s = self.shape(input);
        if s.len() != 4 {
            return Err(AutodiffError::dim("batch_norm", s, &[]));
        }
        let c_n = s[0];
        if self.shape(gamma) != [c_n] || self.shape(beta) != [c_n] {
            return Err(AutodiffError::dim("batch_norm", s, self.shape(gamma)));
        }
        let per = s[1] * s[2] * s[3];
        let xs = [s[0], s[1], s[2], s[3]];
        let (mean, var, train, stats) = match mode {
            BnMode::Train => {
                if per < 2 {
                    return Err(AutodiffError::config(
                        "batch_norm",
                        format!("train mode needs >= 2 elements per channel, got {per}"),
                    ));
                }
                let (m, v) = volume::channel_stats(self.data(input), xs);
                let stats = BnBatchStats { mean: m.clone(), var: v.clone() };
                (m, v, true, Some(stats))
            }
            BnMode::Eval { mean, var } => {
                if mean.len() != c_n || var.len() != c_n {
                    return Err(AutodiffError::dim("batch_norm", &[c_n], &[mean.len()]));
                }
                (mean, var, false, None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let x = self.data(input);
        let g = self.data(gamma);
        let b = self.data(beta);
        let mut data = vec![0.0; x.len()];
        for c in 0..c_n {
            let (m, is, gc, bc) = (mean[c], inv_std[c], g[c], b[c]);
            for i in 0..per {
                data[c * per + i] = (x[c * per + i] - m) * is * gc + bc;
            }
        }
        let out = self.push_op(
            s.to_vec(),
            data,
            &[input.0, gamma.0, beta.0],
            Op::BatchNorm { input: input.0, gamma: gamma.0, beta: beta.0, mean, inv_std, train },
        );
        Ok((out, stats))
    }

    /// Per-window maximum over a (C,D,H,W) volume; ties route to the first
    /// occurrence so backward is deterministic.
    pub fn max_pool3d(&mut self, input: Var, window: [usize; 3], stride: [usize; 3]) -> Result<Var> {
        let s = self.shape(input);
        if s.len() != 4 {
            return Err(AutodiffError::dim("max_pool3d", s, &[]));
        }
        if window.iter().zip(&s[1..]).any(|(&w, &ext)| w == 0 || w > ext) || stride.iter().any(|&st| st == 0) {
            return Err(AutodiffError::dim("max_pool3d", s, &window));
        }
        let xs = [s[0], s[1], s[2], s[3]];
        let (data, argmax, os) = volume::maxpool3d_forward(self.data(input), xs, window, stride);
        Ok(self.push_op(os.to_vec(), data, &[input.0], Op::MaxPool3d { input: input.0, argmax }))
    }

    /// Mean over D,H,W per channel: (C,D,H,W) -> [C].
    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let s = self.shape(input);
        if s.len() != 4 {
            return Err(AutodiffError::dim("global_avg_pool", s, &[]));
        }
        let xs = [s[0], s[1], s[2], s[3]];
        let data = volume::global_avg_pool_forward(self.data(input), xs);
        let per = s[1] * s[2] * s[3];
        Ok(self.push_op(vec![s[0]], data, &[input.0], Op::GlobalAvgPool { input: input.0, per_channel: per }))
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse-topological gradient accumulation from a scalar loss. Every
    /// requires_grad tensor on the graph ends up with a populated grad
    /// (zeros when the loss does not depend on it).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.nodes[loss.0].tensor.is_scalar() {
            return Err(AutodiffError::Usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        if self.nodes[loss.0].tensor.requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            self.nodes[i].tensor.grad = Some(g);
        }

        // Anything requiring grad that the loss never reached gets zeros.
        for node in &mut self.nodes {
            if node.tensor.requires_grad && node.tensor.grad.is_none() {
                node.tensor.grad = Some(vec![0.0; node.tensor.numel()]);
            }
        }
        Ok(())
    }

    fn wants(&self, idx: usize) -> bool {
        self.nodes[idx].tensor.requires_grad
    }

    fn acc(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut Vec<f64> {
        grads[idx].get_or_insert_with(|| vec![0.0; len])
    }

    fn add_into(grads: &mut [Option<Vec<f64>>], idx: usize, contribution: &[f64]) {
        let slot = Self::acc(grads, idx, contribution.len());
        for (s, c) in slot.iter_mut().zip(contribution) {
            *s += c;
        }
    }

    #[allow(clippy::too_many_lines)]
    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                if self.wants(*a) {
                    Self::add_into(grads, *a, g);
                }
                if self.wants(*b) {
                    Self::add_into(grads, *b, g);
                }
            }
            Op::Sub { a, b } => {
                if self.wants(*a) {
                    Self::add_into(grads, *a, g);
                }
                if self.wants(*b) {
                    let slot = Self::acc(grads, *b, g.len());
                    for (s, c) in slot.iter_mut().zip(g) {
                        *s -= c;
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.wants(*a) {
                    let bd = self.nodes[*b].tensor.data();
                    let slot = Self::acc(grads, *a, g.len());
                    for ((s, c), x) in slot.iter_mut().zip(g).zip(bd) {
                        *s += c * x;
                    }
                }
                if self.wants(*b) {
                    let ad = self.nodes[*a].tensor.data();
                    let slot = Self::acc(grads, *b, g.len());
                    for ((s, c), x) in slot.iter_mut().zip(g).zip(ad) {
                        *s += c * x;
                    }
                }
            }
            Op::Scale { a, c } => {
                if self.wants(*a) {
                    let slot = Self::acc(grads, *a, g.len());
                    for (s, gv) in slot.iter_mut().zip(g) {
                        *s += gv * c;
                    }
                }
            }
            Op::AddBias { a, bias, width } => {
                if self.wants(*a) {
                    Self::add_into(grads, *a, g);
                }
                if self.wants(*bias) {
                    let slot = Self::acc(grads, *bias, *width);
                    for (i, gv) in g.iter().enumerate() {
                        slot[i % width] += gv;
                    }
                }
            }
            Op::Matmul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                if self.wants(*a) {
                    let bt = transpose_raw(self.nodes[*b].tensor.data(), k, n);
                    let da = matmul_raw(g, &bt, m, n, k);
                    Self::add_into(grads, *a, &da);
                }
                if self.wants(*b) {
                    let at = transpose_raw(self.nodes[*a].tensor.data(), m, k);
                    let db = matmul_raw(&at, g, k, m, n);
                    Self::add_into(grads, *b, &db);
                }
            }
            Op::Transpose { a, rows, cols } => {
                if self.wants(*a) {
                    let da = transpose_raw(g, *cols, *rows);
                    Self::add_into(grads, *a, &da);
                }
            }
            Op::Reshape { a } => {
                if self.wants(*a) {
                    Self::add_into(grads, *a, g);
                }
            }
            Op::ConcatRows { parts, rows, cols } => {
                let mut off = 0;
                for (pi, &p) in parts.iter().enumerate() {
                    let len = rows[pi] * cols;
                    if self.wants(p) {
                        Self::add_into(grads, p, &g[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::ConcatCols { parts, cols, rows } => {
                let total: usize = cols.iter().sum();
                let mut off = 0;
                for (pi, &p) in parts.iter().enumerate() {
                    let c = cols[pi];
                    if self.wants(p) {
                        let slot = Self::acc(grads, p, rows * c);
                        for r in 0..*rows {
                            for j in 0..c {
                                slot[r * c + j] += g[r * total + off + j];
                            }
                        }
                    }
                    off += c;
                }
            }
            Op::SliceRows { a, start, len, cols } => {
                if self.wants(*a) {
                    let slot = Self::acc(grads, *a, self.nodes[*a].tensor.numel());
                    let off = start * cols;
                    for (s, gv) in slot[off..off + len * cols].iter_mut().zip(g) {
                        *s += gv;
                    }
                }
            }
            Op::SliceCols { a, start, len, in_cols, rows } => {
                if self.wants(*a) {
                    let slot = Self::acc(grads, *a, self.nodes[*a].tensor.numel());
                    for r in 0..*rows {
                        for j in 0..*len {
                            slot[r * in_cols + start + j] += g[r * len + j];
                        }
                    }
                }
            }
            Op::MeanRows { a, rows, cols } => {
                if self.wants(*a) {
                    let slot = Self::acc(grads, *a, rows * cols);
                    let inv = 1.0 / *rows as f64;
                    for r in 0..*rows {
                        for j in 0..*cols {
                            slot[r * cols + j] += g[j] * inv;
                        }
                    }
                }
            }
            Op::Activation { a, kind } => {
                if self.wants(*a) {
                    let y = self.nodes[i].tensor.data();
                    let slot = Self::acc(grads, *a, g.len());
                    match kind {
                        Activation::Relu => {
                            for ((s, gv), yv) in slot.iter_mut().zip(g).zip(y) {
                                if *yv > 0.0 {
                                    *s += gv;
                                }
                            }
                        }
                        Activation::Sigmoid => {
                            for ((s, gv), yv) in slot.iter_mut().zip(g).zip(y) {
                                *s += gv * yv * (1.0 - yv);
                            }
                        }
                        Activation::Tanh => {
                            for ((s, gv), yv) in slot.iter_mut().zip(g).zip(y) {
                                *s += gv * (1.0 - yv * yv);
                            }
                        }
                    }
                }
            }
            Op::Softmax { a, axis } => {
                if self.wants(*a) {
                    let y = self.nodes[i].tensor.data();
                    let s = self.nodes[i].tensor.shape();
                    let outer: usize = s[..*axis].iter().product();
                    let len = s[*axis];
                    let inner: usize = s[*axis + 1..].iter().product();
                    let slot = Self::acc(grads, *a, g.len());
                    for o in 0..outer {
                        for ii in 0..inner {
                            let base = o * len * inner + ii;
                            let mut dot = 0.0;
                            for l in 0..len {
                                let idx = base + l * inner;
                                dot += g[idx] * y[idx];
                            }
                            for l in 0..len {
                                let idx = base + l * inner;
                                slot[idx] += y[idx] * (g[idx] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { a, gamma, beta, mean, inv_std, width } => {
                let x = self.nodes[*a].tensor.data();
                let gm = self.nodes[*gamma].tensor.data();
                let w = *width;
                let rows = x.len() / w;
                if self.wants(*a) {
                    let mut da = vec![0.0; x.len()];
                    for r in 0..rows {
                        let (m, is) = (mean[r], inv_std[r]);
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..w {
                            let xhat = (x[r * w + j] - m) * is;
                            let dxhat = g[r * w + j] * gm[j];
                            m1 += dxhat;
                            m2 += dxhat * xhat;
                        }
                        m1 /= w as f64;
                        m2 /= w as f64;
                        for j in 0..w {
                            let xhat = (x[r * w + j] - m) * is;
                            let dxhat = g[r * w + j] * gm[j];
                            da[r * w + j] = is * (dxhat - m1 - xhat * m2);
                        }
                    }
                    Self::add_into(grads, *a, &da);
                }
                if self.wants(*gamma) {
                    let slot = Self::acc(grads, *gamma, w);
                    for r in 0..rows {
                        let (m, is) = (mean[r], inv_std[r]);
                        for j in 0..w {
                            slot[j] += g[r * w + j] * (x[r * w + j] - m) * is;
                        }
                    }
                }
                if self.wants(*beta) {
                    let slot = Self::acc(grads, *beta, w);
                    for r in 0..rows {
                        for j in 0..w {
                            slot[j] += g[r * w + j];
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, target } => {
                if self.wants(*logits) {
                    let x = self.nodes[*logits].tensor.data();
                    let mx = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = x.iter().map(|v| (v - mx).exp()).sum();
                    let gl = g[0];
                    let slot = Self::acc(grads, *logits, x.len());
                    for (j, s) in slot.iter_mut().enumerate() {
                        let p = (x[j] - mx).exp() / sum;
                        *s += gl * (p - if j == *target { 1.0 } else { 0.0 });
                    }
                }
            }
            Op::Conv3d { input, weight, stride, padding } => {
                let si = self.nodes[*input].tensor.shape();
                let sw = self.nodes[*weight].tensor.shape();
                let so = self.nodes[i].tensor.shape();
                let xs = [si[0], si[1], si[2], si[3]];
                let ws = [sw[0], sw[1], sw[2], sw[3], sw[4]];
                let os = [so[0], so[1], so[2], so[3]];
                let need_dx = self.wants(*input);
                let (dx, dw) = volume::conv3d_backward(
                    self.nodes[*input].tensor.data(),
                    xs,
                    self.nodes[*weight].tensor.data(),
                    ws,
                    *stride,
                    *padding,
                    g,
                    os,
                    need_dx,
                );
                if need_dx {
                    Self::add_into(grads, *input, &dx);
                }
                if self.wants(*weight) {
                    Self::add_into(grads, *weight, &dw);
                }
            }
            Op::BatchNorm { input, gamma, beta, mean, inv_std, train } => {
                let x = self.nodes[*input].tensor.data();
                let s = self.nodes[*input].tensor.shape();
                let c_n = s[0];
                let per = s[1] * s[2] * s[3];
                let gm = self.nodes[*gamma].tensor.data();
                if self.wants(*input) {
                    let mut dx = vec![0.0; x.len()];
                    for c in 0..c_n {
                        let (m, is, gc) = (mean[c], inv_std[c], gm[c]);
                        if *train {
                            let mut m1 = 0.0;
                            let mut m2 = 0.0;
                            for i2 in 0..per {
                                let xhat = (x[c * per + i2] - m) * is;
                                let dxhat = g[c * per + i2] * gc;
                                m1 += dxhat;
                                m2 += dxhat * xhat;
                            }
                            m1 /= per as f64;
                            m2 /= per as f64;
                            for i2 in 0..per {
                                let xhat = (x[c * per + i2] - m) * is;
                                let dxhat = g[c * per + i2] * gc;
                                dx[c * per + i2] = is * (dxhat - m1 - xhat * m2);
                            }
                        } else {
                            for i2 in 0..per {
                                dx[c * per + i2] = g[c * per + i2] * gc * is;
                            }
                        }
                    }
                    Self::add_into(grads, *input, &dx);
                }
                if self.wants(*gamma) {
                    let slot = Self::acc(grads, *gamma, c_n);
                    for c in 0..c_n {
                        let (m, is) = (mean[c], inv_std[c]);
                        for i2 in 0..per {
                            slot[c] += g[c * per + i2] * (x[c * per + i2] - m) * is;
                        }
                    }
                }
                if self.wants(*beta) {
                    let slot = Self::acc(grads, *beta, c_n);
                    for c in 0..c_n {
                        for i2 in 0..per {
                            slot[c] += g[c * per + i2];
                        }
                    }
                }
            }
            Op::MaxPool3d { input, argmax } => {
                if self.wants(*input) {
                    let slot = Self::acc(grads, *input, self.nodes[*input].tensor.numel());
                    for (o, &src) in argmax.iter().enumerate() {
                        slot[src] += g[o];
                    }
                }
            }
            Op::GlobalAvgPool { input, per_channel } => {
                if self.wants(*input) {
                    let slot = Self::acc(grads, *input, self.nodes[*input].tensor.numel());
                    let inv = 1.0 / *per_channel as f64;
                    for (c, gv) in g.iter().enumerate() {
                        for s in &mut slot[c * per_channel..(c + 1) * per_channel] {
                            *s += gv * inv;
                        }
                    }
                }
            }
        }
    }
}
