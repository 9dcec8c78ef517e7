//! Raw numeric kernels for volumetric (C,D,H,W) operations. Forward and
//! backward pairs live side by side so the index arithmetic stays in sync.

/// Output extent of a strided cross-correlation along one axis.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if kernel > padded || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Valid cross-correlation of a zero-padded (C_in,D,H,W) volume with a
/// (C_out,C_in,kd,kh,kw) kernel. Returns the output buffer and its shape.
pub fn conv3d_forward(
    x: &[f64],
    xs: [usize; 4],
    w: &[f64],
    ws: [usize; 5],
    stride: [usize; 3],
    pad: [usize; 3],
) -> (Vec<f64>, [usize; 4]) {
    let [ci_n, d, h, wd] = xs;
    let [co_n, _, kd, kh, kw] = ws;
    let od_n = conv_out_extent(d, kd, stride[0], pad[0]).unwrap();
    let oh_n = conv_out_extent(h, kh, stride[1], pad[1]).unwrap();
    let ow_n = conv_out_extent(wd, kw, stride[2], pad[2]).unwrap();
    let mut out = vec![0.0; co_n * od_n * oh_n * ow_n];

    for co in 0..co_n {
        for od in 0..od_n {
            for oh in 0..oh_n {
                let out_base = ((co * od_n + od) * oh_n + oh) * ow_n;
                for ow in 0..ow_n {
                    let mut acc = 0.0;
                    for ci in 0..ci_n {
                        for fd in 0..kd {
                            let id = (od * stride[0] + fd) as isize - pad[0] as isize;
                            if id < 0 || id as usize >= d {
                                continue;
                            }
                            for fh in 0..kh {
                                let ih = (oh * stride[1] + fh) as isize - pad[1] as isize;
                                if ih < 0 || ih as usize >= h {
                                    continue;
                                }
                                let x_base = ((ci * d + id as usize) * h + ih as usize) * wd;
                                let w_base = (((co * ci_n + ci) * kd + fd) * kh + fh) * kw;
                                for fw in 0..kw {
                                    let iw = (ow * stride[2] + fw) as isize - pad[2] as isize;
                                    if iw < 0 || iw as usize >= wd {
                                        continue;
                                    }
                                    acc += x[x_base + iw as usize] * w[w_base + fw];
                                }
                            }
                        }
                    }
                    out[out_base + ow] = acc;
                }
            }
        }
    }
    (out, [co_n, od_n, oh_n, ow_n])
}

/// Gradients of `conv3d_forward` w.r.t. input and weight.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_backward(
    x: &[f64],
    xs: [usize; 4],
    w: &[f64],
    ws: [usize; 5],
    stride: [usize; 3],
    pad: [usize; 3],
    g_out: &[f64],
    os: [usize; 4],
    need_dx: bool,
) -> (Vec<f64>, Vec<f64>) {
    let [ci_n, d, h, wd] = xs;
    let [co_n, _, kd, kh, kw] = ws;
    let [_, od_n, oh_n, ow_n] = os;
    let mut dx = vec![0.0; if need_dx { x.len() } else { 0 }];
    let mut dw = vec![0.0; w.len()];

    for co in 0..co_n {
        for od in 0..od_n {
            for oh in 0..oh_n {
                let out_base = ((co * od_n + od) * oh_n + oh) * ow_n;
                for ow in 0..ow_n {
                    let g = g_out[out_base + ow];
                    if g == 0.0 {
                        continue;
                    }
                    for ci in 0..ci_n {
                        for fd in 0..kd {
                            let id = (od * stride[0] + fd) as isize - pad[0] as isize;
                            if id < 0 || id as usize >= d {
                                continue;
                            }
                            for fh in 0..kh {
                                let ih = (oh * stride[1] + fh) as isize - pad[1] as isize;
                                if ih < 0 || ih as usize >= h {
                                    continue;
                                }
                                let x_base = ((ci * d + id as usize) * h + ih as usize) * wd;
                                let w_base = (((co * ci_n + ci) * kd + fd) * kh + fh) * kw;
                                for fw in 0..kw {
                                    let iw = (ow * stride[2] + fw) as isize - pad[2] as isize;
                                    if iw < 0 || iw as usize >= wd {
                                        continue;
                                    }
                                    dw[w_base + fw] += g * x[x_base + iw as usize];
                                    if need_dx {
                                        dx[x_base + iw as usize] += g * w[w_base + fw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// Per-window maximum over a (C,D,H,W) volume without padding. Also returns
/// the flat input index of each window's maximum; ties go to the first
/// (lowest linear index) occurrence so backward is deterministic.
pub fn maxpool3d_forward(
    x: &[f64],
    xs: [usize; 4],
    window: [usize; 3],
    stride: [usize; 3],
) -> (Vec<f64>, Vec<usize>, [usize; 4]) {
    let [c_n, d, h, wd] = xs;
    let od_n = conv_out_extent(d, window[0], stride[0], 0).unwrap();
    let oh_n = conv_out_extent(h, window[1], stride[1], 0).unwrap();
    let ow_n = conv_out_extent(wd, window[2], stride[2], 0).unwrap();
    let n_out = c_n * od_n * oh_n * ow_n;
    let mut out = vec![0.0; n_out];
    let mut argmax = vec![0usize; n_out];

    let mut o = 0;
    for c in 0..c_n {
        for od in 0..od_n {
            for oh in 0..oh_n {
                for ow in 0..ow_n {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for fd in 0..window[0] {
                        let id = od * stride[0] + fd;
                        for fh in 0..window[1] {
                            let ih = oh * stride[1] + fh;
                            let base = ((c * d + id) * h + ih) * wd + ow * stride[2];
                            for fw in 0..window[2] {
                                let v = x[base + fw];
                                if v > best {
                                    best = v;
                                    best_idx = base + fw;
                                }
                            }
                        }
                    }
                    out[o] = best;
                    argmax[o] = best_idx;
                    o += 1;
                }
            }
        }
    }
    (out, argmax, [c_n, od_n, oh_n, ow_n])
}

/// Mean over the D,H,W axes of a (C,D,H,W) volume, one value per channel.
pub fn global_avg_pool_forward(x: &[f64], xs: [usize; 4]) -> Vec<f64> {
    let [c_n, d, h, w] = xs;
    let per = d * h * w;
    (0..c_n)
        .map(|c| x[c * per..(c + 1) * per].iter().sum::<f64>() / per as f64)
        .collect()
}

/// Per-channel mean and (biased) variance over the D,H,W axes.
pub fn channel_stats(x: &[f64], xs: [usize; 4]) -> (Vec<f64>, Vec<f64>) {
    let [c_n, d, h, w] = xs;
    let per = (d * h * w) as f64;
    let mut mean = Vec::with_capacity(c_n);
    let mut var = Vec::with_capacity(c_n);
    for c in 0..c_n {
        let slice = &x[c * (d * h * w)..(c + 1) * (d * h * w)];
        let m = slice.iter().sum::<f64>() / per;
        let v = slice.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / per;
        mean.push(m);
        var.push(v);
    }
    (mean, var)
}
