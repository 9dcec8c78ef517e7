use nalgebra::SMatrix;

use crate::error::{FlowError, Result};
use crate::gray::GrayFrame;

/// Per-pixel quadratic model of the local intensity surface:
/// f(p + d) ~ d'Ad + b'd + c with symmetric A = [[a11, a12], [a12, a22]].
/// All planes are row-major and match the source frame extents.
#[derive(Debug, Clone)]
pub struct PolyExpansion {
    pub width: usize,
    pub height: usize,
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub c: Vec<f64>,
}

impl PolyExpansion {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        PolyExpansion {
            width,
            height,
            a11: vec![0.0; n],
            a12: vec![0.0; n],
            a22: vec![0.0; n],
            b1: vec![0.0; n],
            b2: vec![0.0; n],
            c: vec![0.0; n],
        }
    }
}

/// Basis evaluated at window offset (x, y): [1, x, y, x^2, y^2, xy].
const BASIS: usize = 6;

fn basis_at(x: f64, y: f64) -> [f64; BASIS] {
    [1.0, x, y, x * x, y * y, x * y]
}

/// Inverse of the Gaussian-weighted normal matrix M_ij = sum w(d) phi_i phi_j
/// over the window. M depends only on the window geometry, so it is computed
/// and inverted once per expansion call.
fn normal_matrix_inverse(radius: usize, weights: &[f64]) -> Result<SMatrix<f64, BASIS, BASIS>> {
    let mut m = SMatrix::<f64, BASIS, BASIS>::zeros();
    for ty in 0..weights.len() {
        let y = ty as f64 - radius as f64;
        for tx in 0..weights.len() {
            let x = tx as f64 - radius as f64;
            let w = weights[ty] * weights[tx];
            let phi = basis_at(x, y);
            for i in 0..BASIS {
                for j in 0..BASIS {
                    m[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
    }
    m.try_inverse()
        .ok_or_else(|| FlowError::config("poly_expansion", "degenerate window weighting"))
}

/// Fits the quadratic model around every pixel by Gaussian-weighted least
/// squares over a `poly_n` x `poly_n` window, replicating edge pixels where
/// the window leaves the frame. The six weighted correlations are separable,
/// so the fit costs two 1-D passes per pixel.
pub fn poly_expansion(frame: &GrayFrame, poly_n: usize, poly_sigma: f64) -> Result<PolyExpansion> {
    if poly_n < 3 || poly_n % 2 == 0 {
        return Err(FlowError::config("poly_expansion", format!("poly_n {poly_n} must be odd and >= 3")));
    }
    if !(poly_sigma > 0.0) {
        return Err(FlowError::config("poly_expansion", format!("poly_sigma {poly_sigma} must be positive")));
    }
    let (w, h) = (frame.width(), frame.height());
    if w <= poly_n || h <= poly_n {
        return Err(FlowError::config(
            "poly_expansion",
            format!("frame {w}x{h} too small for window {poly_n}"),
        ));
    }

    let radius = poly_n / 2;
    let mut g = Vec::with_capacity(poly_n);
    for i in 0..poly_n {
        let d = i as f64 - radius as f64;
        g.push((-d * d / (2.0 * poly_sigma * poly_sigma)).exp());
    }

    let m_inv = normal_matrix_inverse(radius, &g)?;

    // Vertical pass: correlate each column with g, g*t, g*t^2.
    let src = frame.intensities();
    let n = w * h;
    let mut s0 = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
            for (i, &gv) in g.iter().enumerate() {
                let t = i as f64 - radius as f64;
                let sy = (y as isize + i as isize - radius as isize).clamp(0, h as isize - 1);
                let v = gv * src[sy as usize * w + x];
                a0 += v;
                a1 += v * t;
                a2 += v * t * t;
            }
            let idx = y * w + x;
            s0[idx] = a0;
            s1[idx] = a1;
            s2[idx] = a2;
        }
    }

    // Horizontal pass turns the column sums into the six basis projections,
    // then the precomputed inverse maps projections to coefficients.
    let mut out = PolyExpansion::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut p = [0.0; BASIS];
            for (i, &gv) in g.iter().enumerate() {
                let u = i as f64 - radius as f64;
                let sx = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                let idx = y * w + sx as usize;
                p[0] += gv * s0[idx];
                p[1] += gv * u * s0[idx];
                p[2] += gv * s1[idx];
                p[3] += gv * u * u * s0[idx];
                p[4] += gv * s2[idx];
                p[5] += gv * u * s1[idx];
            }
            let mut coef = [0.0; BASIS];
            for i in 0..BASIS {
                let mut acc = 0.0;
                for j in 0..BASIS {
                    acc += m_inv[(i, j)] * p[j];
                }
                coef[i] = acc;
            }
            let idx = y * w + x;
            out.c[idx] = coef[0];
            out.b1[idx] = coef[1];
            out.b2[idx] = coef[2];
            out.a11[idx] = coef[3];
            out.a22[idx] = coef[4];
            // The xy coefficient covers both off-diagonal slots of A.
            out.a12[idx] = coef[5] / 2.0;
        }
    }
    Ok(out)
}
