use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{FlowError, Result};
use crate::gray::{downsample, sample_bilinear, GrayFrame};
use crate::poly::{poly_expansion, PolyExpansion};

/// Dense displacement field. `u` is horizontal motion in pixels (positive
/// right), `v` vertical (positive down), both row-major over the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField { width, height, u: vec![0.0; width * height], v: vec![0.0; width * height] }
    }

    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(FlowError::usage(format!(
                "flow field: {}/{} components for {}x{}",
                u.len(),
                v.len(),
                width,
                height
            )));
        }
        Ok(FlowField { width, height, u, v })
    }

    /// Largest displacement magnitude in the field.
    pub fn max_magnitude(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&u, &v)| (u * u + v * v).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Farneback solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub window_size: usize,
    pub iterations: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            window_size: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels == 0 {
            return Err(FlowError::config("flow config", "pyramid_levels must be at least 1"));
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(FlowError::config(
                "flow config",
                format!("pyramid_scale {} not in (0, 1)", self.pyramid_scale),
            ));
        }
        if self.window_size < 3 || self.window_size % 2 == 0 {
            return Err(FlowError::config(
                "flow config",
                format!("window_size {} must be odd and >= 3", self.window_size),
            ));
        }
        if self.iterations == 0 {
            return Err(FlowError::config("flow config", "iterations must be at least 1"));
        }
        if self.poly_n < 3 || self.poly_n % 2 == 0 {
            return Err(FlowError::config(
                "flow config",
                format!("poly_n {} must be odd and >= 3", self.poly_n),
            ));
        }
        if !(self.poly_sigma > 0.0) {
            return Err(FlowError::config(
                "flow config",
                format!("poly_sigma {} must be positive", self.poly_sigma),
            ));
        }
        Ok(())
    }
}

/// Uniform box sum over a window of `radius`, edges replicated, separable.
fn box_sum(plane: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut horiz = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for i in -r..=r {
                let sx = (x as isize + i).clamp(0, width as isize - 1);
                acc += plane[y * width + sx as usize];
            }
            horiz[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for i in -r..=r {
                let sy = (y as isize + i).clamp(0, height as isize - 1);
                acc += horiz[sy as usize * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// One flow refinement from a pair of polynomial expansions.
///
/// Each pass warps the second expansion by the current flow (bilinear sampling
/// of the coefficient planes, edges replicated), forms the averaged quadratic
/// A = (A1 + A2)/2 and db = -(b2 - b1)/2 per pixel, aggregates G = sum A'A and
/// h = sum A'db over a uniform window, and adds the 2x2 solution G^-1 h to the
/// flow. Pixels whose G determinant falls below 1e-12 keep their prior value.
/// The warp must stay continuous: rounding it would leak the prior's
/// quantization into the solved total.
pub fn displacement_step(
    exp1: &PolyExpansion,
    exp2: &PolyExpansion,
    prior: &FlowField,
    window_size: usize,
    iterations: usize,
) -> Result<FlowField> {
    let (w, h) = (exp1.width, exp1.height);
    if exp2.width != w || exp2.height != h {
        return Err(FlowError::usage(format!(
            "displacement step: expansions {}x{} vs {}x{}",
            w, h, exp2.width, exp2.height
        )));
    }
    if prior.width != w || prior.height != h {
        return Err(FlowError::usage(format!(
            "displacement step: prior {}x{} for {}x{} expansions",
            prior.width, prior.height, w, h
        )));
    }
    if window_size < 3 || window_size % 2 == 0 {
        return Err(FlowError::config(
            "displacement step",
            format!("window_size {window_size} must be odd and >= 3"),
        ));
    }
    if iterations == 0 {
        return Err(FlowError::config("displacement step", "iterations must be at least 1"));
    }

    let radius = window_size / 2;
    let n = w * h;
    let mut flow = prior.clone();

    for _ in 0..iterations {
        let mut g11 = vec![0.0; n];
        let mut g12 = vec![0.0; n];
        let mut g22 = vec![0.0; n];
        let mut h1 = vec![0.0; n];
        let mut h2 = vec![0.0; n];

        for y in 0..h {
            for x in 0..w {
                let idx = y * w + x;
                let wx = x as f64 + flow.u[idx];
                let wy = y as f64 + flow.v[idx];
                let a11 = 0.5 * (exp1.a11[idx] + sample_bilinear(&exp2.a11, w, h, wx, wy));
                let a12 = 0.5 * (exp1.a12[idx] + sample_bilinear(&exp2.a12, w, h, wx, wy));
                let a22 = 0.5 * (exp1.a22[idx] + sample_bilinear(&exp2.a22, w, h, wx, wy));
                let db1 = -0.5 * (sample_bilinear(&exp2.b1, w, h, wx, wy) - exp1.b1[idx]);
                let db2 = -0.5 * (sample_bilinear(&exp2.b2, w, h, wx, wy) - exp1.b2[idx]);
                g11[idx] = a11 * a11 + a12 * a12;
                g12[idx] = a11 * a12 + a12 * a22;
                g22[idx] = a12 * a12 + a22 * a22;
                h1[idx] = a11 * db1 + a12 * db2;
                h2[idx] = a12 * db1 + a22 * db2;
            }
        }

        let g11 = box_sum(&g11, w, h, radius);
        let g12 = box_sum(&g12, w, h, radius);
        let g22 = box_sum(&g22, w, h, radius);
        let h1 = box_sum(&h1, w, h, radius);
        let h2 = box_sum(&h2, w, h, radius);

        let mut next = flow.clone();
        for idx in 0..n {
            let det = g11[idx] * g22[idx] - g12[idx] * g12[idx];
            if det < 1e-12 {
                continue;
            }
            next.u[idx] += (g22[idx] * h1[idx] - g12[idx] * h2[idx]) / det;
            next.v[idx] += (g11[idx] * h2[idx] - g12[idx] * h1[idx]) / det;
        }
        flow = next;
    }
    Ok(flow)
}

/// Bilinear flow resize; displacement components are rescaled by the exact
/// per-axis extent ratios so motion keeps its magnitude in the new pixel grid.
fn upscale_flow(flow: &FlowField, out_w: usize, out_h: usize) -> FlowField {
    let sx = flow.width as f64 / out_w as f64;
    let sy = flow.height as f64 / out_h as f64;
    let ku = out_w as f64 / flow.width as f64;
    let kv = out_h as f64 / flow.height as f64;
    let mut out = FlowField::zeros(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            let idx = y * out_w + x;
            out.u[idx] = ku * sample_bilinear(&flow.u, flow.width, flow.height, src_x, src_y);
            out.v[idx] = kv * sample_bilinear(&flow.v, flow.width, flow.height, src_x, src_y);
        }
    }
    out
}

/// Dense optical flow from `frame1` to `frame2` by coarse-to-fine polynomial
/// expansion matching. The pyramid holds at most `pyramid_levels` levels; it
/// stops early once another downsample would drop below 8 pixels or below the
/// expansion window, so small frames degrade to fewer levels rather than
/// erroring. The coarsest level starts from zero flow and each finer level is
/// seeded with the upscaled previous estimate.
pub fn farneback(frame1: &GrayFrame, frame2: &GrayFrame, config: &FlowConfig) -> Result<FlowField> {
    if frame1.width() != frame2.width() || frame1.height() != frame2.height() {
        return Err(FlowError::usage(format!(
            "farneback: frames {}x{} vs {}x{}",
            frame1.width(),
            frame1.height(),
            frame2.width(),
            frame2.height()
        )));
    }
    config.validate()?;

    let mut pyramid = vec![(frame1.clone(), frame2.clone())];
    while pyramid.len() < config.pyramid_levels {
        let (prev1, prev2) = pyramid.last().unwrap();
        let next_w = (prev1.width() as f64 * config.pyramid_scale).round() as usize;
        let next_h = (prev1.height() as f64 * config.pyramid_scale).round() as usize;
        if next_w < 8 || next_h < 8 || next_w <= config.poly_n || next_h <= config.poly_n {
            break;
        }
        let down1 = downsample(prev1, config.pyramid_scale)?;
        let down2 = downsample(prev2, config.pyramid_scale)?;
        pyramid.push((down1, down2));
    }

    let mut flow: Option<FlowField> = None;
    for (f1, f2) in pyramid.iter().rev() {
        let exp1 = poly_expansion(f1, config.poly_n, config.poly_sigma)?;
        let exp2 = poly_expansion(f2, config.poly_n, config.poly_sigma)?;
        let prior = match flow {
            Some(coarse) => upscale_flow(&coarse, f1.width(), f1.height()),
            None => FlowField::zeros(f1.width(), f1.height()),
        };
        flow = Some(displacement_step(&exp1, &exp2, &prior, config.window_size, config.iterations)?);
    }
    Ok(flow.expect("pyramid holds at least the input level"))
}

const FLOW_MAGIC: &[u8; 4] = b"MMF1";

/// Writes a flow field: magic, u32 width, u32 height, then the u plane and
/// the v plane as little-endian f32.
pub fn write_flow(path: &Path, flow: &FlowField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FLOW_MAGIC)?;
    out.write_all(&(flow.width as u32).to_le_bytes())?;
    out.write_all(&(flow.height as u32).to_le_bytes())?;
    for plane in [&flow.u, &flow.v] {
        for &value in plane.iter() {
            out.write_all(&(value as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    let display = path.display().to_string();
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| FlowError::format(&display, "missing magic"))?;
    if &magic != FLOW_MAGIC {
        return Err(FlowError::format(&display, "bad magic, expected MMF1"));
    }
    let mut word = [0u8; 4];
    input
        .read_exact(&mut word)
        .map_err(|_| FlowError::format(&display, "truncated header"))?;
    let width = u32::from_le_bytes(word) as usize;
    input
        .read_exact(&mut word)
        .map_err(|_| FlowError::format(&display, "truncated header"))?;
    let height = u32::from_le_bytes(word) as usize;
    if width == 0 || height == 0 {
        return Err(FlowError::format(&display, "zero extent"));
    }

    let n = width * height;
    let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for plane in &mut planes {
        for _ in 0..n {
            input
                .read_exact(&mut word)
                .map_err(|_| FlowError::format(&display, "truncated payload"))?;
            let value = f32::from_le_bytes(word) as f64;
            if !value.is_finite() {
                return Err(FlowError::format(&display, "non-finite component"));
            }
            plane.push(value);
        }
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(FlowError::format(&display, "trailing bytes after payload"));
    }
    let [u, v] = planes;
    FlowField::new(width, height, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_expansion(w: usize, h: usize, a: [f64; 3], b: [f64; 2]) -> PolyExpansion {
        let mut e = PolyExpansion::zeros(w, h);
        e.a11.fill(a[0]);
        e.a12.fill(a[1]);
        e.a22.fill(a[2]);
        e.b1.fill(b[0]);
        e.b2.fill(b[1]);
        e
    }

    #[test]
    fn identity_quadratic_solves_planted_shift() {
        // A = I and db = (2, 0) everywhere: G = N*I, h = N*(2, 0), d = (2, 0).
        let e1 = constant_expansion(20, 20, [1.0, 0.0, 1.0], [0.0, 0.0]);
        let e2 = constant_expansion(20, 20, [1.0, 0.0, 1.0], [-4.0, 0.0]);
        let flow =
            displacement_step(&e1, &e2, &FlowField::zeros(20, 20), 5, 1).unwrap();
        for idx in 0..400 {
            assert!((flow.u[idx] - 2.0).abs() < 1e-9, "u = {}", flow.u[idx]);
            assert!(flow.v[idx].abs() < 1e-9);
        }
    }

    #[test]
    fn identical_expansions_give_zero_flow() {
        let e = constant_expansion(16, 16, [0.7, 0.1, 0.9], [0.3, -0.2]);
        let flow = displacement_step(&e, &e, &FlowField::zeros(16, 16), 5, 3).unwrap();
        for idx in 0..256 {
            assert!(flow.u[idx].abs() < 1e-8);
            assert!(flow.v[idx].abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_windows_keep_the_prior() {
        // Zero A means G is singular at every pixel, so the prior survives.
        let e1 = constant_expansion(12, 12, [0.0, 0.0, 0.0], [0.0, 0.0]);
        let e2 = constant_expansion(12, 12, [0.0, 0.0, 0.0], [5.0, 5.0]);
        let mut prior = FlowField::zeros(12, 12);
        prior.u.fill(1.25);
        prior.v.fill(-0.5);
        let flow = displacement_step(&e1, &e2, &prior, 5, 2).unwrap();
        assert_eq!(flow, prior);
    }

    #[test]
    fn mismatched_inputs_are_usage_errors() {
        let e1 = constant_expansion(12, 12, [1.0, 0.0, 1.0], [0.0, 0.0]);
        let e2 = constant_expansion(10, 12, [1.0, 0.0, 1.0], [0.0, 0.0]);
        let err =
            displacement_step(&e1, &e2, &FlowField::zeros(12, 12), 5, 1).unwrap_err();
        assert!(matches!(err, FlowError::Usage(_)));

        let f1 = GrayFrame::from_fn(16, 16, |x, _| x).unwrap();
        let f2 = GrayFrame::from_fn(16, 18, |x, _| x).unwrap();
        let err = farneback(&f1, &f2, &FlowConfig::default()).unwrap_err();
        assert!(matches!(err, FlowError::Usage(_)));
    }

    #[test]
    fn config_validation_covers_every_field() {
        let base = FlowConfig::default();
        assert!(base.validate().is_ok());
        for bad in [
            FlowConfig { pyramid_levels: 0, ..base.clone() },
            FlowConfig { pyramid_scale: 0.0, ..base.clone() },
            FlowConfig { pyramid_scale: 1.0, ..base.clone() },
            FlowConfig { window_size: 4, ..base.clone() },
            FlowConfig { window_size: 1, ..base.clone() },
            FlowConfig { iterations: 0, ..base.clone() },
            FlowConfig { poly_n: 6, ..base.clone() },
            FlowConfig { poly_sigma: -1.0, ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn upscale_doubles_displacements_with_extents() {
        let mut coarse = FlowField::zeros(8, 8);
        coarse.u.fill(1.5);
        coarse.v.fill(-0.75);
        let fine = upscale_flow(&coarse, 16, 16);
        assert_eq!((fine.width, fine.height), (16, 16));
        for idx in 0..256 {
            assert!((fine.u[idx] - 3.0).abs() < 1e-12);
            assert!((fine.v[idx] + 1.5).abs() < 1e-12);
        }
    }
}
