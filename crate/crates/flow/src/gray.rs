use crate::error::{FlowError, Result};

/// Single-channel image, row-major. Video intensities are expected in [0, 1],
/// but the range is not enforced so the expansion and flow stages can also run
/// on synthetic calibration surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    intensities: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FlowError::usage("gray frame: zero extent"));
        }
        if intensities.len() != width * height {
            return Err(FlowError::usage(format!(
                "gray frame: {} intensities for {}x{} frame",
                intensities.len(),
                width,
                height
            )));
        }
        if !intensities.iter().all(|v| v.is_finite()) {
            return Err(FlowError::usage("gray frame: non-finite intensity"));
        }
        Ok(GrayFrame { width, height, intensities })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel, x being the column.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x as f64, y as f64));
            }
        }
        GrayFrame::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.intensities[y * self.width + x]
    }
}

/// Samples `plane` at fractional coordinates with bilinear interpolation.
/// Coordinates are clamped to the valid rectangle first, which replicates
/// edge pixels for out-of-range requests.
pub(crate) fn sample_bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = plane[y0 * width + x0] * (1.0 - fx) + plane[y0 * width + x1] * fx;
    let bot = plane[y1 * width + x0] * (1.0 - fx) + plane[y1 * width + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Symmetric 1-D Gaussian taps for radius `r`, normalized to unit sum.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        k.push((-d * d / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with edge replication.
pub(crate) fn gaussian_blur(frame: &GrayFrame, sigma: f64) -> GrayFrame {
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (w, h) = (frame.width, frame.height);
    let src = &frame.intensities;

    let mut horiz = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                acc += kv * src[y * w + sx as usize];
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let sy = (y as isize + i as isize - radius as isize).clamp(0, h as isize - 1);
                acc += kv * horiz[sy as usize * w + x];
            }
            out[y * w + x] = acc;
        }
    }

    GrayFrame { width: w, height: h, intensities: out }
}

/// Anti-aliased shrink: Gaussian blur matched to the scale factor, then
/// bilinear resampling on half-pixel centers. Each output extent is
/// `round(extent * scale)` and must come out at least 8 pixels.
pub fn downsample(frame: &GrayFrame, scale: f64) -> Result<GrayFrame> {
    if !(scale > 0.0 && scale < 1.0) {
        return Err(FlowError::config("downsample", format!("scale {scale} not in (0, 1)")));
    }
    let out_w = (frame.width as f64 * scale).round() as usize;
    let out_h = (frame.height as f64 * scale).round() as usize;
    if out_w < 8 || out_h < 8 {
        return Err(FlowError::config(
            "downsample",
            format!("result {out_w}x{out_h} is smaller than 8 pixels"),
        ));
    }

    // Smoothing proportional to the sampling step keeps the resample alias-free.
    let sigma = 0.5 * (1.0 / (scale * scale) - 1.0).sqrt();
    let blurred = gaussian_blur(frame, sigma);

    let sx = frame.width as f64 / out_w as f64;
    let sy = frame.height as f64 / out_h as f64;
    let mut out = vec![0.0; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            out[y * out_w + x] =
                sample_bilinear(&blurred.intensities, frame.width, frame.height, src_x, src_y);
        }
    }
    Ok(GrayFrame { width: out_w, height: out_h, intensities: out })
}
