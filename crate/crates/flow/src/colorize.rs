use crate::error::{FlowError, Result};
use crate::flow::FlowField;

/// Channel-major RGB rendering of a flow field, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    /// Planes in r, g, b order, each row-major.
    pub channels: [Vec<f64>; 3],
}

/// HSV to RGB at full saturation. `hue` in degrees [0, 360), `value` in [0, 1].
fn hue_to_rgb(hue: f64, value: f64) -> [f64; 3] {
    let sector = hue / 60.0;
    let i = sector.floor() as i64 % 6;
    let f = sector - sector.floor();
    let q = value * (1.0 - f);
    let t = value * f;
    match i {
        0 => [value, t, 0.0],
        1 => [q, value, 0.0],
        2 => [0.0, value, t],
        3 => [0.0, q, value],
        4 => [t, 0.0, value],
        _ => [value, 0.0, q],
    }
}

/// Renders flow direction as hue and magnitude as brightness, at full
/// saturation. `norm` is the magnitude that maps to full brightness; pass the
/// per-clip maximum so all frames of a clip share one scale. It is clamped
/// below by 1e-6, so an all-zero clip renders black instead of dividing by
/// zero. Magnitudes above `norm` saturate at full brightness.
pub fn colorize(flow: &FlowField, norm: f64) -> Result<RgbFrame> {
    if !norm.is_finite() || norm < 0.0 {
        return Err(FlowError::config("colorize", format!("norm {norm} must be non-negative")));
    }
    let scale = norm.max(1e-6);
    let n = flow.width * flow.height;
    let mut channels = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for idx in 0..n {
        let (u, v) = (flow.u[idx], flow.v[idx]);
        let mag = (u * u + v * v).sqrt();
        let value = (mag / scale).min(1.0);
        let mut hue = v.atan2(u).to_degrees();
        if hue < 0.0 {
            hue += 360.0;
        }
        let rgb = hue_to_rgb(hue % 360.0, value);
        for c in 0..3 {
            channels[c][idx] = rgb[c];
        }
    }
    Ok(RgbFrame { width: flow.width, height: flow.height, channels })
}

/// Largest displacement magnitude across a set of fields, for per-clip
/// normalization.
pub fn max_magnitude(flows: &[FlowField]) -> f64 {
    flows.iter().map(FlowField::max_magnitude).fold(0.0, f64::max)
}
