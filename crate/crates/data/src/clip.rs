//! Video clips: dense [frame][channel][row][col] volumes with values in
//! [0,1], plus the frame sampling, resizing, and rotation rules applied to
//! every modality.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::error::{DataError, Result};

const MAGIC: &[u8; 4] = b"MMC1";

#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    frames: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Clip {
    pub fn new(frames: usize, channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || channels == 0 || height == 0 || width == 0 {
            return Err(DataError::Input(format!(
                "clip extents must be positive, got {frames}x{channels}x{height}x{width}"
            )));
        }
        if data.len() != frames * channels * height * width {
            return Err(DataError::Input(format!(
                "clip data holds {} values, shape needs {}",
                data.len(),
                frames * channels * height * width
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(DataError::Input("clip values must be finite and in [0,1]".into()));
        }
        Ok(Clip { frames, channels, height, width, data })
    }

    pub fn filled(frames: usize, channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Clip::new(frames, channels, height, width, vec![value; frames * channels * height * width])
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, f: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[((f * self.channels + c) * self.height + y) * self.width + x]
    }

    /// One channel plane of one frame, as a height*width slice.
    pub fn plane(&self, f: usize, c: usize) -> &[f64] {
        let per = self.height * self.width;
        let start = (f * self.channels + c) * per;
        &self.data[start..start + per]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(20 + 4 * self.data.len());
        buf.extend_from_slice(MAGIC);
        for ext in [self.frames, self.channels, self.height, self.width] {
            buf.extend_from_slice(&(ext as u32).to_le_bytes());
        }
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return Err(DataError::format(path.display(), "not a clip file (bad magic or truncated header)"));
        }
        let ext = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (frames, channels, height, width) = (ext(0), ext(1), ext(2), ext(3));
        let numel = frames * channels * height * width;
        if bytes.len() != 20 + 4 * numel {
            return Err(DataError::format(
                path.display(),
                format!("payload holds {} bytes, header shape needs {}", bytes.len() - 20, 4 * numel),
            ));
        }
        let mut data = Vec::with_capacity(numel);
        for i in 0..numel {
            let v = f32::from_le_bytes(bytes[20 + 4 * i..24 + 4 * i].try_into().unwrap()) as f64;
            if !v.is_finite() {
                return Err(DataError::format(path.display(), format!("non-finite value at index {i}")));
            }
            data.push(v.clamp(0.0, 1.0));
        }
        Clip::new(frames, channels, height, width, data)
    }
}

/// Uniform frame selection: idx_k = floor(k*F/n). Duplicates appear when
/// F < n; order is preserved. F == n is the identity.
pub fn sample_frames(clip: &Clip, n: usize) -> Clip {
    assert!(n >= 1, "sample count must be >= 1");
    let per_frame = clip.channels * clip.height * clip.width;
    let mut data = Vec::with_capacity(n * per_frame);
    for k in 0..n {
        let idx = k * clip.frames / n;
        data.extend_from_slice(&clip.data[idx * per_frame..(idx + 1) * per_frame]);
    }
    Clip { frames: n, channels: clip.channels, height: clip.height, width: clip.width, data }
}

/// The frame indices sample_frames would pick, for callers that need the
/// selection itself.
pub fn sample_indices(frames: usize, n: usize) -> Vec<usize> {
    (0..n).map(|k| k * frames / n).collect()
}

fn bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = y - y0 as f64;
    let fx = x - x0 as f64;
    let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
    let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Bilinear resize of one plane with half-pixel-centered sampling.
pub fn resize_plane(plane: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let src_y = (oy as f64 + 0.5) * sy - 0.5;
        for ox in 0..out_w {
            let src_x = (ox as f64 + 0.5) * sx - 0.5;
            out.push(bilinear(plane, h, w, src_y, src_x).clamp(0.0, 1.0));
        }
    }
    out
}

pub fn resize_clip(clip: &Clip, out_h: usize, out_w: usize) -> Clip {
    let mut data = Vec::with_capacity(clip.frames * clip.channels * out_h * out_w);
    for f in 0..clip.frames {
        for c in 0..clip.channels {
            data.extend(resize_plane(clip.plane(f, c), clip.height, clip.width, out_h, out_w));
        }
    }
    Clip { frames: clip.frames, channels: clip.channels, height: out_h, width: out_w, data }
}

/// Rotate every frame about its center. Output pixels whose source falls
/// outside the frame take the plane's border mean, so rotation never invents
/// values outside the original range.
pub fn rotate_clip(clip: &Clip, angle_deg: f64) -> Clip {
    assert!(angle_deg.is_finite(), "rotation angle must be finite");
    let (h, w) = (clip.height, clip.width);
    let cy = (h - 1) as f64 / 2.0;
    let cx = (w - 1) as f64 / 2.0;
    let theta = angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();

    let mut data = Vec::with_capacity(clip.data.len());
    for f in 0..clip.frames {
        for c in 0..clip.channels {
            let plane = clip.plane(f, c);
            let fill = edge_mean(plane, h, w);
            for oy in 0..h {
                for ox in 0..w {
                    let dy = oy as f64 - cy;
                    let dx = ox as f64 - cx;
                    // Inverse map: sample the source location that lands here.
                    // The sub-nanopixel slack keeps rounding error in sin/cos
                    // from pushing border pixels into the fill region.
                    let src_x = cx + cos * dx + sin * dy;
                    let src_y = cy - sin * dx + cos * dy;
                    let eps = 1e-9;
                    let v = if src_x >= -eps
                        && src_x <= (w - 1) as f64 + eps
                        && src_y >= -eps
                        && src_y <= (h - 1) as f64 + eps
                    {
                        bilinear(plane, h, w, src_y, src_x)
                    } else {
                        fill
                    };
                    data.push(v.clamp(0.0, 1.0));
                }
            }
        }
    }
    Clip { frames: clip.frames, channels: clip.channels, height: h, width: w, data }
}

fn edge_mean(plane: &[f64], h: usize, w: usize) -> f64 {
    if h == 1 && w == 1 {
        return plane[0];
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for x in 0..w {
        sum += plane[x] + plane[(h - 1) * w + x];
        count += 2;
    }
    for y in 1..h.saturating_sub(1) {
        sum += plane[y * w] + plane[y * w + w - 1];
        count += 2;
    }
    sum / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_clip(frames: usize, h: usize, w: usize) -> Clip {
        let per = h * w;
        let data: Vec<f64> = (0..frames * per).map(|i| (i % per) as f64 / (per - 1) as f64).collect();
        Clip::new(frames, 1, h, w, data).unwrap()
    }

    #[test]
    fn constructor_validates_range_and_shape() {
        assert!(Clip::new(1, 1, 2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Clip::new(1, 1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Clip::new(0, 1, 2, 2, vec![]).is_err());
        assert!(Clip::new(1, 1, 2, 2, vec![0.0, 0.5, 1.0, 0.25]).is_ok());
    }

    #[test]
    fn sample_frames_identity_and_stride() {
        let clip = ramp_clip(40, 2, 2);
        let same = sample_frames(&clip, 40);
        assert_eq!(same.data(), clip.data());

        assert_eq!(sample_indices(80, 40), (0..40).map(|k| 2 * k).collect::<Vec<_>>());
        assert_eq!(sample_indices(3, 6), vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn resize_same_size_is_identity() {
        let clip = ramp_clip(2, 4, 4);
        let out = resize_clip(&clip, 4, 4);
        for (a, b) in out.data().iter().zip(clip.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn resize_constant_stays_constant() {
        let clip = Clip::filled(1, 3, 5, 7, 0.625).unwrap();
        let out = resize_clip(&clip, 3, 11);
        for &v in out.data() {
            assert!((v - 0.625).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_ramp_matches_hand_weights() {
        // 4x4 horizontal ramp 0,1/3,2/3,1 per row down to 2x2. Output sample
        // centers sit at source x in {0.5, 2.5}, so values are the averages
        // of adjacent ramp steps: (0+1/3)/2 = 1/6 and (2/3+1)/2 = 5/6.
        let row: Vec<f64> = (0..4).map(|x| x as f64 / 3.0).collect();
        let mut data = Vec::new();
        for _ in 0..4 {
            data.extend_from_slice(&row);
        }
        let clip = Clip::new(1, 1, 4, 4, data).unwrap();
        let out = resize_clip(&clip, 2, 2);
        let want = [1.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0, 5.0 / 6.0];
        for (a, b) in out.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rotate_zero_is_identity() {
        let clip = ramp_clip(1, 8, 8);
        let out = rotate_clip(&clip, 0.0);
        for (a, b) in out.data().iter().zip(clip.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotate_constant_stays_constant() {
        let clip = Clip::filled(1, 1, 6, 6, 0.4).unwrap();
        let out = rotate_clip(&clip, 37.5);
        for &v in out.data() {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn four_quarter_turns_recover_original() {
        // Axis-asymmetric pattern so any orientation slip would show.
        let data: Vec<f64> = (0..64).map(|i| ((i * 7 + 3) % 11) as f64 / 10.0).collect();
        let clip = Clip::new(1, 1, 8, 8, data).unwrap();
        let mut cur = clip.clone();
        for _ in 0..4 {
            cur = rotate_clip(&cur, 90.0);
        }
        let mean_abs: f64 = cur
            .data()
            .iter()
            .zip(clip.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 64.0;
        assert!(mean_abs < 0.02, "mean abs diff {mean_abs}");
    }
}
