//! Body-mesh sequences (6890 vertices per frame) and their rasterization
//! into silhouette-style video clips.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::clip::{sample_frames, Clip};
use crate::error::{DataError, Result};

pub const MESH_VERTICES: usize = 6890;
pub const RASTER_FRAMES: usize = 40;

const MAGIC: &[u8; 4] = b"MMM1";

#[derive(Clone, Debug, PartialEq)]
pub struct MeshSequence {
    frames: usize,
    data: Vec<f64>,
}

impl MeshSequence {
    pub fn new(frames: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 {
            return Err(DataError::Input("mesh: empty sequence".into()));
        }
        if data.len() != frames * MESH_VERTICES * 3 {
            return Err(DataError::Input(format!(
                "mesh: {} values cannot fill {frames} frames x {MESH_VERTICES} vertices x 3",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Input("mesh: coordinates must be finite".into()));
        }
        Ok(MeshSequence { frames, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn vertex(&self, frame: usize, v: usize) -> [f64; 3] {
        let base = (frame * MESH_VERTICES + v) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + 4 * self.data.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.frames as u32).to_le_bytes());
        buf.extend_from_slice(&(MESH_VERTICES as u32).to_le_bytes());
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
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(DataError::format(path.display(), "not a mesh file (bad magic or truncated header)"));
        }
        let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let vertices = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if vertices != MESH_VERTICES {
            return Err(DataError::format(
                path.display(),
                format!("vertex count {vertices}, this format requires {MESH_VERTICES}"),
            ));
        }
        let numel = frames * MESH_VERTICES * 3;
        if bytes.len() != 12 + 4 * numel {
            return Err(DataError::format(
                path.display(),
                format!("payload holds {} bytes, header needs {}", bytes.len() - 12, 4 * numel),
            ));
        }
        let mut data = Vec::with_capacity(numel);
        for i in 0..numel {
            data.push(f32::from_le_bytes(bytes[12 + 4 * i..16 + 4 * i].try_into().unwrap()) as f64);
        }
        MeshSequence::new(frames, data)
    }
}

/// Project each frame's vertices onto the XY plane and stamp them as black
/// discs on a white square canvas.
///
/// One affine transform serves the whole clip: the XY bounding box over ALL
/// frames is centered and scaled (aspect preserved, 5% margin each side,
/// Y flipped so up is up). Each vertex darkens the pixel containing it plus
/// every pixel whose center lies within `radius_px`. The gray plane is
/// replicated to 3 channels and the result is resampled to 40 frames.
pub fn rasterize_mesh(mesh: &MeshSequence, resolution: usize, radius_px: f64) -> Result<Clip> {
    assert!(resolution >= 2, "raster resolution must be at least 2");
    assert!(radius_px >= 0.0 && radius_px.is_finite());

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for chunk in mesh.data.chunks(3) {
        min_x = min_x.min(chunk[0]);
        max_x = max_x.max(chunk[0]);
        min_y = min_y.min(chunk[1]);
        max_y = max_y.max(chunk[1]);
    }
    let span = (max_x - min_x).max(max_y - min_y);
    if span == 0.0 {
        return Err(DataError::Input("mesh: degenerate bounding box, all vertices coincide".into()));
    }
    let side = (resolution - 1) as f64;
    let scale = 0.9 * side / span;
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let center = side / 2.0;

    let res = resolution;
    let per_plane = res * res;
    let mut data = Vec::with_capacity(mesh.frames * 3 * per_plane);
    for f in 0..mesh.frames {
        let mut plane = vec![1.0f64; per_plane];
        let frame = &mesh.data[f * MESH_VERTICES * 3..(f + 1) * MESH_VERTICES * 3];
        for v in frame.chunks(3) {
            let px = (v[0] - cx) * scale + center;
            let py = center - (v[1] - cy) * scale;
            stamp(&mut plane, res, py, px, radius_px);
        }
        for _ in 0..3 {
            data.extend_from_slice(&plane);
        }
    }
    let clip = Clip::new(mesh.frames, 3, res, res, data)?;
    Ok(sample_frames(&clip, RASTER_FRAMES))
}

/// Darken the pixel containing (py, px) and every pixel whose center is
/// within radius of it.
fn stamp(plane: &mut [f64], res: usize, py: f64, px: f64, radius: f64) {
    let put = |plane: &mut [f64], i: i64, j: i64| {
        if i >= 0 && j >= 0 && (i as usize) < res && (j as usize) < res {
            plane[i as usize * res + j as usize] = 0.0;
        }
    };
    put(plane, py.round() as i64, px.round() as i64);
    if radius > 0.0 {
        let r2 = radius * radius;
        for i in (py - radius).ceil() as i64..=(py + radius).floor() as i64 {
            for j in (px - radius).ceil() as i64..=(px + radius).floor() as i64 {
                let dy = i as f64 - py;
                let dx = j as f64 - px;
                if dy * dy + dx * dx <= r2 {
                    put(plane, i, j);
                }
            }
        }
    }
}
