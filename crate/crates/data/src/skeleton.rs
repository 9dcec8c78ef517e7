//! Skeleton sequences: frames x joints x (x,y,z), stored flat. CSV rows are
//! frames; columns are joint coordinates in x,y,z order.

use std::fs;
use std::path::Path;

use crate::error::{DataError, Result};

pub const STANDARD_FRAMES: usize = 180;
pub const DEFAULT_JOINTS: usize = 33;

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence {
    frames: usize,
    joints: usize,
    data: Vec<f64>,
}

impl SkeletonSequence {
    pub fn new(frames: usize, joints: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 {
            return Err(DataError::Input("skeleton: empty sequence".into()));
        }
        if joints == 0 {
            return Err(DataError::Input("skeleton: joint count must be positive".into()));
        }
        if data.len() != frames * joints * 3 {
            return Err(DataError::Input(format!(
                "skeleton: {} values cannot fill {frames} frames x {joints} joints x 3",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Input("skeleton: coordinates must be finite".into()));
        }
        Ok(SkeletonSequence { frames, joints, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn joint(&self, frame: usize, joint: usize) -> [f64; 3] {
        let base = (frame * self.joints + joint) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    fn frame_slice(&self, frame: usize) -> &[f64] {
        let per = self.joints * 3;
        &self.data[frame * per..(frame + 1) * per]
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| DataError::format(path.display(), e.to_string()))?;
        let mut data = Vec::new();
        let mut joints = 0usize;
        let mut frames = 0usize;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| DataError::format(path.display(), e.to_string()))?;
            let line = i + 1;
            if frames == 0 {
                if record.len() % 3 != 0 || record.is_empty() {
                    return Err(DataError::format(
                        path.display(),
                        format!("line {line}: {} columns, need a multiple of 3", record.len()),
                    ));
                }
                joints = record.len() / 3;
            } else if record.len() != joints * 3 {
                return Err(DataError::format(
                    path.display(),
                    format!("line {line}: {} columns, expected {}", record.len(), joints * 3),
                ));
            }
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    DataError::format(path.display(), format!("line {line}, column {}: not a number", col + 1))
                })?;
                data.push(v);
            }
            frames += 1;
        }
        if frames == 0 {
            return Err(DataError::Input("skeleton: empty sequence".into()));
        }
        SkeletonSequence::new(frames, joints, data)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let per = self.joints * 3;
        let mut out = String::new();
        for f in 0..self.frames {
            let row = &self.data[f * per..(f + 1) * per];
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Force a sequence to exactly 180 frames: longer inputs keep frames
/// 0..179; shorter ones append frames cyclically from frame 0.
pub fn standardize_skeleton(seq: &SkeletonSequence) -> SkeletonSequence {
    let per = seq.joints * 3;
    let mut data = Vec::with_capacity(STANDARD_FRAMES * per);
    for i in 0..STANDARD_FRAMES {
        data.extend_from_slice(seq.frame_slice(i % seq.frames));
    }
    SkeletonSequence { frames: STANDARD_FRAMES, joints: seq.joints, data }
}

/// Rotate each frame's joints about that frame's centroid, in the XY plane;
/// Z is untouched. An isometry of every frame's joint set.
pub fn rotate_skeleton(seq: &SkeletonSequence, angle_deg: f64) -> SkeletonSequence {
    assert!(angle_deg.is_finite(), "rotation angle must be finite");
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut data = Vec::with_capacity(seq.data.len());
    for f in 0..seq.frames {
        let frame = seq.frame_slice(f);
        let n = seq.joints as f64;
        let cx = frame.chunks(3).map(|j| j[0]).sum::<f64>() / n;
        let cy = frame.chunks(3).map(|j| j[1]).sum::<f64>() / n;
        for j in frame.chunks(3) {
            let dx = j[0] - cx;
            let dy = j[1] - cy;
            data.push(cx + cos * dx - sin * dy);
            data.push(cy + sin * dx + cos * dy);
            data.push(j[2]);
        }
    }
    SkeletonSequence { frames: seq.frames, joints: seq.joints, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(frames: usize, joints: usize) -> SkeletonSequence {
        let data: Vec<f64> = (0..frames * joints * 3).map(|i| i as f64 * 0.01).collect();
        SkeletonSequence::new(frames, joints, data).unwrap()
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(SkeletonSequence::new(0, 33, vec![]).is_err());
    }

    #[test]
    fn standardize_identity_truncate_and_cycle() {
        let s180 = seq(180, 4);
        assert_eq!(standardize_skeleton(&s180), s180);

        let s200 = seq(200, 4);
        let out = standardize_skeleton(&s200);
        assert_eq!(out.frames(), 180);
        assert_eq!(out.data(), &s200.data()[..180 * 4 * 3]);

        let s100 = seq(100, 2);
        let out = standardize_skeleton(&s100);
        assert_eq!(out.frames(), 180);
        // Frames 100..179 replay frames 0..79.
        for f in 100..180 {
            assert_eq!(out.frame_slice(f), s100.frame_slice(f - 100));
        }
    }

    #[test]
    fn rotate_zero_is_identity() {
        let s = seq(3, 5);
        let out = rotate_skeleton(&s, 0.0);
        for (a, b) in out.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_maps_offset_as_expected() {
        // Four joints symmetric about (2, 3): centroid is exactly (2, 3).
        // The joint at centroid + (1, 0) must land at centroid + (0, 1).
        let data = vec![
            3.0, 3.0, 0.7, // centroid + (1, 0)
            1.0, 3.0, 0.1, // centroid + (-1, 0)
            2.0, 4.0, 0.2, // centroid + (0, 1)
            2.0, 2.0, 0.3, // centroid + (0, -1)
        ];
        let s = SkeletonSequence::new(1, 4, data).unwrap();
        let out = rotate_skeleton(&s, 90.0);
        let j = out.joint(0, 0);
        assert!((j[0] - 2.0).abs() < 1e-12);
        assert!((j[1] - 4.0).abs() < 1e-12);
        assert!((j[2] - 0.7).abs() < 1e-12);
    }
}
