//! Assembly of the three preprocessed modalities into model-ready samples,
//! plus the labels sidecar format.

use std::fs;
use std::path::Path;

use crate::clip::{resize_clip, rotate_clip, sample_frames, Clip};
use crate::error::{DataError, Result};
use crate::mesh::{rasterize_mesh, MeshSequence};
use crate::skeleton::{rotate_skeleton, standardize_skeleton, SkeletonSequence, STANDARD_FRAMES};

pub const ACTION_CLASSES: usize = 11;
pub const SAMPLE_FRAMES: usize = 40;
pub const SAMPLE_SIDE: usize = 100;
pub const MESH_RADIUS_PX: f64 = 1.0;

/// Rotation angles, in degrees, applied when augmenting a sample.
pub const AUGMENT_ANGLES: [f64; 4] = [5.0, 10.0, -5.0, -10.0];

#[derive(Clone, Debug)]
pub struct Sample {
    pub flow_clip: Clip,
    pub mesh_clip: Clip,
    pub skeleton: SkeletonSequence,
    pub action_label: usize,
    pub asd_label: usize,
}

/// Standardize raw modality inputs into a Sample: flow and mesh clips become
/// 3x40x100x100, the skeleton becomes 180 frames, labels are range-checked.
pub fn build_sample(
    flow_frames: &Clip,
    mesh: &MeshSequence,
    skeleton: &SkeletonSequence,
    action_label: usize,
    asd_label: usize,
) -> Result<Sample> {
    if action_label >= ACTION_CLASSES {
        return Err(DataError::validation(
            "action_label",
            format!("{action_label} outside 0..{}", ACTION_CLASSES - 1),
        ));
    }
    if asd_label > 1 {
        return Err(DataError::validation("asd_label", format!("{asd_label} is not binary")));
    }
    if flow_frames.channels() != 3 {
        return Err(DataError::validation(
            "flow_clip",
            format!("{} channels, expected 3", flow_frames.channels()),
        ));
    }

    let flow_clip = resize_clip(&sample_frames(flow_frames, SAMPLE_FRAMES), SAMPLE_SIDE, SAMPLE_SIDE);
    // Rasterization already emits 40 frames at the target resolution; the
    // resize is an identity unless the raster settings ever diverge.
    let mesh_clip = resize_clip(&rasterize_mesh(mesh, SAMPLE_SIDE, MESH_RADIUS_PX)?, SAMPLE_SIDE, SAMPLE_SIDE);
    let skeleton = standardize_skeleton(skeleton);

    Ok(Sample { flow_clip, mesh_clip, skeleton, action_label, asd_label })
}

/// Rotate every modality by the same angle; labels and shapes are preserved.
pub fn augment_sample(sample: &Sample, angle_deg: f64) -> Sample {
    Sample {
        flow_clip: rotate_clip(&sample.flow_clip, angle_deg),
        mesh_clip: rotate_clip(&sample.mesh_clip, angle_deg),
        skeleton: rotate_skeleton(&sample.skeleton, angle_deg),
        action_label: sample.action_label,
        asd_label: sample.asd_label,
    }
}

impl Sample {
    /// Shape contract shared by loaders and the synthetic generator.
    pub fn validate(&self) -> Result<()> {
        let check_clip = |name: &str, c: &Clip| -> Result<()> {
            if c.channels() != 3 || c.frames() != SAMPLE_FRAMES || c.height() != SAMPLE_SIDE || c.width() != SAMPLE_SIDE {
                return Err(DataError::validation(
                    name,
                    format!(
                        "shape {}x{}x{}x{}, expected 3x{SAMPLE_FRAMES}x{SAMPLE_SIDE}x{SAMPLE_SIDE}",
                        c.channels(),
                        c.frames(),
                        c.height(),
                        c.width()
                    ),
                ));
            }
            Ok(())
        };
        check_clip("flow_clip", &self.flow_clip)?;
        check_clip("mesh_clip", &self.mesh_clip)?;
        if self.skeleton.frames() != STANDARD_FRAMES {
            return Err(DataError::validation(
                "skeleton",
                format!("{} frames, expected {STANDARD_FRAMES}", self.skeleton.frames()),
            ));
        }
        if self.action_label >= ACTION_CLASSES {
            return Err(DataError::validation("action_label", "out of range".to_string()));
        }
        if self.asd_label > 1 {
            return Err(DataError::validation("asd_label", "not binary".to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRow {
    pub clip_id: String,
    pub action_label: usize,
    pub asd_label: usize,
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError::format(path.display(), e.to_string()))?;
    let headers = reader.headers().map_err(|e| DataError::format(path.display(), e.to_string()))?;
    let expected = ["clip_id", "action_label", "asd_label"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(DataError::format(
            path.display(),
            format!("header {:?}, expected clip_id,action_label,asd_label", headers.iter().collect::<Vec<_>>()),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::format(path.display(), e.to_string()))?;
        let line = i + 2; // header occupies line 1
        if record.len() != 3 {
            return Err(DataError::format(path.display(), format!("line {line}: {} fields, expected 3", record.len())));
        }
        let parse = |field: &str, name: &str| -> Result<usize> {
            field.trim().parse().map_err(|_| {
                DataError::format(path.display(), format!("line {line}: {name} '{field}' is not a non-negative integer"))
            })
        };
        rows.push(LabelRow {
            clip_id: record[0].to_string(),
            action_label: parse(&record[1], "action_label")?,
            asd_label: parse(&record[2], "asd_label")?,
        });
    }
    Ok(rows)
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut out = String::from("clip_id,action_label,asd_label\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.clip_id, row.action_label, row.asd_label));
    }
    fs::write(path, out)?;
    Ok(())
}
