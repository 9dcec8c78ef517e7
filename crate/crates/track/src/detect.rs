use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BoundingBox};
use crate::error::{Result, TrackError};

/// One detector output: a box, a confidence, and an appearance descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub appearance: Vec<f64>,
}

impl Detection {
    pub fn new(
        frame_index: u32,
        bbox: BoundingBox,
        confidence: f64,
        appearance: Vec<f64>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(TrackError::usage(format!("detection: confidence {confidence} not in [0, 1]")));
        }
        if appearance.is_empty() {
            return Err(TrackError::usage("detection: empty appearance vector"));
        }
        let norm = appearance.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(TrackError::usage(format!(
                "detection: appearance norm {norm} departs from 1 by more than 1e-6"
            )));
        }
        Ok(Detection { frame_index, bbox, confidence, appearance })
    }
}

/// Greedy non-maximum suppression. Detections are visited by descending
/// confidence (ties keep the lower original index first); each accepted box
/// suppresses every remaining box overlapping it by more than `iou_threshold`.
/// Kept detections come back in acceptance order.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .confidence
            .partial_cmp(&detections[a].confidence)
            .expect("confidence validated finite")
            .then(a.cmp(&b))
    });

    let mut kept: Vec<Detection> = Vec::new();
    for &idx in &order {
        let candidate = &detections[idx];
        let suppressed =
            kept.iter().any(|k| iou(&k.bbox, &candidate.bbox) > iou_threshold);
        if !suppressed {
            kept.push(candidate.clone());
        }
    }
    kept
}

/// Wire form of a detection line: {"frame", "bbox": [x0,y0,x1,y1], "conf", "feat"}.
#[derive(Serialize, Deserialize)]
struct DetectionLine {
    frame: u32,
    bbox: [f64; 4],
    conf: f64,
    feat: Vec<f64>,
}

/// Reads a JSON Lines detection file. Every line must parse, boxes must be
/// valid, confidences in [0, 1], and appearance vectors unit-norm with one
/// shared dimension across the file. Errors cite the offending line number.
pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let wire: DetectionLine = serde_json::from_str(&line)
            .map_err(|e| TrackError::format(&display, format!("line {lineno}: {e}")))?;
        let bbox = BoundingBox::new(wire.bbox[0], wire.bbox[1], wire.bbox[2], wire.bbox[3])
            .map_err(|e| TrackError::format(&display, format!("line {lineno}: {e}")))?;
        let det = Detection::new(wire.frame, bbox, wire.conf, wire.feat)
            .map_err(|e| TrackError::format(&display, format!("line {lineno}: {e}")))?;
        match dim {
            None => dim = Some(det.appearance.len()),
            Some(d) if d != det.appearance.len() => {
                return Err(TrackError::format(
                    &display,
                    format!(
                        "line {lineno}: appearance dimension {} differs from {d}",
                        det.appearance.len()
                    ),
                ));
            }
            _ => {}
        }
        out.push(det);
    }
    Ok(out)
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for det in detections {
        let wire = DetectionLine {
            frame: det.frame_index,
            bbox: [det.bbox.x_min, det.bbox.y_min, det.bbox.x_max, det.bbox.y_max],
            conf: det.confidence,
            feat: det.appearance.clone(),
        };
        serde_json::to_writer(&mut out, &wire)
            .map_err(|e| TrackError::format(path.display().to_string(), e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Groups detections by frame index, ascending. Input order within one frame
/// is preserved.
pub fn group_by_frame(detections: Vec<Detection>) -> Vec<(u32, Vec<Detection>)> {
    let mut grouped: std::collections::BTreeMap<u32, Vec<Detection>> =
        std::collections::BTreeMap::new();
    for det in detections {
        grouped.entry(det.frame_index).or_default().push(det);
    }
    grouped.into_iter().collect()
}
