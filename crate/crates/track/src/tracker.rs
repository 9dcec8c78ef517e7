use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assign::assignment;
use crate::bbox::{iou, BoundingBox};
use crate::detect::{nms, Detection};
use crate::error::{Result, TrackError};
use crate::kalman::{kalman_predict, kalman_update, TrackState};

/// Sentinel for gated pairs in the assignment matrix. Large enough that the
/// solver always prefers any allowed pair, finite so the solver accepts it.
const GATED: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub nms_iou_threshold: f64,
    pub min_confidence: f64,
    /// Appearance weight in the association cost; motion gets 1 - lambda.
    pub lambda: f64,
    pub max_cost: f64,
    pub confirm_hits: u32,
    pub max_misses: u32,
    pub process_noise: f64,
    pub measurement_noise: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            nms_iou_threshold: 0.5,
            min_confidence: 0.4,
            lambda: 0.8,
            max_cost: 0.7,
            confirm_hits: 3,
            max_misses: 30,
            process_noise: 0.05,
            measurement_noise: 0.05,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(TrackError::config("tracker config", format!("{name} {v} not in [0, 1]")))
            }
        };
        unit("nms_iou_threshold", self.nms_iou_threshold)?;
        unit("min_confidence", self.min_confidence)?;
        unit("lambda", self.lambda)?;
        if !(self.max_cost > 0.0) {
            return Err(TrackError::config("tracker config", "max_cost must be positive"));
        }
        if self.confirm_hits == 0 {
            return Err(TrackError::config("tracker config", "confirm_hits must be at least 1"));
        }
        if !(self.process_noise > 0.0) || !(self.measurement_noise >= 0.0) {
            return Err(TrackError::config("tracker config", "noise scales must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

/// Appearance gallery capacity; older descriptors fall off the front.
const GALLERY_CAP: usize = 50;

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub gallery: VecDeque<Vec<f64>>,
    pub hits: u32,
    pub misses: u32,
    pub status: TrackStatus,
    /// Hits since the last miss; confirmation requires a consecutive run.
    consecutive_hits: u32,
    /// Whether this track was ever confirmed; survives deletion for output.
    was_confirmed: bool,
    /// Per-frame box for every frame the track was live: the updated box on
    /// matched frames, the predicted box while coasting.
    pub history: Vec<(u32, BoundingBox)>,
}

impl Track {
    fn new(id: u64, det: &Detection, q_scale: f64) -> Result<Self> {
        let mut gallery = VecDeque::new();
        gallery.push_back(det.appearance.clone());
        Ok(Track {
            id,
            state: TrackState::from_detection(&det.bbox, q_scale)?,
            gallery,
            hits: 1,
            misses: 0,
            status: TrackStatus::Tentative,
            consecutive_hits: 1,
            was_confirmed: false,
            history: vec![(det.frame_index, det.bbox)],
        })
    }

    fn push_appearance(&mut self, appearance: &[f64]) {
        if self.gallery.len() == GALLERY_CAP {
            self.gallery.pop_front();
        }
        self.gallery.push_back(appearance.to_vec());
    }

    /// Highest cosine similarity between the gallery and a descriptor. Both
    /// sides are unit-norm, so the dot product is the cosine.
    fn max_similarity(&self, appearance: &[f64]) -> f64 {
        self.gallery
            .iter()
            .map(|g| g.iter().zip(appearance).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ever_confirmed(&self) -> bool {
        self.was_confirmed
    }
}

/// Association outcome over one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// (track index, detection index) pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Matches predicted tracks to detections by blended appearance and motion
/// cost. Pairs costing more than `max_cost` are gated out entirely; the rest
/// go through a min-cost assignment.
pub fn associate(
    tracks: &[Track],
    detections: &[Detection],
    config: &TrackerConfig,
) -> Result<Association> {
    if tracks.is_empty() || detections.is_empty() {
        return Ok(Association {
            matches: Vec::new(),
            unmatched_tracks: (0..tracks.len()).collect(),
            unmatched_detections: (0..detections.len()).collect(),
        });
    }

    let mut cost = vec![vec![0.0; detections.len()]; tracks.len()];
    for (t, track) in tracks.iter().enumerate() {
        let predicted = track.state.bbox()?;
        for (d, det) in detections.iter().enumerate() {
            let appearance_cost = 1.0 - track.max_similarity(&det.appearance);
            let motion_cost = 1.0 - iou(&predicted, &det.bbox);
            let c = config.lambda * appearance_cost + (1.0 - config.lambda) * motion_cost;
            cost[t][d] = if c > config.max_cost { GATED } else { c };
        }
    }

    let pairs = assignment(&cost)?;
    let mut matches = Vec::new();
    let mut matched_tracks = vec![false; tracks.len()];
    let mut matched_dets = vec![false; detections.len()];
    for (t, d) in pairs {
        if cost[t][d] >= GATED {
            continue;
        }
        matched_tracks[t] = true;
        matched_dets[d] = true;
        matches.push((t, d));
    }
    Ok(Association {
        matches,
        unmatched_tracks: (0..tracks.len()).filter(|&t| !matched_tracks[t]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&d| !matched_dets[d]).collect(),
    })
}

/// Online multi-object tracker over one video. Feed frames in increasing
/// order via `step`; finished and live tracks stay queryable afterwards.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Tracker { config, tracks: Vec::new(), next_id: 1, last_frame: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// All tracks ever created, including deleted ones.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Tracks that reached confirmed status at some point, in id order.
    pub fn confirmed_tracks(&self) -> Vec<&Track> {
        self.tracks.iter().filter(|t| t.ever_confirmed()).collect()
    }

    /// Advances the tracker by one frame. Detections must carry this frame's
    /// index; frames must arrive in strictly increasing order. Detections are
    /// confidence-filtered and NMS-deduplicated here, so callers pass raw
    /// detector output.
    pub fn step(&mut self, frame_index: u32, detections: &[Detection]) -> Result<()> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(TrackError::usage(format!(
                    "tracker step: frame {frame_index} after frame {last}; frames must increase"
                )));
            }
        }
        if let Some(bad) = detections.iter().find(|d| d.frame_index != frame_index) {
            return Err(TrackError::usage(format!(
                "tracker step: detection for frame {} in step for frame {frame_index}",
                bad.frame_index
            )));
        }
        self.last_frame = Some(frame_index);

        let strong: Vec<Detection> = detections
            .iter()
            .filter(|d| d.confidence >= self.config.min_confidence)
            .cloned()
            .collect();
        let kept = nms(&strong, self.config.nms_iou_threshold);

        // Predict every live track, then associate against the predictions.
        let mut live: Vec<usize> = Vec::new();
        for (i, track) in self.tracks.iter_mut().enumerate() {
            if track.status == TrackStatus::Deleted {
                continue;
            }
            track.state = kalman_predict(&track.state, self.config.process_noise)?;
            live.push(i);
        }
        let live_tracks: Vec<Track> = live.iter().map(|&i| self.tracks[i].clone()).collect();
        let assoc = associate(&live_tracks, &kept, &self.config)?;

        for &(t, d) in &assoc.matches {
            let track = &mut self.tracks[live[t]];
            let det = &kept[d];
            track.state = kalman_update(&track.state, &det.bbox, self.config.measurement_noise)?;
            track.hits += 1;
            track.consecutive_hits += 1;
            track.misses = 0;
            track.push_appearance(&det.appearance);
            if track.status == TrackStatus::Tentative
                && track.consecutive_hits >= self.config.confirm_hits
            {
                track.status = TrackStatus::Confirmed;
                track.was_confirmed = true;
            }
            track.history.push((frame_index, track.state.bbox()?));
        }

        for &t in &assoc.unmatched_tracks {
            let track = &mut self.tracks[live[t]];
            track.misses += 1;
            track.consecutive_hits = 0;
            if track.misses > self.config.max_misses {
                track.status = TrackStatus::Deleted;
            } else {
                track.history.push((frame_index, track.state.bbox()?));
            }
        }

        for &d in &assoc.unmatched_detections {
            let id = self.next_id;
            self.next_id += 1;
            let mut track = Track::new(id, &kept[d], self.config.process_noise)?;
            if self.config.confirm_hits <= 1 {
                track.status = TrackStatus::Confirmed;
                track.was_confirmed = true;
            }
            self.tracks.push(track);
        }
        Ok(())
    }

    /// Per-frame records of every ever-confirmed track, ordered by frame then
    /// track id.
    pub fn records(&self) -> Vec<TrackRecord> {
        let mut out: Vec<TrackRecord> = self
            .tracks
            .iter()
            .filter(|t| t.ever_confirmed())
            .flat_map(|t| {
                t.history
                    .iter()
                    .map(|&(frame, bbox)| TrackRecord { frame, track_id: t.id, bbox })
            })
            .collect();
        out.sort_by_key(|r| (r.frame, r.track_id));
        out
    }
}

/// One line of the tracks output: where a track was on a given frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: u32,
    pub track_id: u64,
    pub bbox: BoundingBox,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    frame: u32,
    track_id: u64,
    bbox: [f64; 4],
}

pub fn write_tracks(path: &Path, records: &[TrackRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        let wire = RecordLine {
            frame: r.frame,
            track_id: r.track_id,
            bbox: [r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max],
        };
        serde_json::to_writer(&mut out, &wire)
            .map_err(|e| TrackError::format(path.display().to_string(), e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackRecord>> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: RecordLine = serde_json::from_str(&line)
            .map_err(|e| TrackError::format(&display, format!("line {}: {e}", i + 1)))?;
        let bbox = BoundingBox::new(wire.bbox[0], wire.bbox[1], wire.bbox[2], wire.bbox[3])
            .map_err(|e| TrackError::format(&display, format!("line {}: {e}", i + 1)))?;
        out.push(TrackRecord { frame: wire.frame, track_id: wire.track_id, bbox });
    }
    Ok(out)
}
