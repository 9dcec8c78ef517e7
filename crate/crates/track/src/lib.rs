//! Identity-consistent multi-person tracking over per-frame detection
//! streams, and per-person crop extraction.
//!
//! The tracker pairs a constant-velocity Kalman filter with an appearance
//! gallery: association cost blends cosine distance over recent descriptors
//! with box-overlap distance, and a min-cost assignment resolves each frame.
//! Detections come from files; no detector runs here.

mod assign;
mod bbox;
mod crop;
mod detect;
mod error;
mod kalman;
mod tracker;

pub use assign::assignment;
pub use bbox::{iou, BoundingBox};
pub use crop::{crop_history, crop_tracks, CropResult, TrackClip, CROP_SIDE};
pub use detect::{group_by_frame, nms, read_detections, write_detections, Detection};
pub use error::{Result, TrackError};
pub use kalman::{kalman_predict, kalman_update, TrackState};
pub use tracker::{
    associate, read_tracks, write_tracks, Association, Track, TrackRecord, TrackStatus, Tracker,
    TrackerConfig,
};
