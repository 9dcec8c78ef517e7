use mmkit_data::{resize_plane, Clip};

use crate::bbox::BoundingBox;
use crate::error::{Result, TrackError};
use crate::tracker::Tracker;

/// Square crop side used for per-person clips.
pub const CROP_SIDE: usize = 100;

/// Crops of one track compiled into a clip.
#[derive(Debug)]
pub struct TrackClip {
    pub track_id: u64,
    pub clip: Clip,
}

/// Result of cropping a video against a tracker's output. Tracks that cover
/// no frames are listed in `skipped` instead of producing a clip.
#[derive(Debug)]
pub struct CropResult {
    pub clips: Vec<TrackClip>,
    pub skipped: Vec<u64>,
}

/// Extracts one track's per-frame crops from a video and compiles them in
/// frame order, each resized to `side` x `side`. Boxes are rounded to integer
/// pixels and clamped to the frame; a box that rounds or clamps to nothing
/// still yields a single-pixel crop rather than an error.
pub fn crop_history(
    video: &Clip,
    history: &[(u32, BoundingBox)],
    side: usize,
) -> Result<Clip> {
    if side == 0 {
        return Err(TrackError::config("crop", "side must be positive"));
    }
    if history.is_empty() {
        return Err(TrackError::usage("crop: track covers no frames"));
    }
    let (w, h) = (video.width(), video.height());
    let channels = video.channels();
    let mut data = Vec::with_capacity(history.len() * channels * side * side);
    for &(frame, bbox) in history {
        let f = frame as usize;
        if f >= video.frames() {
            return Err(TrackError::usage(format!(
                "crop: track covers frame {frame} but the video has {} frames",
                video.frames()
            )));
        }
        let x0 = (bbox.x_min.round().max(0.0) as usize).min(w - 1);
        let y0 = (bbox.y_min.round().max(0.0) as usize).min(h - 1);
        let x1 = (bbox.x_max.round().max(0.0) as usize).clamp(x0 + 1, w);
        let y1 = (bbox.y_max.round().max(0.0) as usize).clamp(y0 + 1, h);
        let (cw, ch) = (x1 - x0, y1 - y0);
        for c in 0..channels {
            let plane = video.plane(f, c);
            let mut region = Vec::with_capacity(cw * ch);
            for y in y0..y1 {
                region.extend_from_slice(&plane[y * w + x0..y * w + x1]);
            }
            data.extend(resize_plane(&region, ch, cw, side, side));
        }
    }
    Clip::new(history.len(), channels, side, side, data)
        .map_err(|e| TrackError::usage(e.to_string()))
}

/// Crops every ever-confirmed track out of `video`. Tracks with empty
/// coverage are skipped and reported, not fatal.
pub fn crop_tracks(video: &Clip, tracker: &Tracker, side: usize) -> Result<CropResult> {
    let mut clips = Vec::new();
    let mut skipped = Vec::new();
    for track in tracker.confirmed_tracks() {
        if track.history.is_empty() {
            skipped.push(track.id);
            continue;
        }
        clips.push(TrackClip {
            track_id: track.id,
            clip: crop_history(video, &track.history, side)?,
        });
    }
    Ok(CropResult { clips, skipped })
}
