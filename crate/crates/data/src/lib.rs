//! Preprocessing for the three model modalities: video clips (optical flow
//! and rasterized body meshes), skeleton sequences, and assembled samples.
//!
//! Conventions shared across the workspace: clips are
//! [frame][channel][row][col] with values in [0,1]; skeletons are
//! frames x joints x (x,y,z); meshes carry exactly 6890 vertices per frame.

mod clip;
mod error;
mod mesh;
mod sample;
mod skeleton;

pub use clip::{resize_clip, resize_plane, rotate_clip, sample_frames, sample_indices, Clip};
pub use error::{DataError, Result};
pub use mesh::{rasterize_mesh, MeshSequence, MESH_VERTICES, RASTER_FRAMES};
pub use sample::{
    augment_sample, build_sample, read_labels, write_labels, LabelRow, Sample, ACTION_CLASSES,
    AUGMENT_ANGLES, MESH_RADIUS_PX, SAMPLE_FRAMES, SAMPLE_SIDE,
};
pub use skeleton::{
    rotate_skeleton, standardize_skeleton, SkeletonSequence, DEFAULT_JOINTS, STANDARD_FRAMES,
};
