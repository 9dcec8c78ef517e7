//! Synthetic stand-in data. Each action class owns a motion signature (an
//! oscillation direction and frequency) that shows up coherently in all
//! three modalities: the skeleton joints trace it, the rendered mesh blob
//! translates along it, and the flow clip carries it as channel polarity
//! plus a traveling wave. The ASD flag scales every motion amplitude by a
//! fixed factor, giving the binary task its own cue in each modality.

use std::f64::consts::{PI, TAU};

use mmkit_data::{
    build_sample, Clip, MeshSequence, Sample, SkeletonSequence, ACTION_CLASSES, MESH_VERTICES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Provenance};
use crate::error::{PipelineError, Result};

/// Action class names, indexed by label.
pub const ACTION_NAMES: [&str; ACTION_CLASSES] = [
    "arm_swing",
    "body_swing",
    "chest_expansion",
    "drumming",
    "sing_and_clap",
    "twist_pose",
    "tree_pose",
    "frog_pose",
    "squat_pose",
    "maracas_forward_shaking",
    "maracas_shaking",
];

/// Amplitude factor applied to every modality when the ASD flag is set.
pub const ASD_AMPLITUDE_FACTOR: f64 = 0.5;

const SKELETON_FRAMES: usize = 180;
const JOINTS: usize = 33;
const CLIP_FRAMES: usize = 40;
const CLIP_SIDE: usize = 100;

/// Per-class signature: oscillation direction on the unit circle and
/// frequency in cycles per clip window. All eleven directions are distinct
/// even up to sign, so no two classes share a motion axis.
fn signature(class: usize) -> (f64, f64, f64) {
    let theta = TAU * class as f64 / ACTION_CLASSES as f64;
    let cycles = 1.0 + 0.5 * class as f64;
    (theta.cos(), theta.sin(), cycles)
}

fn mix_seed(seed: u64, class: usize, index: usize) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(((class as u64) << 20) | (index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sphere-of-points template shared by every synthetic mesh: golden-angle
/// spiral scaled to a standing-body-shaped ellipsoid.
fn mesh_offsets() -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..MESH_VERTICES)
        .map(|v| {
            let cos_b = 1.0 - 2.0 * (v as f64 + 0.5) / MESH_VERTICES as f64;
            let sin_b = (1.0 - cos_b * cos_b).sqrt();
            let a = golden * v as f64;
            [0.35 * a.cos() * sin_b, 0.60 * cos_b, 0.20 * a.sin() * sin_b]
        })
        .collect()
}

fn synth_skeleton(rng: &mut ChaCha8Rng, dx: f64, dy: f64, cycles: f64, amplitude: f64) -> SkeletonSequence {
    let omega = TAU * cycles / SKELETON_FRAMES as f64;
    let phase: f64 = rng.gen_range(0.0..0.08);
    let mut data = Vec::with_capacity(SKELETON_FRAMES * JOINTS * 3);
    for t in 0..SKELETON_FRAMES {
        for j in 0..JOINTS {
            let ring = TAU * j as f64 / JOINTS as f64 + 0.7;
            let swing = amplitude * (omega * t as f64 + 0.35 * j as f64 + phase).sin();
            let mut noise = || rng.gen_range(-0.007..0.007);
            data.push(0.5 + 0.35 * ring.cos() + swing * dx + noise());
            data.push(0.5 + 0.35 * ring.sin() + swing * dy + noise());
            data.push(0.2 + 0.01 * j as f64 + swing * 0.25 + noise());
        }
    }
    SkeletonSequence::new(SKELETON_FRAMES, JOINTS, data).expect("generated skeleton dimensions agree")
}

fn synth_flow(rng: &mut ChaCha8Rng, dx: f64, dy: f64, cycles: f64, amplitude: f64) -> Clip {
    let omega = TAU * cycles / CLIP_FRAMES as f64;
    let phase: f64 = rng.gen_range(0.0..0.08);
    let wavenumber = TAU / 25.0;
    // Spatial phase of the traveling wave, fixed per sample.
    let spatial: Vec<f64> = (0..CLIP_SIDE * CLIP_SIDE)
        .map(|p| {
            let (y, x) = ((p / CLIP_SIDE) as f64, (p % CLIP_SIDE) as f64);
            wavenumber * (x * dx + y * dy)
        })
        .collect();
    let mut data = Vec::with_capacity(CLIP_FRAMES * 3 * CLIP_SIDE * CLIP_SIDE);
    for t in 0..CLIP_FRAMES {
        let drift = omega * t as f64 + phase;
        let magnitude = amplitude * drift.cos();
        let wave: Vec<f64> = spatial.iter().map(|s| (s + drift).sin()).collect();
        for channel in 0..3 {
            let base = match channel {
                0 => 0.5 + 0.35 * magnitude * dx,
                1 => 0.5 + 0.35 * magnitude * dy,
                _ => 0.25 + 0.50 * magnitude.abs(),
            };
            // Sensor noise is independent per pixel: anything shared across a
            // frame would survive spatial pooling exactly and hand a learner a
            // per-sample fingerprint stronger than the motion signal.
            for w in &wave {
                data.push(base + 0.1 * w + rng.gen_range(-0.01..0.01));
            }
        }
    }
    Clip::new(CLIP_FRAMES, 3, CLIP_SIDE, CLIP_SIDE, data).expect("generated clip dimensions agree")
}

fn synth_mesh(
    rng: &mut ChaCha8Rng,
    offsets: &[[f64; 3]],
    dx: f64,
    dy: f64,
    cycles: f64,
    amplitude: f64,
) -> MeshSequence {
    let omega = TAU * cycles / CLIP_FRAMES as f64;
    let phase: f64 = rng.gen_range(0.0..0.08);
    let mut data = Vec::with_capacity(CLIP_FRAMES * MESH_VERTICES * 3);
    for t in 0..CLIP_FRAMES {
        let swing = amplitude * (omega * t as f64 + phase).sin();
        let (cx, cy) = (swing * dx, swing * dy);
        for o in offsets {
            data.push(cx + o[0]);
            data.push(cy + o[1]);
            data.push(2.5 + o[2]);
        }
    }
    MeshSequence::new(CLIP_FRAMES, data).expect("generated mesh dimensions agree")
}

/// Generate `n_per_class` samples for each action class, alternating the ASD
/// flag within each class so both flags stay balanced. Every sample is fully
/// determined by (seed, class, index), so datasets with the same seed are
/// bit-identical regardless of generation order.
pub fn synth_dataset(n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class < 2 {
        return Err(PipelineError::config(
            "synth_dataset",
            format!("n_per_class {n_per_class} is below the minimum of 2"),
        ));
    }
    let offsets = mesh_offsets();
    let mut samples = Vec::with_capacity(ACTION_CLASSES * n_per_class);
    for class in 0..ACTION_CLASSES {
        for index in 0..n_per_class {
            samples.push(synth_sample(&offsets, class, index, seed)?);
        }
    }
    Dataset::new(samples, Provenance::Synthetic)
}

fn synth_sample(offsets: &[[f64; 3]], class: usize, index: usize, seed: u64) -> Result<Sample> {
    let (dx, dy, cycles) = signature(class);
    let asd = index % 2;
    let factor = if asd == 1 { ASD_AMPLITUDE_FACTOR } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, class, index));
    let jitter: f64 = rng.gen_range(0.98..1.02);

    let skeleton = synth_skeleton(&mut rng, dx, dy, cycles, 0.18 * factor * jitter);
    let flow = synth_flow(&mut rng, dx, dy, cycles, factor * jitter);
    let mesh = synth_mesh(&mut rng, offsets, dx, dy, cycles, 0.8 * factor * jitter);
    Ok(build_sample(&flow, &mesh, &skeleton, class, asd)?)
}
