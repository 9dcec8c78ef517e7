//! End-to-end flow recovery on synthetic textures with known motion.
//!
//! Textures are sums of random Gaussian blobs, so the shifted frame can be
//! rendered analytically instead of resampled, and the true flow is exact.

use mmkit_flow::{displacement_step, farneback, poly_expansion, FlowConfig, FlowField, GrayFrame};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

const W: usize = 64;
const H: usize = 64;

struct Texture {
    blobs: Vec<(f64, f64, f64, f64)>,
    lo: f64,
    hi: f64,
}

impl Texture {
    fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blobs: Vec<_> = (0..30)
            .map(|_| {
                let cx = rng.gen_range(0.0..W as f64);
                let cy = rng.gen_range(0.0..H as f64);
                let sigma = rng.gen_range(2.5..6.0);
                let amp = rng.gen_range(0.5..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (cx, cy, sigma, amp)
            })
            .collect();

        // Range scan over the frame plus the largest shift margin, so both
        // the reference and any shifted rendering map into (0, 1).
        let mut tex = Texture { blobs, lo: f64::INFINITY, hi: f64::NEG_INFINITY };
        for y in -6..=(H as i64 + 6) {
            for x in -6..=(W as i64 + 6) {
                let v = tex.raw(x as f64, y as f64);
                tex.lo = tex.lo.min(v);
                tex.hi = tex.hi.max(v);
            }
        }
        tex
    }

    fn raw(&self, x: f64, y: f64) -> f64 {
        self.blobs
            .iter()
            .map(|&(cx, cy, sigma, amp)| {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                amp * (-d2 / (2.0 * sigma * sigma)).exp()
            })
            .sum()
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        0.08 + 0.84 * (self.raw(x, y) - self.lo) / (self.hi - self.lo + 1e-12)
    }

    /// Frame whose content is the texture shifted by (dx, dy) pixels.
    fn rendered(&self, dx: f64, dy: f64) -> GrayFrame {
        GrayFrame::from_fn(W, H, |x, y| self.sample(x - dx, y - dy)).unwrap()
    }
}

/// Interior mean error per component and fraction of pixels with endpoint
/// error below half a pixel. A two-pixel border is excluded.
fn interior_stats(flow: &FlowField, dx: f64, dy: f64) -> (f64, f64, f64) {
    let (mut sum_u, mut sum_v, mut good, mut count) = (0.0, 0.0, 0usize, 0usize);
    for y in 2..H - 2 {
        for x in 2..W - 2 {
            let idx = y * W + x;
            sum_u += flow.u[idx];
            sum_v += flow.v[idx];
            let epe = ((flow.u[idx] - dx).powi(2) + (flow.v[idx] - dy).powi(2)).sqrt();
            if epe < 0.5 {
                good += 1;
            }
            count += 1;
        }
    }
    (sum_u / count as f64, sum_v / count as f64, good as f64 / count as f64)
}

#[test]
fn translations_are_recovered_across_twenty_textures() {
    let shifts = [(3.0, 0.0), (-2.0, 1.0), (0.0, -3.0), (2.0, 2.0)];
    let config = FlowConfig::default();
    for seed in 0..20u64 {
        let (dx, dy) = shifts[seed as usize % shifts.len()];
        let tex = Texture::random(seed);
        let f1 = tex.rendered(0.0, 0.0);
        let f2 = tex.rendered(dx, dy);
        let flow = farneback(&f1, &f2, &config).unwrap();
        let (mean_u, mean_v, frac) = interior_stats(&flow, dx, dy);

        let mag = (dx * dx + dy * dy).sqrt();
        let tol = (0.1 * mag).max(0.3);
        assert!(
            (mean_u - dx).abs() < tol && (mean_v - dy).abs() < tol,
            "seed {seed}: mean ({mean_u:.3}, {mean_v:.3}) for shift ({dx}, {dy})"
        );
        assert!(
            frac >= 0.8,
            "seed {seed}: only {:.1}% of interior pixels within 0.5px",
            frac * 100.0
        );
    }
}

#[test]
fn subpixel_translations_are_recovered() {
    let tex = Texture::random(77);
    let f1 = tex.rendered(0.0, 0.0);
    let f2 = tex.rendered(1.5, -0.5);
    let flow = farneback(&f1, &f2, &FlowConfig::default()).unwrap();
    let (mean_u, mean_v, frac) = interior_stats(&flow, 1.5, -0.5);
    assert!((mean_u - 1.5).abs() < 0.3, "mean_u = {mean_u:.3}");
    assert!((mean_v + 0.5).abs() < 0.3, "mean_v = {mean_v:.3}");
    assert!(frac >= 0.8);
}

#[test]
fn identical_frames_produce_no_motion() {
    let tex = Texture::random(5);
    let frame = tex.rendered(0.0, 0.0);
    let flow = farneback(&frame, &frame, &FlowConfig::default()).unwrap();
    assert!(
        flow.max_magnitude() < 0.05,
        "max magnitude {} on identical frames",
        flow.max_magnitude()
    );
}

#[test]
fn reversing_the_frames_negates_the_flow() {
    let tex = Texture::random(11);
    let f1 = tex.rendered(0.0, 0.0);
    let f2 = tex.rendered(3.0, 0.0);
    let config = FlowConfig::default();
    let fwd = farneback(&f1, &f2, &config).unwrap();
    let bwd = farneback(&f2, &f1, &config).unwrap();
    let (fu, fv, _) = interior_stats(&fwd, 3.0, 0.0);
    let (bu, bv, _) = interior_stats(&bwd, -3.0, 0.0);
    assert!((fu + bu).abs() < 0.3, "forward {fu:.3} vs backward {bu:.3}");
    assert!((fv + bv).abs() < 0.3);
}

#[test]
fn solving_from_the_true_prior_stays_put() {
    // Warping by an exact prior leaves nothing to solve for: a single
    // refinement pass must stay within a tenth of a pixel of the truth.
    let tex = Texture::random(23);
    let f1 = tex.rendered(0.0, 0.0);
    let f2 = tex.rendered(2.0, 1.0);
    let e1 = poly_expansion(&f1, 5, 1.1).unwrap();
    let e2 = poly_expansion(&f2, 5, 1.1).unwrap();
    let mut prior = FlowField::zeros(W, H);
    prior.u.fill(2.0);
    prior.v.fill(1.0);
    let flow = displacement_step(&e1, &e2, &prior, 15, 1).unwrap();
    // Margin clears the aggregation window plus the expansion window, where
    // edge replication differs between the two frames.
    let m = 15 / 2 + 5 / 2 + 1;
    for y in m..H - m {
        for x in m..W - m {
            let idx = y * W + x;
            assert!(
                (flow.u[idx] - 2.0).abs() < 0.1 && (flow.v[idx] - 1.0).abs() < 0.1,
                "drifted to ({}, {}) at ({x}, {y})",
                flow.u[idx],
                flow.v[idx]
            );
        }
    }
}

#[test]
fn same_inputs_give_bitwise_identical_flow() {
    let tex = Texture::random(3);
    let f1 = tex.rendered(0.0, 0.0);
    let f2 = tex.rendered(-2.0, 1.0);
    let config = FlowConfig::default();
    let a = farneback(&f1, &f2, &config).unwrap();
    let b = farneback(&f1, &f2, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_level_handles_small_motion_without_a_pyramid() {
    let tex = Texture::random(9);
    let f1 = tex.rendered(0.0, 0.0);
    let f2 = tex.rendered(1.0, 0.0);
    let config = FlowConfig { pyramid_levels: 1, ..FlowConfig::default() };
    let flow = farneback(&f1, &f2, &config).unwrap();
    let (mean_u, mean_v, _) = interior_stats(&flow, 1.0, 0.0);
    assert!((mean_u - 1.0).abs() < 0.3);
    assert!(mean_v.abs() < 0.3);
}
