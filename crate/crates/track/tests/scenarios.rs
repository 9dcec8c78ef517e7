//! Simulated trajectory harnesses exercising the full tracker loop.

use mmkit_track::{
    associate, BoundingBox, Detection, TrackStatus, Tracker, TrackerConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

fn unit_vec(dim: usize, hot: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[hot] = 1.0;
    v
}

fn det_at(frame: u32, cx: f64, cy: f64, hot: usize) -> Detection {
    let bbox = BoundingBox::from_cwh(cx, cy, 20.0, 40.0).unwrap();
    Detection::new(frame, bbox, 0.9, unit_vec(8, hot)).unwrap()
}

#[test]
fn one_clean_walker_yields_one_confirmed_track_covering_every_frame() {
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    for t in 0..20u32 {
        let cx = 30.0 + 3.0 * t as f64;
        let cy = 50.0 + 1.0 * t as f64;
        tracker.step(t, &[det_at(t, cx, cy, 0)]).unwrap();
    }

    let confirmed = tracker.confirmed_tracks();
    assert_eq!(confirmed.len(), 1, "expected exactly one confirmed track");
    assert_eq!(tracker.tracks().len(), 1, "no spurious extra tracks");
    let track = confirmed[0];
    assert_eq!(track.history.len(), 20);
    let frames: Vec<u32> = track.history.iter().map(|&(f, _)| f).collect();
    assert_eq!(frames, (0..20).collect::<Vec<_>>());

    let records = tracker.records();
    assert_eq!(records.len(), 20);
    assert!(records.iter().all(|r| r.track_id == track.id));
}

#[test]
fn starved_tracks_are_deleted_after_max_misses() {
    let config = TrackerConfig { max_misses: 5, ..TrackerConfig::default() };
    let mut tracker = Tracker::new(config).unwrap();
    for t in 0..4u32 {
        tracker.step(t, &[det_at(t, 50.0, 50.0, 0)]).unwrap();
    }
    assert_eq!(tracker.tracks()[0].status, TrackStatus::Confirmed);

    // max_misses + 1 empty frames: the sixth miss crosses the limit.
    for t in 4..10u32 {
        tracker.step(t, &[]).unwrap();
    }
    let track = &tracker.tracks()[0];
    assert_eq!(track.status, TrackStatus::Deleted);
    let history_at_death = track.history.len();

    // Deleted tracks receive no further updates, even with matching input.
    tracker.step(10, &[det_at(10, 50.0, 50.0, 0)]).unwrap();
    let old = &tracker.tracks()[0];
    assert_eq!(old.status, TrackStatus::Deleted);
    assert_eq!(old.history.len(), history_at_death);
    // The reappearance spawned a fresh id instead of resurrecting the old.
    assert_eq!(tracker.tracks().len(), 2);
    assert!(tracker.tracks()[1].id > old.id);
}

#[test]
fn track_ids_strictly_increase_and_never_recur() {
    let config =
        TrackerConfig { max_misses: 1, confirm_hits: 2, ..TrackerConfig::default() };
    let mut tracker = Tracker::new(config).unwrap();
    let mut frame = 0u32;
    // Three generations of appear-then-vanish.
    for generation in 0..3 {
        for _ in 0..3 {
            tracker.step(frame, &[det_at(frame, 40.0 + generation as f64, 40.0, 0)]).unwrap();
            frame += 1;
        }
        for _ in 0..3 {
            tracker.step(frame, &[]).unwrap();
            frame += 1;
        }
    }
    let ids: Vec<u64> = tracker.tracks().iter().map(|t| t.id).collect();
    assert_eq!(ids.len(), 3);
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "ids not strictly increasing: {ids:?}");
    let unique: std::collections::BTreeSet<u64> = ids.iter().copied().collect();
    assert_eq!(unique.len(), ids.len());
}

#[test]
fn orthogonal_appearances_survive_a_path_crossing() {
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let frames = 31u32;
    for t in 0..frames {
        let a = det_at(t, 20.0 + 4.0 * t as f64, 60.0, 0);
        let b = det_at(t, 140.0 - 4.0 * t as f64, 60.0, 1);
        tracker.step(t, &[a, b]).unwrap();
    }

    let confirmed = tracker.confirmed_tracks();
    assert_eq!(confirmed.len(), 2, "crossing should not spawn or drop tracks");

    // The track seeded on the left must end on the right, and vice versa.
    let (first, second) = (confirmed[0], confirmed[1]);
    let start_cx = |t: &mmkit_track::Track| t.history.first().unwrap().1.to_cwh()[0];
    let end_cx = |t: &mmkit_track::Track| t.history.last().unwrap().1.to_cwh()[0];
    let (left, right) =
        if start_cx(first) < start_cx(second) { (first, second) } else { (second, first) };
    let t_last = (frames - 1) as f64;
    assert!(
        (end_cx(left) - (20.0 + 4.0 * t_last)).abs() < 2.0,
        "left walker ended at {}",
        end_cx(left)
    );
    assert!(
        (end_cx(right) - (140.0 - 4.0 * t_last)).abs() < 2.0,
        "right walker ended at {}",
        end_cx(right)
    );
    assert_eq!(left.history.len(), frames as usize);
    assert_eq!(right.history.len(), frames as usize);
}

#[test]
fn noiseless_constant_velocity_converges_below_1e6() {
    // Vanishing measurement noise makes each update snap to the exact
    // detection; process noise keeps the prior honest but cannot pull the
    // posterior off the measurement once the gain saturates.
    let config = TrackerConfig { measurement_noise: 1e-9, ..TrackerConfig::default() };
    let mut tracker = Tracker::new(config).unwrap();
    let truth = |t: u32| (25.0 + 2.5 * t as f64, 40.0 + 1.5 * t as f64);
    for t in 0..6u32 {
        let (cx, cy) = truth(t);
        tracker.step(t, &[det_at(t, cx, cy, 0)]).unwrap();

        if t >= 3 {
            let track = &tracker.tracks()[0];
            let (_, bbox) = *track.history.last().unwrap();
            let [got_cx, got_cy, _, _] = bbox.to_cwh();
            let err = ((got_cx - cx).powi(2) + (got_cy - cy).powi(2)).sqrt();
            assert!(err < 1e-6, "frame {t}: position error {err}");
        }
    }
}

#[test]
fn association_ignores_detection_order() {
    let config = TrackerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for round in 0..30 {
        let n = 5;
        let mut tracker = Tracker::new(config.clone()).unwrap();
        let dets0: Vec<Detection> = (0..n)
            .map(|i| det_at(0, 30.0 + 35.0 * i as f64, 50.0, i))
            .collect();
        tracker.step(0, &dets0).unwrap();
        let tracks = tracker.tracks().to_vec();

        let dets1: Vec<Detection> = (0..n)
            .map(|i| {
                det_at(1, 30.0 + 35.0 * i as f64 + rng.gen_range(-3.0..3.0), 52.0, i)
            })
            .collect();
        let baseline = associate(&tracks, &dets1, &config).unwrap();
        let baseline_set: std::collections::BTreeSet<(u64, usize)> = baseline
            .matches
            .iter()
            .map(|&(t, d)| (tracks[t].id, d))
            .collect();

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<Detection> = order.iter().map(|&i| dets1[i].clone()).collect();
        let permuted = associate(&tracks, &shuffled, &config).unwrap();
        let permuted_set: std::collections::BTreeSet<(u64, usize)> = permuted
            .matches
            .iter()
            .map(|&(t, d)| (tracks[t].id, order[d]))
            .collect();

        assert_eq!(baseline_set, permuted_set, "round {round}: order changed the match set");
    }
}

#[test]
fn tentative_only_tracks_stay_out_of_the_records() {
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    tracker.step(0, &[det_at(0, 50.0, 50.0, 0)]).unwrap();
    tracker.step(1, &[det_at(1, 52.0, 50.0, 0)]).unwrap();
    // Two hits < confirm_hits(3): never confirmed, so no records.
    for t in 2..5u32 {
        tracker.step(t, &[]).unwrap();
    }
    assert!(tracker.confirmed_tracks().is_empty());
    assert!(tracker.records().is_empty());
}
