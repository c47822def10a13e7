mod common;

use pednav::edgemap::{edge_map, EdgeParams};
use pednav::frame::{read_seq, write_seq};
use pednav::geom::Point;
use pednav::matcher::{find, find_in, GeometricModel, SearchParams, Target};
use pednav::navigate::{report_csv, Track};
use pednav::plangeo::clearance;
use pednav::synth::{MarkerSpec, Scenario, Scene, DEFAULT_PX_PER_CM};

#[test]
fn clearance_agrees_with_monte_carlo() {
    let mut rng = common::rng(41);
    for _ in 0..100 {
        let probe = common::random_probe(&mut rng);
        let got = clearance(probe.point, &probe.cyl);
        let oracle = common::monte_carlo_clearance(probe.point, &probe.cyl, 1_000_000);
        assert!((got.radial_clearance - (probe.cyl.radius - oracle.radial)).abs() <= 1e-3);
        assert!((got.axial_depth - oracle.depth).abs() <= 1e-3);
        if common::boundary_distance(&probe) >= 1e-6 {
            assert_eq!(got.inside, oracle.inside, "rho {} z {}", probe.rho, probe.z);
        }
    }
}

#[test]
fn monte_carlo_oracle_sees_the_construction() {
    // the oracle itself, against the probe's own coordinates
    let mut rng = common::rng(3);
    for _ in 0..20 {
        let probe = common::random_probe(&mut rng);
        let o = common::monte_carlo_clearance(probe.point, &probe.cyl, 100_000);
        assert!((o.radial - probe.rho).abs() < 1e-6);
        assert!((o.depth - probe.z).abs() < 1e-6);
    }
}

fn corner_clutter(angle: f64, with: bool) -> pednav::frame::Frame {
    let spec = MarkerSpec::canonical();
    let c = Point::new(300.4, 200.2);
    let mut scene = Scene::new(640, 480).unwrap();
    scene.marker(&spec, c, angle, DEFAULT_PX_PER_CM).unwrap();
    if with {
        for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
            let q = c + Point::new(sx * 15.0, sy * 15.0);
            let sq = [
                q + Point::new(-2.5, -2.5),
                q + Point::new(2.5, -2.5),
                q + Point::new(2.5, 2.5),
                q + Point::new(-2.5, 2.5),
            ];
            scene.polygon(&sq, 70.0);
        }
    }
    scene.finish(0.0, 1, 0)
}

#[test]
fn clutter_in_the_box_lowers_only_target_score() {
    let model = common::marker_model();
    let params = SearchParams::default();
    for angle in [40.0, 45.0, 50.0, 135.0, 225.0, 315.0] {
        let clean = find(
            &model,
            &edge_map(&corner_clutter(angle, false), &EdgeParams::default()),
            &params,
        );
        let dirty = find(
            &model,
            &edge_map(&corner_clutter(angle, true), &EdgeParams::default()),
            &params,
        );
        let (a, b) = (clean[0], dirty[0]);
        assert!(
            (a.score - b.score).abs() <= 0.5,
            "angle {angle}: {} vs {}",
            a.score,
            b.score
        );
        assert!(b.target_score < a.target_score, "angle {angle}");
        assert!(b.target_score < b.score);
        assert_eq!(a.model_coverage, b.model_coverage);
    }
}

#[test]
fn seeded_window_tracks_as_well_as_full_search() {
    let spec = MarkerSpec::canonical();
    let model = common::marker_model();
    let params = SearchParams::default();
    let mut last = Point::new(200.0, 240.0);
    for k in 0..40 {
        // 4.5 px per frame with a slow turn
        let c = Point::new(200.0 + 4.5 * k as f64, 240.0 + 0.7 * k as f64);
        let angle = 20.0 + 0.8 * k as f64;
        let mut scene = Scene::new(640, 480).unwrap();
        scene.marker(&spec, c, angle, DEFAULT_PX_PER_CM).unwrap();
        let map = edge_map(&scene.finish(0.0, 1, 0), &EdgeParams::default());
        let target = Target::new(&map);
        let window = pednav::matcher::SearchWindow {
            center: last,
            radius: 32.0,
        };
        let seeded = find_in(&model, &map, &target, &params, Some(window))[0];
        let full = find_in(&model, &map, &target, &params, None)[0];
        assert!(seeded.centroid.dist(c) <= full.centroid.dist(c) + 0.1, "frame {k}");
        last = seeded.centroid;
    }
}

#[test]
fn model_file_round_trip_keeps_matches() {
    let model = common::marker_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("marker.model");
    model.save(&path).unwrap();
    let back = GeometricModel::load(&path).unwrap();
    let frame = corner_clutter(33.0, false);
    let map = edge_map(&frame, &EdgeParams::default());
    let params = SearchParams::default();
    assert_eq!(find(&model, &map, &params), find(&back, &map, &params));
}

#[test]
fn recorded_sequence_replays_identically() {
    let mut s = Scenario::veering(3.0, 8);
    s.poses = s.poses[60..76].to_vec();
    s.clutter = 5;
    let frames = s.render(&MarkerSpec::canonical()).unwrap();
    let mut bytes = Vec::new();
    write_seq(&mut bytes, &frames).unwrap();
    let replay = read_seq(bytes.as_slice()).unwrap();
    assert_eq!(replay.len(), frames.len());

    let mut live = common::registered_session(&s);
    let mut recorded = common::registered_session(&s);
    for (a, b) in frames.iter().zip(&replay) {
        live.step(a).unwrap();
        recorded.step(b).unwrap();
    }
    assert_eq!(live.report().unwrap(), recorded.report().unwrap());
    assert_eq!(live.states(), recorded.states());
    assert!(live.states().iter().all(|st| st.track == Track::Tracking));
    let csv = report_csv(live.states()).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn debounced_flag_follows_truth_closely() {
    let s = Scenario::veering(0.0, 2);
    let spec = MarkerSpec::canonical();
    let mut sess = common::registered_session(&s);
    for f in s.render(&spec).unwrap() {
        sess.step(&f).unwrap();
    }
    let truth = s.truth();
    // longest run of frames where the debounced flag disagrees with truth
    let mut run = 0;
    let mut worst = 0;
    for (st, t) in sess.states().iter().zip(&truth) {
        run = if st.violation != t.violation { run + 1 } else { 0 };
        worst = worst.max(run);
    }
    assert!(worst <= 3, "flag lagged truth for {worst} frames");
}
