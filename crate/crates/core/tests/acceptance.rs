//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs as a plain binary (`cargo test -p pednav-core --test acceptance`)
//! and exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use pednav::calib::{
    axial_distance, elevation_angle, estimate_focal, pixel_distance, CameraPlacement, DisplacementSample,
};
use pednav::edgemap::{edge_map, extract_edgels, gradient, EdgeParams};
use pednav::frame::Frame;
use pednav::geom::{angle_diff_deg, Point};
use pednav::matcher::{
    build_model, find, find_in, fit_error, grade, normalized_fit_error, score_formula, SearchParams, SearchWindow,
    Target,
};
use pednav::plangeo::clearance;
use pednav::synth::{model_image, render_marker, MarkerSpec, Scenario, Scene, ScenePose, DEFAULT_PX_PER_CM};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

/// Printed camera-placement rows: V, H, printed D, printed theta, pixel endpoints, printed Pd.
const PLACEMENT_ROWS: [[f64; 9]; 4] = [
    [59.0, 62.6, 86.0, 43.3, 325.0, 224.0, 335.0, 209.0, 18.0],
    [59.0, 86.0, 104.3, 34.5, 353.0, 225.0, 361.0, 214.0, 13.6],
    [59.0, 110.8, 125.5, 28.0, 355.0, 137.0, 363.0, 128.0, 12.0],
    [59.0, 138.0, 150.1, 23.1, 349.0, 48.0, 354.0, 38.0, 11.2],
];

/// Printed displacement rows: world endpoints, pixel endpoints, printed Pd, printed calculated Rd.
const DISPLACEMENT_ROWS: [[f64; 10]; 5] = [
    [16.4, 10.6, 15.0, 9.4, 422.0, 429.0, 406.0, 441.0, 20.0, 1.85],
    [15.0, 11.9, 14.0, 10.2, 405.0, 416.0, 393.0, 433.0, 20.8, 1.93],
    [12.0, 13.0, 11.9, 11.8, 368.0, 406.0, 372.0, 418.0, 12.6, 1.16],
    [7.7, 11.8, 9.0, 10.4, 311.0, 424.0, 327.0, 437.0, 20.6, 1.92],
    [6.8, 10.8, 8.4, 9.7, 300.0, 435.0, 318.0, 445.0, 20.6, 1.91],
];

/// Rows 4 and 5 print the same Pd (20.6) but different calculated Rd.
const INCONSISTENT_ROWS: [usize; 2] = [3, 4];

fn table_reproduction() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut ok = true;
    for r in PLACEMENT_ROWS {
        let d = axial_distance(r[0], r[1]).unwrap();
        let theta = elevation_angle(r[0], r[1]).unwrap();
        let pd = pixel_distance(p(r[4], r[5]), p(r[6], r[7]));
        worst.0 = worst.0.max((d - r[2]).abs());
        worst.1 = worst.1.max((theta - r[3]).abs());
        worst.2 = worst.2.max((pd - r[8]).abs());
    }
    let placement = CameraPlacement::new(56.0, 77.0).unwrap();
    worst.0 = worst.0.max((placement.axial() - 95.2).abs());
    // f from a sample whose ratio is exactly 10.8
    let unit = DisplacementSample::new(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 0.0), p(10.8, 0.0)).unwrap();
    let f = estimate_focal(&[unit], &placement).unwrap().f;
    let f_err = (f - 1028.2).abs();
    let mut rd_notes = Vec::new();
    for (i, r) in DISPLACEMENT_ROWS.iter().enumerate() {
        let pd = pixel_distance(p(r[4], r[5]), p(r[6], r[7]));
        worst.2 = worst.2.max((pd - r[8]).abs());
        let rd = pd * placement.axial() / 1028.2;
        let tol = if INCONSISTENT_ROWS.contains(&i) { 0.03 } else { 0.02 };
        let err = (rd - r[9]).abs();
        ok &= err <= tol;
        rd_notes.push(format!(
            "{:.3}{}",
            err,
            if INCONSISTENT_ROWS.contains(&i) { "*" } else { "" }
        ));
    }
    ok &= worst.0 <= 0.1 && worst.1 <= 0.1 && worst.2 <= 0.1 && f_err <= 1.0;
    check(
        ok,
        format!(
            "max|dD|={:.3} cm, max|dTheta|={:.3} deg, max|dPd|={:.3} px, f={:.2}, |dRd|=[{}] (* flagged row)",
            worst.0,
            worst.1,
            worst.2,
            f,
            rd_notes.join(", ")
        ),
    )
}

fn pose_accuracy() -> Outcome {
    let spec = MarkerSpec::canonical();
    let model = common::marker_model();
    let params = SearchParams::default();
    let mut rng = common::rng(2024);
    let mut ok = true;
    let mut notes = Vec::new();
    for (sigma, max_px, max_deg) in [(0.0, 0.5, 0.5), (5.0, 1.0, 1.0)] {
        let (mut errs, mut angs, mut misses) = (Vec::new(), Vec::new(), 0);
        for k in 0..200 {
            let c = p(rng.random_range(40.0..600.0), rng.random_range(40.0..440.0));
            let a = rng.random_range(0.0..360.0);
            let pose = ScenePose {
                noise_sigma: sigma,
                clutter_seed: k,
                clutter: 6,
                ..ScenePose::new(c, a)
            };
            let frame = render_marker(&spec, &pose, 640, 480).unwrap();
            match find(&model, &edge_map(&frame, &EdgeParams::default()), &params).first() {
                Some(m) => {
                    errs.push(m.centroid.dist(c));
                    angs.push(angle_diff_deg(m.angle, a).abs());
                }
                None => misses += 1,
            }
        }
        let mean = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
        let max = errs.iter().copied().fold(0.0, f64::max);
        let amax = angs.iter().copied().fold(0.0, f64::max);
        let pass = misses == 0 && max <= max_px && amax <= max_deg && (sigma > 0.0 || mean <= 0.25);
        ok &= pass;
        notes.push(format!(
            "sigma={sigma}: mean {mean:.4} px, max {max:.4} px ({:.4} cm), max angle {amax:.3} deg, misses {misses}",
            max / DEFAULT_PX_PER_CM
        ));
    }
    check(ok, notes.join("; "))
}

fn search_time() -> Outcome {
    let spec = MarkerSpec::canonical();
    let model = common::marker_model();
    let params = SearchParams::default();
    let mut rng = common::rng(77);
    let (mut seeded, mut full) = (Vec::new(), Vec::new());
    let mut misses = 0;
    for k in 0..200 {
        let c = p(rng.random_range(40.0..600.0), rng.random_range(40.0..440.0));
        let pose = ScenePose {
            noise_sigma: 5.0,
            clutter_seed: k,
            clutter: 10,
            ..ScenePose::new(c, rng.random_range(0.0..360.0))
        };
        let frame = render_marker(&spec, &pose, 640, 480).unwrap();
        let map = edge_map(&frame, &EdgeParams::default());
        // seed as a tracker would: last centroid a few pixels off
        let window = SearchWindow {
            center: c + p(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            radius: 32.0,
        };
        let t0 = Instant::now();
        let target = Target::new(&map);
        let hits = find_in(&model, &map, &target, &params, Some(window));
        seeded.push(t0.elapsed().as_secs_f64() * 1e3);
        let t0 = Instant::now();
        let target = Target::new(&map);
        let all = find_in(&model, &map, &target, &params, None);
        full.push(t0.elapsed().as_secs_f64() * 1e3);
        if hits.is_empty() || all.is_empty() {
            misses += 1;
        }
    }
    seeded.sort_by(f64::total_cmp);
    full.sort_by(f64::total_cmp);
    let (p50, p95, max) = (
        common::percentile(&seeded, 0.5),
        common::percentile(&seeded, 0.95),
        seeded[seeded.len() - 1],
    );
    let f50 = common::percentile(&full, 0.5);
    check(
        p50 <= 15.0 && p95 <= 30.0 && f50 <= 60.0 && misses == 0,
        format!(
            "seeded P50 {p50:.2} ms, P95 {p95:.2} ms, max {max:.2} ms (reference max 11.5 ms); full-frame P50 {f50:.2} ms; misses {misses}"
        ),
    )
}

fn scoring_properties() -> Outcome {
    let spec = MarkerSpec::canonical();
    let params = SearchParams::default();
    let mut notes = Vec::new();

    // perfect fit: the model graded against its own source image
    let (img, center) = model_image(&spec, DEFAULT_PX_PER_CM);
    let model = build_model(&img, &EdgeParams::default())
        .unwrap()
        .with_reference_in_source(center);
    let own = edge_map(&img, &EdgeParams::default());
    let g = grade(&model, &Target::new(&own), &model.source_pose(), &params);
    let perfect = g.fit_error == 0.0 && g.score == g.model_coverage;
    notes.push(format!(
        "perfect fit_error={:?}, score={} coverage={}",
        g.fit_error, g.score, g.model_coverage
    ));

    // clutter in the empty corners of the occurrence box of a 45 degree marker
    let c = p(320.3, 240.6);
    let render = |with_clutter: bool| {
        let mut scene = Scene::new(640, 480).unwrap();
        scene.marker(&spec, c, 45.0, DEFAULT_PX_PER_CM).unwrap();
        if with_clutter {
            for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let q = c + p(sx * 15.0, sy * 15.0);
                let sq = [q + p(-2.5, -2.5), q + p(2.5, -2.5), q + p(2.5, 2.5), q + p(-2.5, 2.5)];
                scene.polygon(&sq, 70.0);
            }
        }
        scene.finish(0.0, 1, 0)
    };
    let model = common::marker_model();
    let clean = find(&model, &edge_map(&render(false), &EdgeParams::default()), &params);
    let dirty = find(&model, &edge_map(&render(true), &EdgeParams::default()), &params);
    let clutter_ok = match (clean.first(), dirty.first()) {
        (Some(a), Some(b)) => {
            notes.push(format!(
                "clutter: score {:.3} -> {:.3}, target_score {:.3} -> {:.3}",
                a.score, b.score, a.target_score, b.target_score
            ));
            b.target_score < a.target_score && (b.score - a.score).abs() <= 0.5
        }
        _ => {
            notes.push("clutter: marker not found".into());
            false
        }
    };

    // hand arithmetic
    let formula_ok = score_formula(80.0, 1.0, 0.1) == 72.0
        && score_formula(100.0, 1.0, 0.0) == 100.0
        && normalized_fit_error(1.0, 2.0) == 0.25
        && normalized_fit_error(9.0, 2.0) == 1.0
        && score_formula(50.0, 100.0, 0.25) == 0.0
        && fit_error(&[
            (p(0.0, 0.0), p(1.0, 0.0)),
            (p(0.0, 0.0), p(0.0, 1.0)),
            (p(0.0, 0.0), p(1.0, 1.0)),
        ])
        .unwrap()
            == 4.0 / 3.0;
    notes.push(format!(
        "formula examples {}",
        if formula_ok { "exact" } else { "mismatch" }
    ));
    check(perfect && clutter_ok && formula_ok, notes.join("; "))
}

fn corridor_oracle() -> Outcome {
    let mut rng = common::rng(5);
    let (mut tested, mut excluded, mut flag_mismatch) = (0, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let probe = common::random_probe(&mut rng);
        let got = clearance(probe.point, &probe.cyl);
        let oracle = common::monte_carlo_clearance(probe.point, &probe.cyl, 1_000_000);
        worst = worst.max(((probe.cyl.radius - oracle.radial) - got.radial_clearance).abs());
        if common::boundary_distance(&probe) < 1e-6 {
            excluded += 1;
            continue;
        }
        tested += 1;
        if got.inside != oracle.inside {
            flag_mismatch += 1;
        }
    }
    check(
        flag_mismatch == 0 && worst <= 1e-3,
        format!("{tested} probes compared ({excluded} on the boundary), flag mismatches {flag_mismatch}, max clearance diff {worst:.2e} cm"),
    )
}

fn scenario_end_to_end() -> Outcome {
    let spec = MarkerSpec::canonical();
    let mut notes = Vec::new();

    let straight = Scenario::straight(0.0, 11);
    let mut sess = common::registered_session(&straight);
    for f in straight.render(&spec).unwrap() {
        sess.step(&f).unwrap();
    }
    let truth = straight.truth();
    let violations = sess.states().iter().filter(|s| s.violation).count();
    let final_depth = sess.states().last().and_then(|s| s.depth).unwrap_or(f64::NAN);
    let scripted = truth.last().unwrap().depth_cm;
    let straight_ok = violations == 0 && (final_depth - scripted).abs() <= 0.05;
    notes.push(format!(
        "straight: {violations} violation frames, final depth {final_depth:.4} vs {scripted:.4} cm"
    ));

    let veering = Scenario::veering(0.0, 11);
    let mut sess = common::registered_session(&veering);
    for f in veering.render(&spec).unwrap() {
        sess.step(&f).unwrap();
    }
    let exit = veering.truth().iter().position(|t| t.violation);
    let raised = sess.states().iter().position(|s| s.violation);
    let veer_ok = matches!((exit, raised), (Some(e), Some(r)) if r >= e && r - e <= 3);
    notes.push(format!(
        "veering: truth exit frame {exit:?}, alert raised frame {raised:?}"
    ));
    check(straight_ok && veer_ok, notes.join("; "))
}

fn edge_analytics() -> Outcome {
    let ramp = Frame::from_fn(32, 24, |x, y| (3 * x + 4 * y) as u8).unwrap();
    let g = gradient(&ramp);
    let mut worst = 0.0f64;
    for y in 1..23 {
        for x in 1..31 {
            worst = worst.max((g.mag[g.index(x, y)] as f64 / 8.0 - 5.0).abs());
        }
    }
    // anti-aliased vertical steps at ten subpixel offsets
    let (mut loc, mut count) = (0.0f64, 0);
    for k in 0..10 {
        let edge = 20.0 + 0.1 * k as f64 + 0.037;
        let step = Frame::from_fn(48, 40, |x, _| {
            let dark = (edge - (x as f64 - 0.5)).clamp(0.0, 1.0);
            (210.0 - 200.0 * dark).round() as u8
        })
        .unwrap();
        let edgels = extract_edgels(&gradient(&step), 100.0, 400.0);
        count += edgels.len();
        if edgels.is_empty() {
            loc = f64::INFINITY;
        }
        loc = edgels.iter().map(|e| (e.position.x - edge).abs()).fold(loc, f64::max);
    }
    check(
        worst <= 1e-6 && loc <= 0.1,
        format!("ramp max|mag-5|={worst:.1e}; step edge max offset {loc:.4} px over {count} edgels at 10 offsets"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("table reproduction", table_reproduction),
        ("pose accuracy", pose_accuracy),
        ("search time", search_time),
        ("scoring properties", scoring_properties),
        ("corridor oracle", corridor_oracle),
        ("scenario end-to-end", scenario_end_to_end),
        ("edge analytics", edge_analytics),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t0 = Instant::now();
        let out = run();
        let secs = t0.elapsed().as_secs_f64();
        failed += usize::from(!out.pass);
        println!(
            "{} {name} ({secs:.2} s): {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
