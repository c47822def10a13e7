#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::Vector3;
use pednav::edgemap::EdgeParams;
use pednav::geom::Point;
use pednav::matcher::{build_model, GeometricModel};
use pednav::navigate::{FrozenClock, Session, SessionParams};
use pednav::plangeo::{alignment_residual, finalize_registration, Cylinder, REGISTRATION_TOLERANCE_CM};
use pednav::synth::{model_image, MarkerSpec, Scenario, DEFAULT_PX_PER_CM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Marker model at the default scale, reference at the rendered centroid.
pub fn marker_model() -> GeometricModel {
    static MODEL: OnceLock<GeometricModel> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let (img, center) = model_image(&MarkerSpec::canonical(), DEFAULT_PX_PER_CM);
            build_model(&img, &EdgeParams::default())
                .expect("marker has edges")
                .with_reference_in_source(center)
        })
        .clone()
}

/// A session on the scenario's camera, registered with needles placed on the
/// plan lines.
pub fn registered_session(s: &Scenario) -> Session {
    let calib = s.calibration();
    let mut sess = Session::new(calib.clone(), marker_model(), s.plan, SessionParams::default())
        .expect("valid scenario")
        .with_clock(Box::new(FrozenClock));
    let needles = s.plan.line_x.map(|x| calib.unmap_point(Point::new(x, 2.0)).point);
    let residual = alignment_residual(&needles, &s.plan, &calib);
    sess.set_registration(finalize_registration(needles, residual, REGISTRATION_TOLERANCE_CM));
    sess
}

/// A corridor in random pose plus a probe point given in the corridor's own
/// frame: `rho` from the axis at axial position `z`.
pub struct Probe {
    pub cyl: Cylinder,
    pub point: Vector3<f64>,
    pub rho: f64,
    pub z: f64,
}

pub fn random_probe(rng: &mut ChaCha8Rng) -> Probe {
    let axis = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 0.2 && v.norm() <= 1.0 {
            break v.normalize();
        }
    };
    let base = Vector3::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
    );
    let radius = rng.random_range(0.2..1.0);
    let height = rng.random_range(1.0..6.0);
    let cyl = Cylinder::new(base, axis, radius, height).expect("valid corridor");
    let u = axis.cross(&Vector3::new(0.3, -0.5, 0.8)).normalize();
    let v = axis.cross(&u);
    let rho = rng.random_range(0.0..2.0 * radius);
    let z = rng.random_range(-0.5..height + 0.5);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let point = base + axis * z + (u * phi.cos() + v * phi.sin()) * rho;
    Probe { cyl, point, rho, z }
}

/// Brute-force clearance: the probe is compared against `samples` points
/// spread along the corridor axis (with a cm of overrun at both ends). The
/// nearest sample and its neighbors pin down the foot of the perpendicular,
/// since squared distance along the axis is a parabola.
pub struct Oracle {
    pub radial: f64,
    pub depth: f64,
    pub inside: bool,
}

pub fn monte_carlo_clearance(p: Vector3<f64>, cyl: &Cylinder, samples: usize) -> Oracle {
    let (t0, t1) = (-1.0, cyl.height + 1.0);
    let dt = (t1 - t0) / (samples - 1) as f64;
    let d2 = |i: usize| (cyl.base_center + cyl.axis_dir * (t0 + dt * i as f64) - p).norm_squared();
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..samples {
        let d = d2(i);
        if d < best.0 {
            best = (d, i);
        }
    }
    let i = best.1.clamp(1, samples - 2);
    let (a, b, c) = (d2(i - 1), d2(i), d2(i + 1));
    // vertex of the parabola through the three samples
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    let depth = t0 + dt * (i as f64 + shift);
    let radial = (b - (shift * dt).powi(2)).max(0.0).sqrt();
    Oracle {
        radial,
        depth,
        inside: radial <= cyl.radius && depth >= 0.0 && depth <= cyl.height,
    }
}

/// Distance of a probe from the corridor surface, from its construction.
pub fn boundary_distance(p: &Probe) -> f64 {
    let h = p.cyl.height;
    let r = p.cyl.radius;
    let along = if p.z < 0.0 {
        -p.z
    } else if p.z > h {
        p.z - h
    } else {
        0.0
    };
    let across = (p.rho - r).max(0.0);
    if along == 0.0 && across == 0.0 {
        // interior: nearest of wall and the two caps
        (r - p.rho).min(p.z).min(h - p.z)
    } else {
        along.hypot(across)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}
