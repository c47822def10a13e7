//! Deterministic scene synthesis with exact ground truth: the canonical
//! marker, calibration dot grids, registration needles and scripted drill
//! insertions.
//!
//! Rendering is exact-area anti-aliasing: each pixel takes the fraction of
//! its unit square covered by every polygon, composited in drawing order.
//! Pixel `(x, y)` covers `[x - 0.5, x + 0.5] x [y - 0.5, y + 0.5]`, so its
//! center sits on integer coordinates like the edge extractor assumes.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calib::{CalibrationModel, CameraPlacement, GridSpec, PlanarMap};
use crate::error::{parse_err, Error, Result};
use crate::frame::Frame;
use crate::geom::{clip_polygon, polygon_area, Point, Rigid};
use crate::kv::{fmt_f64, parse_list, KvDoc};
use crate::plangeo::{build_cylinder, clearance_2d, SurgicalPlan};

pub const BACKGROUND: f64 = 190.0;
pub const MARKER_BODY: f64 = 35.0;
pub const MARKER_LIGHT: f64 = 235.0;
pub const DOT_INK: f64 = 30.0;

/// Pixels per centimeter of the reference calibration setup.
pub const DEFAULT_PX_PER_CM: f64 = 10.8;

const DISK_SIDES: usize = 256;

/// Vertex ring approximating a circle.
pub fn circle(center: Point, radius: f64, sides: usize) -> Vec<Point> {
    (0..sides)
        .map(|k| center + Point::from_angle(TAU * k as f64 / sides as f64) * radius)
        .collect()
}

/// The drill marker: a dark square carrying light interior cut-outs, in
/// centimeters with y down. Coordinates are centered on the length-weighted
/// centroid of the full contour.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSpec {
    pub side_cm: f64,
    pub body: Vec<Point>,
    pub cutouts: Vec<Vec<Point>>,
}

impl MarkerSpec {
    /// Square border, an L-shaped notch with unequal arms along two sides and
    /// an off-center disk. No rotation by a multiple of 90 degrees maps it
    /// onto itself.
    pub fn canonical() -> Self {
        let side = 2.5;
        let h = side / 2.0;
        let body = vec![
            Point::new(-h, -h),
            Point::new(h, -h),
            Point::new(h, h),
            Point::new(-h, h),
        ];
        let notch = vec![
            Point::new(-0.75, -0.95),
            Point::new(0.45, -0.95),
            Point::new(0.45, -0.55),
            Point::new(-0.35, -0.55),
            Point::new(-0.35, 0.95),
            Point::new(-0.75, 0.95),
        ];
        let disk = circle(Point::new(0.5, 0.25), 0.37, DISK_SIDES);
        let mut spec = Self {
            side_cm: side,
            body,
            cutouts: vec![notch, disk],
        };
        let c = spec.contour_centroid();
        spec.body.iter_mut().for_each(|p| *p = *p - c);
        for poly in &mut spec.cutouts {
            poly.iter_mut().for_each(|p| *p = *p - c);
        }
        spec
    }

    /// All closed outlines of the figure.
    pub fn figure(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.body.as_slice()).chain(self.cutouts.iter().map(Vec::as_slice))
    }

    /// Total outline length, cm.
    pub fn contour_length(&self) -> f64 {
        self.figure().map(ring_length).sum()
    }

    pub fn contour_centroid(&self) -> Point {
        let (mut acc, mut total) = (Point::ORIGIN, 0.0);
        for ring in self.figure() {
            for (a, b) in ring_segments(ring) {
                let l = a.dist(b);
                acc = acc + (a + b) * (0.5 * l);
                total += l;
            }
        }
        acc * (1.0 / total)
    }

    /// Pixel-space outlines at the given placement.
    pub fn placed(&self, center: Point, angle_deg: f64, px_per_cm: f64) -> (Vec<Point>, Vec<Vec<Point>>) {
        let r = Rigid::new(angle_deg.to_radians(), center);
        let tf = |ring: &[Point]| ring.iter().map(|&p| r.apply(p * px_per_cm)).collect::<Vec<_>>();
        (tf(&self.body), self.cutouts.iter().map(|c| tf(c)).collect())
    }
}

fn ring_segments(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

fn ring_length(ring: &[Point]) -> f64 {
    ring_segments(ring).map(|(a, b)| a.dist(b)).sum()
}

fn bounds(points: &[Point]) -> (Point, Point) {
    crate::edgemap::bbox_of(points.iter().copied())
}

/// Ground truth for a rendered marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePose {
    pub center: Point,
    pub angle_deg: f64,
    pub px_per_cm: f64,
    pub noise_sigma: f64,
    pub clutter_seed: u64,
    /// Number of clutter polygons.
    pub clutter: usize,
}

impl ScenePose {
    pub fn new(center: Point, angle_deg: f64) -> Self {
        Self {
            center,
            angle_deg,
            px_per_cm: DEFAULT_PX_PER_CM,
            noise_sigma: 0.0,
            clutter_seed: 0,
            clutter: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.px_per_cm > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Domain("scene needs px_per_cm > 0 and noise_sigma >= 0".into()));
        }
        Ok(())
    }
}

/// Floating-point canvas composited with exact pixel coverage.
#[derive(Debug, Clone)]
pub struct Scene {
    width: usize,
    height: usize,
    buf: Vec<f64>,
    keep_out: Vec<(Point, Point)>,
}

impl Scene {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Frame::filled(width, height, 0)?;
        Ok(Self {
            width,
            height,
            buf: vec![BACKGROUND; width * height],
            keep_out: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Paints `poly` (pixel coordinates, any orientation) with `value`.
    pub fn polygon(&mut self, poly: &[Point], value: f64) {
        if poly.len() < 3 {
            return;
        }
        let (lo, hi) = bounds(poly);
        let x0 = (lo.x + 0.5).floor().max(0.0) as usize;
        let y0 = (lo.y + 0.5).floor().max(0.0) as usize;
        let x1 = ((hi.x + 0.5).floor() as i64).min(self.width as i64 - 1);
        let y1 = ((hi.y + 0.5).floor() as i64).min(self.height as i64 - 1);
        if x1 < 0 || y1 < 0 {
            return;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let (fx, fy) = (x as f64, y as f64);
                let cell = clip_polygon(poly, Point::new(fx - 0.5, fy - 0.5), Point::new(fx + 0.5, fy + 0.5));
                if cell.len() < 3 {
                    continue;
                }
                let cov = polygon_area(&cell).abs().min(1.0);
                let v = &mut self.buf[y * self.width + x];
                *v += (value - *v) * cov;
            }
        }
    }

    pub fn disk(&mut self, center: Point, radius: f64, value: f64) {
        self.polygon(&circle(center, radius, DISK_SIDES), value);
    }

    /// Draws the marker; fails when any part would leave the frame.
    pub fn marker(&mut self, spec: &MarkerSpec, center: Point, angle_deg: f64, px_per_cm: f64) -> Result<()> {
        let (body, cutouts) = spec.placed(center, angle_deg, px_per_cm);
        let (lo, hi) = bounds(&body);
        if lo.x < 0.0 || lo.y < 0.0 || hi.x > (self.width - 1) as f64 || hi.y > (self.height - 1) as f64 {
            return Err(Error::OutOfFrame);
        }
        self.polygon(&body, MARKER_BODY);
        for c in &cutouts {
            self.polygon(c, MARKER_LIGHT);
        }
        self.keep_out.push((lo, hi));
        Ok(())
    }

    /// Random dark convex polygons kept clear of every marker drawn so far.
    pub fn clutter(&mut self, count: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let margin = 8.0;
        let mut placed = 0;
        for _ in 0..count * 50 {
            if placed == count {
                break;
            }
            let r = rng.random_range(5.0..18.0);
            let c = Point::new(
                rng.random_range(r..self.width as f64 - r),
                rng.random_range(r..self.height as f64 - r),
            );
            let sides = rng.random_range(3..=6usize);
            let mut angles: Vec<f64> = (0..sides).map(|_| rng.random_range(0.0..TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let poly: Vec<Point> = angles
                .iter()
                .map(|&a| c + Point::from_angle(a) * (r * rng.random_range(0.6..1.0)))
                .collect();
            let value = rng.random_range(40.0..110.0);
            let (lo, hi) = bounds(&poly);
            let clear = self.keep_out.iter().all(|(klo, khi)| {
                hi.x + margin < klo.x || lo.x - margin > khi.x || hi.y + margin < klo.y || lo.y - margin > khi.y
            });
            if clear && polygon_area(&poly).abs() > 10.0 {
                self.polygon(&poly, value);
                placed += 1;
            }
        }
    }

    /// Adds seeded Gaussian noise and quantizes.
    pub fn finish(self, noise_sigma: f64, seed: u64, stream: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 + stream);
        let noise = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("finite sigma"));
        let pixels = self
            .buf
            .iter()
            .map(|&v| {
                let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                (v + n).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Frame::new(self.width, self.height, pixels).expect("validated size")
    }
}

/// Renders one marker at `pose` on a plain background.
pub fn render_marker(spec: &MarkerSpec, pose: &ScenePose, width: usize, height: usize) -> Result<Frame> {
    pose.validate()?;
    let mut scene = Scene::new(width, height)?;
    scene.marker(spec, pose.center, pose.angle_deg, pose.px_per_cm)?;
    scene.clutter(pose.clutter, pose.clutter_seed);
    Ok(scene.finish(pose.noise_sigma, pose.clutter_seed, 0))
}

/// Renders a marker image for model building: angle 0, noise-free, with the
/// marker center at a quarter-pixel offset from the frame center. Returns the
/// frame and the exact marker center.
pub fn model_image(spec: &MarkerSpec, px_per_cm: f64) -> (Frame, Point) {
    let extent = spec.side_cm * std::f64::consts::SQRT_2 * px_per_cm;
    let side = ((extent + 24.0).ceil() as usize).max(32);
    let center = Point::new(side as f64 / 2.0 + 0.25, side as f64 / 2.0 - 0.25);
    let frame = render_marker(
        spec,
        &ScenePose {
            px_per_cm,
            ..ScenePose::new(center, 0.0)
        },
        side,
        side,
    )
    .expect("marker fits by construction");
    (frame, center)
}

/// Pixel-to-world map of a camera tilted by `tilt_deg` about the world
/// x axis: `px_per_cm` at `world_center`, which lands on `center_px`.
pub fn tilted_view(px_per_cm: f64, tilt_deg: f64, center_px: Point, world_center: Point) -> Result<PlanarMap> {
    let focal = 800.0;
    let z0 = focal / px_per_cm;
    let (s, c) = tilt_deg.to_radians().sin_cos();
    let (cx, cy) = (center_px.x, center_px.y);
    let project = Matrix3::new(
        focal,
        cx * s,
        cx * z0, //
        0.0,
        focal * c + cy * s,
        cy * z0, //
        0.0,
        s,
        z0,
    );
    let shift = Matrix3::new(1.0, 0.0, -world_center.x, 0.0, 1.0, -world_center.y, 0.0, 0.0, 1.0);
    let inv = (project * shift)
        .try_inverse()
        .ok_or_else(|| Error::Domain("degenerate view".into()))?;
    let inv = inv / inv[(2, 2)];
    let h: Vec<f64> = inv.transpose().iter().copied().collect();
    PlanarMap::new(h.try_into().expect("3x3"), None, None)
}

/// Dot grid as seen through `map` (whose inverse places world points in the
/// image). Each dot is a world-space circle pushed through the map.
pub fn render_grid(
    spec: &GridSpec,
    map: &PlanarMap,
    width: usize,
    height: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Frame> {
    let mut scene = Scene::new(width, height)?;
    for (_, _, w) in spec.dots() {
        let ring: Vec<Point> = circle(w, spec.dot_radius_cm, 96)
            .into_iter()
            .map(|p| map.unmap_point(p).point)
            .collect();
        scene.polygon(&ring, DOT_INK);
    }
    Ok(scene.finish(noise_sigma, seed, 0))
}

/// Needle tips for registration, drawn as small dark disks on the
/// plan's reference lines plus per-needle world x offsets. Returns the frame
/// and the exact pixel positions.
pub fn render_needles(
    calib: &CalibrationModel,
    plan: &SurgicalPlan,
    offsets_cm: [f64; 3],
    y_cm: f64,
    width: usize,
    height: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Frame, [Point; 3])> {
    let mut scene = Scene::new(width, height)?;
    let mut truth = [Point::ORIGIN; 3];
    for i in 0..3 {
        let w = Point::new(plan.line_x[i] + offsets_cm[i], y_cm);
        let ring: Vec<Point> = circle(w, 0.15, 96)
            .into_iter()
            .map(|p| calib.unmap_point(p).point)
            .collect();
        scene.polygon(&ring, DOT_INK);
        truth[i] = calib.unmap_point(w).point;
    }
    Ok((scene.finish(noise_sigma, seed, 0), truth))
}

pub const SCENARIO_HEADER: &str = "pednav-scenario v1";

/// Marker centroid (world cm) and drill axis angle from the plan vertical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrillPose {
    pub centroid: Point,
    pub axis_deg: f64,
}

/// Per-frame ground truth of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub frame: usize,
    pub pose: DrillPose,
    pub centroid_px: Point,
    pub tip: Point,
    pub depth_cm: f64,
    pub radial_cm: f64,
    pub inside: bool,
    /// Tip outside the corridor at positive depth within its height.
    pub violation: bool,
}

/// A scripted insertion: camera, scene, plan and one pose per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub px_per_cm: f64,
    pub origin_px: Point,
    pub noise_sigma: f64,
    pub seed: u64,
    pub clutter: usize,
    pub plan: SurgicalPlan,
    pub poses: Vec<DrillPose>,
}

/// Camera offsets of the reference calibration setup.
pub const CAMERA_V_CM: f64 = 56.0;
pub const CAMERA_H_CM: f64 = 77.0;

impl Scenario {
    fn base(name: &str, noise_sigma: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            width: 640,
            height: 480,
            px_per_cm: DEFAULT_PX_PER_CM,
            origin_px: Point::new(320.0, 240.0),
            noise_sigma,
            seed,
            clutter: 0,
            plan: SurgicalPlan {
                line_x: [-4.0, 0.0, 4.0],
                entry: Point::ORIGIN,
                axis_angle_deg: 15.0,
                canal_min_width_cm: 0.7,
                canal_length_cm: 4.0,
                tip_offset_cm: 3.0,
            },
            poses: Vec::new(),
        }
    }

    fn pose_at_depth(&self, depth: f64, lateral: f64) -> DrillPose {
        let dir = self.plan.axis_dir();
        let tip = self.plan.entry + dir * depth + dir.perp() * lateral;
        DrillPose {
            centroid: tip - dir * self.plan.tip_offset_cm,
            axis_deg: self.plan.axis_angle_deg,
        }
    }

    /// 120 frames straight down the corridor axis, tip depth -1 to 3.5 cm.
    pub fn straight(noise_sigma: f64, seed: u64) -> Self {
        let mut s = Self::base("straight", noise_sigma, seed);
        let n: usize = 120;
        s.poses = (0..n)
            .map(|k| s.pose_at_depth(-1.0 + 4.5 * k as f64 / (n - 1) as f64, 0.0))
            .collect();
        s
    }

    /// Same descent, but after frame 40 the drill drifts sideways by
    /// 0.012 cm per frame up to 0.4 cm: it leaves the 0.35 cm corridor.
    pub fn veering(noise_sigma: f64, seed: u64) -> Self {
        let mut s = Self::base("veering", noise_sigma, seed);
        let n: usize = 120;
        let k0: usize = 40;
        s.poses = (0..n)
            .map(|k| {
                let lateral = (0.012 * k.saturating_sub(k0) as f64).min(0.4);
                s.pose_at_depth(-1.0 + 4.5 * k as f64 / (n - 1) as f64, lateral)
            })
            .collect();
        s
    }

    /// Camera model: similarity map at `px_per_cm` about `origin_px`.
    pub fn calibration(&self) -> CalibrationModel {
        let placement = CameraPlacement::new(CAMERA_V_CM, CAMERA_H_CM).expect("positive offsets");
        CalibrationModel::from_ratio(
            placement,
            self.px_per_cm,
            PlanarMap::scale_offset(self.px_per_cm, self.origin_px),
        )
        .expect("positive scale")
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Renders one frame for an arbitrary pose; noise is seeded per frame.
    pub fn render_pose(&self, spec: &MarkerSpec, pose: DrillPose, frame_index: usize) -> Result<Frame> {
        let calib = self.calibration();
        let center = calib.unmap_point(pose.centroid).point;
        let mut scene = Scene::new(self.width, self.height)?;
        scene.marker(spec, center, pose.axis_deg, self.px_per_cm)?;
        scene.clutter(self.clutter, self.seed);
        let mut f = scene.finish(self.noise_sigma, self.seed, frame_index as u64);
        f.timestamp_ms = Some(frame_index as u64 * 33);
        Ok(f)
    }

    pub fn render(&self, spec: &MarkerSpec) -> Result<Vec<Frame>> {
        self.poses
            .iter()
            .enumerate()
            .map(|(k, &p)| self.render_pose(spec, p, k))
            .collect()
    }

    pub fn truth_for(&self, frame: usize, pose: DrillPose) -> Truth {
        let calib = self.calibration();
        let a = pose.axis_deg.to_radians();
        let dir = Point::new(a.sin(), -a.cos());
        let tip = pose.centroid + dir * self.plan.tip_offset_cm;
        let cyl = build_cylinder(&self.plan);
        let c = clearance_2d(tip, &cyl);
        Truth {
            frame,
            pose,
            centroid_px: calib.unmap_point(pose.centroid).point,
            tip,
            depth_cm: c.axial_depth,
            radial_cm: c.radial,
            inside: c.inside,
            violation: c.axial_depth > 0.0 && c.axial_depth <= cyl.height && c.radial > cyl.radius,
        }
    }

    pub fn truth(&self) -> Vec<Truth> {
        self.poses
            .iter()
            .enumerate()
            .map(|(k, &p)| self.truth_for(k, p))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{SCENARIO_HEADER}\n");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let _ = writeln!(s, "px_per_cm = {}", fmt_f64(self.px_per_cm));
        let _ = writeln!(
            s,
            "origin_px = {},{}",
            fmt_f64(self.origin_px.x),
            fmt_f64(self.origin_px.y)
        );
        let _ = writeln!(s, "noise_sigma = {}", fmt_f64(self.noise_sigma));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "clutter = {}", self.clutter);
        self.plan.write_kv(&mut s);
        for p in &self.poses {
            let _ = writeln!(
                s,
                "pose = {},{},{}",
                fmt_f64(p.centroid.x),
                fmt_f64(p.centroid.y),
                fmt_f64(p.axis_deg)
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text, Some(SCENARIO_HEADER))?;
        let uint = |key: &str, default: u64| -> Result<u64> {
            match doc.get(key) {
                None => Ok(default),
                Some((line, v)) => v.parse().map_err(|_| parse_err(line, format!("{key}: not an integer"))),
            }
        };
        let origin = match doc.get("origin_px") {
            None => Point::new(320.0, 240.0),
            Some((line, v)) => match parse_list(line, v)?.as_slice() {
                [x, y] => Point::new(*x, *y),
                _ => return Err(parse_err(line, "origin_px needs x,y")),
            },
        };
        let poses = doc
            .all("pose")
            .map(|(line, v)| match parse_list(line, v)?.as_slice() {
                [x, y, a] => Ok(DrillPose {
                    centroid: Point::new(*x, *y),
                    axis_deg: *a,
                }),
                _ => Err(parse_err(line, "pose needs x_cm,y_cm,axis_deg")),
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Self {
            name: doc.get("name").map_or("scenario", |(_, v)| v).to_string(),
            width: uint("width", 640)? as usize,
            height: uint("height", 480)? as usize,
            px_per_cm: doc.f64_or("px_per_cm", DEFAULT_PX_PER_CM)?,
            origin_px: origin,
            noise_sigma: doc.f64_or("noise_sigma", 0.0)?,
            seed: uint("seed", 0)?,
            clutter: uint("clutter", 0)? as usize,
            plan: SurgicalPlan::from_kv(&doc)?,
            poses,
        };
        if !(s.px_per_cm > 0.0) || !(s.noise_sigma >= 0.0) {
            return Err(Error::Domain(
                "scenario needs px_per_cm > 0 and noise_sigma >= 0".into(),
            ));
        }
        Frame::filled(s.width, s.height, 0)?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub const TRUTH_HEADER: &str =
    "frame,x_cm,y_cm,axis_deg,cx_px,cy_px,tip_x_cm,tip_y_cm,depth_cm,radial_cm,inside,violation";

pub fn truth_csv(rows: &[Truth]) -> String {
    let mut s = format!("{TRUTH_HEADER}\n");
    for t in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            t.frame,
            fmt_f64(t.pose.centroid.x),
            fmt_f64(t.pose.centroid.y),
            fmt_f64(t.pose.axis_deg),
            fmt_f64(t.centroid_px.x),
            fmt_f64(t.centroid_px.y),
            fmt_f64(t.tip.x),
            fmt_f64(t.tip.y),
            fmt_f64(t.depth_cm),
            fmt_f64(t.radial_cm),
            u8::from(t.inside),
            u8::from(t.violation)
        );
    }
    s
}

/// Rendered scenario: frames plus truth.
#[derive(Debug, Clone)]
pub struct RenderedScenario {
    pub frames: Vec<Frame>,
    pub truth: Vec<Truth>,
}

pub fn render_scenario(script: &Scenario, spec: &MarkerSpec) -> Result<RenderedScenario> {
    Ok(RenderedScenario {
        frames: script.render(spec)?,
        truth: script.truth(),
    })
}
