//! Registration against the pre-operative plan and the pedicle corridor
//! (a cylinder in the calibrated world plane).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::calib::CalibrationModel;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::kv::{fmt_f64, KvDoc};
use crate::matcher::Match;

pub const PLAN_HEADER: &str = "pednav-plan v1";

/// Default registration tolerance, cm.
pub const REGISTRATION_TOLERANCE_CM: f64 = 0.1;

/// Numbers lifted from pre-operative planning, in world centimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurgicalPlan {
    /// x positions of the three reference lines, strictly increasing.
    pub line_x: [f64; 3],
    pub entry: Point,
    /// Canal axis inclination from the plan vertical (world -y), degrees;
    /// positive leans toward +x.
    pub axis_angle_deg: f64,
    pub canal_min_width_cm: f64,
    pub canal_length_cm: f64,
    /// Distance from the marker centroid to the drill tip along the drill axis.
    pub tip_offset_cm: f64,
}

impl SurgicalPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.canal_min_width_cm > 0.0) || !(self.canal_length_cm > 0.0) {
            return Err(Error::Domain("canal width and length must be positive".into()));
        }
        if !(self.line_x[0] < self.line_x[1] && self.line_x[1] < self.line_x[2]) {
            return Err(Error::Domain(format!(
                "line_x must increase strictly: {:?}",
                self.line_x
            )));
        }
        Ok(())
    }

    pub fn axis_dir(&self) -> Point {
        let a = self.axis_angle_deg.to_radians();
        Point::new(a.sin(), -a.cos())
    }

    pub fn write_kv(&self, s: &mut String) {
        let l = &self.line_x;
        let _ = writeln!(s, "line_x = {},{},{}", fmt_f64(l[0]), fmt_f64(l[1]), fmt_f64(l[2]));
        let _ = writeln!(s, "entry = {},{}", fmt_f64(self.entry.x), fmt_f64(self.entry.y));
        let _ = writeln!(s, "axis_angle_deg = {}", fmt_f64(self.axis_angle_deg));
        let _ = writeln!(s, "canal_min_width_cm = {}", fmt_f64(self.canal_min_width_cm));
        let _ = writeln!(s, "canal_length_cm = {}", fmt_f64(self.canal_length_cm));
        let _ = writeln!(s, "tip_offset_cm = {}", fmt_f64(self.tip_offset_cm));
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{PLAN_HEADER}\n");
        self.write_kv(&mut s);
        s
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let lines = doc.list("line_x")?;
        let line_x: [f64; 3] = lines
            .try_into()
            .map_err(|_| Error::Domain("line_x needs three values".into()))?;
        let entry = match doc.list("entry")?.as_slice() {
            [x, y] => Point::new(*x, *y),
            _ => return Err(Error::Domain("entry needs x,y".into())),
        };
        let plan = Self {
            line_x,
            entry,
            axis_angle_deg: doc.f64("axis_angle_deg")?,
            canal_min_width_cm: doc.f64("canal_min_width_cm")?,
            canal_length_cm: doc.f64("canal_length_cm")?,
            tip_offset_cm: doc.f64_or("tip_offset_cm", 0.0)?,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_kv(&KvDoc::parse(text, Some(PLAN_HEADER))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// The corridor: a cylinder whose axis lies in the world plane (z = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub base_center: Vector3<f64>,
    pub axis_dir: Vector3<f64>,
    pub radius: f64,
    pub height: f64,
}

impl Cylinder {
    pub fn new(base_center: Vector3<f64>, axis: Vector3<f64>, radius: f64, height: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !(radius > 0.0) || !(height > 0.0) {
            return Err(Error::Domain("cylinder needs a non-zero axis and positive size".into()));
        }
        Ok(Self {
            base_center,
            axis_dir: axis / n,
            radius,
            height,
        })
    }

    pub fn top_center(&self) -> Vector3<f64> {
        self.base_center + self.axis_dir * self.height
    }
}

pub fn build_cylinder(plan: &SurgicalPlan) -> Cylinder {
    let a = plan.axis_dir();
    Cylinder {
        base_center: Vector3::new(plan.entry.x, plan.entry.y, 0.0),
        axis_dir: Vector3::new(a.x, a.y, 0.0),
        radius: plan.canal_min_width_cm / 2.0,
        height: plan.canal_length_cm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    /// `radius - radial`; negative outside the lateral wall.
    pub radial_clearance: f64,
    pub axial_depth: f64,
    pub radial: f64,
    pub inside: bool,
}

pub fn clearance(p: Vector3<f64>, cyl: &Cylinder) -> Clearance {
    let rel = p - cyl.base_center;
    let depth = rel.dot(&cyl.axis_dir);
    let radial = (rel - cyl.axis_dir * depth).norm();
    Clearance {
        radial_clearance: cyl.radius - radial,
        axial_depth: depth,
        radial,
        inside: radial <= cyl.radius && (0.0..=cyl.height).contains(&depth),
    }
}

pub fn clearance_2d(p: Point, cyl: &Cylinder) -> Clearance {
    clearance(Vector3::new(p.x, p.y, 0.0), cyl)
}

/// Needle landmarks marked in the image and how well they meet the plan's lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    pub needle_points: [Point; 3],
    pub residual: f64,
    pub finalized: bool,
}

/// Largest horizontal world deviation between the needles (taken left to
/// right) and the plan's three reference lines.
pub fn alignment_residual(needles: &[Point; 3], plan: &SurgicalPlan, calib: &CalibrationModel) -> f64 {
    let mut xs: Vec<f64> = needles.iter().map(|&n| calib.map_point(n).point.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.iter()
        .zip(plan.line_x.iter())
        .map(|(x, l)| (x - l).abs())
        .fold(0.0, f64::max)
}

/// Finalized iff `residual <= tol` (closed tolerance).
pub fn finalize_registration(needles: [Point; 3], residual: f64, tol: f64) -> Registration {
    Registration {
        needle_points: needles,
        residual,
        finalized: residual <= tol,
    }
}

/// The tracked drill axis in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrillLine {
    pub point: Point,
    /// Unit direction of insertion.
    pub direction: Point,
}

impl DrillLine {
    pub fn tip(&self, offset_cm: f64) -> Point {
        self.point + self.direction * offset_cm
    }

    /// Direction angle from the plan vertical, degrees (same convention as
    /// [`SurgicalPlan::axis_angle_deg`]).
    pub fn angle_deg(&self) -> f64 {
        self.direction.x.atan2(-self.direction.y).to_degrees()
    }
}

/// Insertion direction of the marker in image coordinates at match angle
/// `angle_deg`: the marker's own -y axis, rotated.
pub fn marker_axis_image(angle_deg: f64) -> Point {
    let a = angle_deg.to_radians();
    Point::new(a.sin(), -a.cos())
}

/// Drill axis through the marker centroid, mapped into the world plane.
pub fn drill_axis(m: &Match, calib: &CalibrationModel, registration: Option<&Registration>) -> Result<DrillLine> {
    if !registration.is_some_and(|r| r.finalized) {
        return Err(Error::Unregistered);
    }
    let origin = calib.map_point(m.centroid).point;
    let step = 0.5;
    let ahead = calib.map_point(m.centroid + marker_axis_image(m.angle) * step).point;
    let behind = calib.map_point(m.centroid - marker_axis_image(m.angle) * step).point;
    Ok(DrillLine {
        point: origin,
        direction: (ahead - behind).normalized(),
    })
}
