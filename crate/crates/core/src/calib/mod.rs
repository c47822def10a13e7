//! Pinhole calibration by marker displacement, plus a planar pixel-to-world
//! map fitted from a dot grid.
//!
//! The focal constant ties image and world displacements at a fixed camera
//! placement: `Pd / Rd = f / sqrt(V^2 + H^2)`. All world quantities are
//! centimeters; angles are degrees at the API boundary.

mod dots;
mod planar;

use std::fmt::Write as _;
use std::path::Path;

pub use dots::{detect_dots, otsu_threshold};
pub use planar::{fit_planar_map, GridSpec, Mapped, PlanarFit, PlanarMap, Radial};

use crate::error::{parse_err, Error, Result};
use crate::geom::Point;

/// Camera offsets relative to the object, with derived axial distance and
/// elevation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPlacement {
    v: f64,
    h: f64,
    d: f64,
    theta_deg: f64,
}

impl CameraPlacement {
    pub fn new(v_cm: f64, h_cm: f64) -> Result<Self> {
        Ok(Self {
            v: v_cm,
            h: h_cm,
            d: axial_distance(v_cm, h_cm)?,
            theta_deg: elevation_angle(v_cm, h_cm)?,
        })
    }

    pub fn vertical(&self) -> f64 {
        self.v
    }

    pub fn horizontal(&self) -> f64 {
        self.h
    }

    /// Axial distance `D`, cm.
    pub fn axial(&self) -> f64 {
        self.d
    }

    pub fn elevation_deg(&self) -> f64 {
        self.theta_deg
    }
}

fn check_offsets(v: f64, h: f64) -> Result<()> {
    if !(v >= 0.0 && h >= 0.0) || !v.is_finite() || !h.is_finite() {
        return Err(Error::Domain(format!(
            "offsets must be finite and non-negative (V={v}, H={h})"
        )));
    }
    if v == 0.0 && h == 0.0 {
        return Err(Error::Domain("V and H are both zero".into()));
    }
    Ok(())
}

/// `D = sqrt(V^2 + H^2)`.
pub fn axial_distance(v_cm: f64, h_cm: f64) -> Result<f64> {
    check_offsets(v_cm, h_cm)?;
    Ok(v_cm.hypot(h_cm))
}

/// Angle between the horizontal axis and the camera axis, degrees.
pub fn elevation_angle(v_cm: f64, h_cm: f64) -> Result<f64> {
    check_offsets(v_cm, h_cm)?;
    Ok(v_cm.atan2(h_cm).to_degrees())
}

/// Euclidean distance between two pixel positions.
pub fn pixel_distance(a: Point, b: Point) -> f64 {
    a.dist(b)
}

/// One marker displacement observed in both world and image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementSample {
    pub world_a: Point,
    pub world_b: Point,
    pub pixel_a: Point,
    pub pixel_b: Point,
}

impl DisplacementSample {
    pub fn new(world_a: Point, world_b: Point, pixel_a: Point, pixel_b: Point) -> Result<Self> {
        if world_a == world_b {
            return Err(Error::Domain("world displacement is zero".into()));
        }
        Ok(Self {
            world_a,
            world_b,
            pixel_a,
            pixel_b,
        })
    }

    pub fn pixel_displacement(&self) -> f64 {
        pixel_distance(self.pixel_a, self.pixel_b)
    }

    pub fn world_displacement(&self) -> f64 {
        self.world_a.dist(self.world_b)
    }

    /// `Pd / Rd`, pixels per cm.
    pub fn ratio(&self) -> f64 {
        self.pixel_displacement() / self.world_displacement()
    }
}

/// Smallest world displacement accepted by [`estimate_focal`], cm.
pub const MIN_DISPLACEMENT_CM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FocalEstimate {
    pub f: f64,
    pub mean_ratio: f64,
    pub ratios: Vec<f64>,
    /// Sample standard deviation of the per-sample ratios (0 for one sample).
    pub spread: f64,
}

/// Focal constant from the mean of the per-sample `Pd/Rd` ratios.
pub fn estimate_focal(samples: &[DisplacementSample], placement: &CameraPlacement) -> Result<FocalEstimate> {
    if samples.is_empty() {
        return Err(Error::Domain("no displacement samples".into()));
    }
    let mut ratios = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let rd = s.world_displacement();
        if !(rd >= MIN_DISPLACEMENT_CM) {
            return Err(Error::DegenerateSample { index, rd_cm: rd });
        }
        ratios.push(s.pixel_displacement() / rd);
    }
    let n = ratios.len() as f64;
    let mean_ratio = ratios.iter().sum::<f64>() / n;
    let spread = if ratios.len() > 1 {
        (ratios.iter().map(|r| (r - mean_ratio).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(FocalEstimate {
        f: mean_ratio * placement.axial(),
        mean_ratio,
        ratios,
        spread,
    })
}

/// Immutable calibration: placement, focal constant and the planar map.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    placement: CameraPlacement,
    f: f64,
    px_per_cm: f64,
    map: PlanarMap,
}

impl CalibrationModel {
    pub fn new(placement: CameraPlacement, f: f64, map: PlanarMap) -> Result<Self> {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Domain(format!("focal constant must be positive, got {f}")));
        }
        Ok(Self {
            placement,
            f,
            px_per_cm: f / placement.axial(),
            map,
        })
    }

    /// Builds a model from a measured `Pd/Rd` ratio.
    pub fn from_ratio(placement: CameraPlacement, px_per_cm: f64, map: PlanarMap) -> Result<Self> {
        Self::new(placement, px_per_cm * placement.axial(), map)
    }

    pub fn placement(&self) -> &CameraPlacement {
        &self.placement
    }

    pub fn focal(&self) -> f64 {
        self.f
    }

    pub fn px_per_cm(&self) -> f64 {
        self.px_per_cm
    }

    pub fn map(&self) -> &PlanarMap {
        &self.map
    }

    /// `Rd = Pd * sqrt(V^2 + H^2) / f`.
    pub fn pixels_to_world(&self, pd: f64) -> f64 {
        pd * self.placement.axial() / self.f
    }

    pub fn world_to_pixels(&self, rd: f64) -> f64 {
        rd * self.f / self.placement.axial()
    }

    pub fn map_point(&self, p: Point) -> Mapped {
        self.map.map_point(p)
    }

    pub fn unmap_point(&self, w: Point) -> Mapped {
        self.map.unmap_point(w)
    }

    /// Straight-line world distance between two pixels after correction.
    pub fn corrected_distance(&self, a: Point, b: Point) -> f64 {
        self.map.map_point(a).point.dist(self.map.map_point(b).point)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("pednav-calib v1\n");
        let _ = writeln!(s, "V={:.16e}", self.placement.v);
        let _ = writeln!(s, "H={:.16e}", self.placement.h);
        let _ = writeln!(s, "f={:.16e}", self.f);
        s.push_str(&self.map.to_text_lines());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        match lines.next() {
            Some((_, l)) if l.trim() == "pednav-calib v1" => {}
            Some((i, l)) => return Err(parse_err(i + 1, format!("expected 'pednav-calib v1', got {l:?}"))),
            None => return Err(parse_err(1, "empty calibration document")),
        }
        let (mut v, mut h, mut f) = (None, None, None);
        let mut map_lines = Vec::new();
        for (i, line) in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, "expected key=value"))?;
            let num = || -> Result<f64> {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(i + 1, format!("bad number {:?}", value.trim())))
            };
            match key.trim() {
                "V" => v = Some(num()?),
                "H" => h = Some(num()?),
                "f" => f = Some(num()?),
                other => map_lines.push((i + 1, other.to_string(), value.trim().to_string())),
            }
        }
        let missing = |k: &str| parse_err(0, format!("missing {k}="));
        let placement = CameraPlacement::new(v.ok_or_else(|| missing("V"))?, h.ok_or_else(|| missing("H"))?)?;
        let map = PlanarMap::from_text_lines(&map_lines)?;
        Self::new(placement, f.ok_or_else(|| missing("f"))?, map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn axial_distance_examples() {
        assert!((axial_distance(59.0, 62.6).unwrap() - 86.0).abs() <= 0.1);
        assert!((axial_distance(56.0, 77.0).unwrap() - 95.2).abs() <= 0.1);
        assert_eq!(axial_distance(0.0, 12.5).unwrap(), 12.5);
        assert!(matches!(axial_distance(0.0, 0.0), Err(Error::Domain(_))));
        assert!(axial_distance(-1.0, 2.0).is_err());
    }

    #[test]
    fn elevation_angle_examples() {
        assert!((elevation_angle(59.0, 62.6).unwrap() - 43.3).abs() <= 0.1);
        assert!((elevation_angle(59.0, 86.0).unwrap() - 34.5).abs() <= 0.1);
        assert!((elevation_angle(1.0, 1.0).unwrap() - 45.0).abs() < 1e-12);
        assert!(elevation_angle(0.0, 0.0).is_err());
    }

    #[test]
    fn placement_holds_derived_values() {
        let c = CameraPlacement::new(3.0, 4.0).unwrap();
        assert_eq!(c.axial(), 5.0);
        assert!(c.elevation_deg() > 0.0 && c.elevation_deg() < 90.0);
    }

    #[test]
    fn pixel_distance_examples() {
        assert!((pixel_distance(p(325.0, 224.0), p(335.0, 209.0)) - 18.0).abs() <= 0.1);
        assert!((pixel_distance(p(422.0, 429.0), p(406.0, 441.0)) - 20.0).abs() <= 0.1);
        assert_eq!(pixel_distance(p(7.5, 3.0), p(7.5, 3.0)), 0.0);
    }

    /// Reference calibration-check rows: world endpoints (cm) and pixel endpoints.
    const DISPLACEMENT_ROWS: [[f64; 8]; 5] = [
        [16.4, 10.6, 15.0, 9.4, 422.0, 429.0, 406.0, 441.0],
        [15.0, 11.9, 14.0, 10.2, 405.0, 416.0, 393.0, 433.0],
        [12.0, 13.0, 11.9, 11.8, 368.0, 406.0, 372.0, 418.0],
        [7.7, 11.8, 9.0, 10.4, 311.0, 424.0, 327.0, 437.0],
        [6.8, 10.8, 8.4, 9.7, 300.0, 435.0, 318.0, 445.0],
    ];

    fn reference_samples() -> Vec<DisplacementSample> {
        DISPLACEMENT_ROWS
            .iter()
            .map(|r| DisplacementSample::new(p(r[0], r[1]), p(r[2], r[3]), p(r[4], r[5]), p(r[6], r[7])).unwrap())
            .collect()
    }

    #[test]
    fn focal_from_single_ratio() {
        // a sample whose Pd/Rd is exactly 10.8
        let s = DisplacementSample::new(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 0.0), p(10.8, 0.0)).unwrap();
        let placement = CameraPlacement::new(56.0, 77.0).unwrap();
        let est = estimate_focal(&[s], &placement).unwrap();
        assert!((est.f - 1028.2).abs() <= 1.0);
        assert_eq!(est.spread, 0.0);

        let s = DisplacementSample::new(p(0.0, 0.0), p(0.0, 2.0), p(1.0, 1.0), p(1.0, 3.0)).unwrap();
        let est = estimate_focal(&[s], &CameraPlacement::new(3.0, 4.0).unwrap()).unwrap();
        assert_eq!(est.f, 5.0);
    }

    #[test]
    fn focal_from_all_reference_rows() {
        // oracle: direct arithmetic on the printed coordinate columns
        let oracle_ratios: Vec<f64> = DISPLACEMENT_ROWS
            .iter()
            .map(|r| (r[4] - r[6]).hypot(r[5] - r[7]) / (r[0] - r[2]).hypot(r[1] - r[3]))
            .collect();
        let oracle_f = oracle_ratios.iter().sum::<f64>() / 5.0 * 56f64.hypot(77.0);
        let placement = CameraPlacement::new(56.0, 77.0).unwrap();
        let est = estimate_focal(&reference_samples(), &placement).unwrap();
        assert_eq!(est.ratios, oracle_ratios);
        assert!((est.f - oracle_f).abs() < 1e-9);
        // frozen: the raw coordinates average to 10.660 px/cm
        assert!((est.f - 1014.9).abs() < 0.1, "f = {}", est.f);
        assert!(est.spread > 0.1 && est.spread < 0.2);
        // the printed ratio column averages into the 1024..1035 band
        let printed = [10.8, 10.8, 10.9, 10.8, 10.8];
        let f_printed = printed.iter().sum::<f64>() / 5.0 * placement.axial();
        assert!((1024.0..=1035.0).contains(&f_printed));
    }

    #[test]
    fn degenerate_sample_is_rejected() {
        let mut s = reference_samples();
        s[2].world_b = Point::new(s[2].world_a.x + 1e-8, s[2].world_a.y);
        let placement = CameraPlacement::new(56.0, 77.0).unwrap();
        assert!(matches!(
            estimate_focal(&s, &placement),
            Err(Error::DegenerateSample { index: 2, .. })
        ));
        assert!(estimate_focal(&[], &placement).is_err());
        assert!(DisplacementSample::new(p(1.0, 1.0), p(1.0, 1.0), p(0.0, 0.0), p(1.0, 0.0)).is_err());
    }

    fn reference_model() -> CalibrationModel {
        let placement = CameraPlacement::new(56.0, 77.0).unwrap();
        CalibrationModel::new(placement, 1028.2, PlanarMap::pure_scale(10.8)).unwrap()
    }

    #[test]
    fn pixels_to_world_examples() {
        let c = reference_model();
        assert!((c.pixels_to_world(20.0) - 1.85).abs() <= 0.01);
        assert_eq!(c.pixels_to_world(0.0), 0.0);
        let oracle = 20.6 * 56f64.hypot(77.0) / 1028.2;
        assert!((c.pixels_to_world(20.6) - oracle).abs() < 1e-12);
        assert!((c.pixels_to_world(20.6) - 1.907).abs() <= 0.005);
    }

    #[test]
    fn rejects_non_positive_focal() {
        let placement = CameraPlacement::new(56.0, 77.0).unwrap();
        assert!(CalibrationModel::new(placement, 0.0, PlanarMap::pure_scale(1.0)).is_err());
        assert!(CalibrationModel::new(placement, -3.0, PlanarMap::pure_scale(1.0)).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let h = [0.0931, 0.0012, -31.25, -0.0008, 0.0927, -22.125, 1.1e-5, -2.3e-6, 1.0];
        let map = PlanarMap::new(
            h,
            Some(Radial {
                k1: -3.2e-7,
                center: p(320.0, 240.0),
            }),
            Some((p(10.0, 12.0), p(600.0, 470.0))),
        )
        .unwrap();
        let placement = CameraPlacement::new(56.0, 77.0).unwrap();
        let c = CalibrationModel::new(placement, 1028.2 + 1.0 / 3.0, map).unwrap();
        let text = c.to_text();
        assert!(text.starts_with("pednav-calib v1\nV="));
        let back = CalibrationModel::from_text(&text).unwrap();
        assert_eq!(back, c);
        assert!(CalibrationModel::from_text("pednav-calib v2\n").is_err());
        assert!(CalibrationModel::from_text("pednav-calib v1\nV=1\nH=2\n").is_err());
    }

    proptest! {
        #[test]
        fn focal_identity_holds(v in 0.1f64..200.0, h in 0.1f64..200.0, f in 1.0f64..5000.0) {
            let placement = CameraPlacement::new(v, h).unwrap();
            let c = CalibrationModel::new(placement, f, PlanarMap::pure_scale(1.0)).unwrap();
            prop_assert!((c.focal() - c.px_per_cm() * placement.axial()).abs() / c.focal() < 1e-9);
            prop_assert!((placement.axial() - (v * v + h * h).sqrt()).abs() < 1e-9);
        }

        #[test]
        fn pixels_to_world_is_linear(a in 0.0f64..1000.0, b in 0.0f64..1000.0) {
            let c = reference_model();
            let lhs = c.pixels_to_world(a + b);
            let rhs = c.pixels_to_world(a) + c.pixels_to_world(b);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn pixel_distance_is_a_metric(
            ax in -500.0f64..500.0, ay in -500.0f64..500.0,
            bx in -500.0f64..500.0, by in -500.0f64..500.0,
            cx in -500.0f64..500.0, cy in -500.0f64..500.0,
        ) {
            let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
            prop_assert_eq!(pixel_distance(a, b), pixel_distance(b, a));
            prop_assert_eq!(pixel_distance(a, a), 0.0);
            prop_assert!(pixel_distance(a, c) <= pixel_distance(a, b) + pixel_distance(b, c) + 1e-9);
        }
    }
}
