//! Small planar geometry vocabulary shared by every stage.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in a plane (pixels or centimeters, depending on context).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(rad: f64) -> Self {
        let (s, c) = rad.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n)
    }

    /// Counter-rotates by 90 degrees in a y-down image frame.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// In-plane rigid motion: rotate about the origin, then translate.
///
/// The rotation uses the image convention (x right, y down), so a positive
/// angle turns clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid {
    pub angle: f64,
    pub cos: f64,
    pub sin: f64,
    pub translation: Point,
}

impl Rigid {
    pub fn new(angle_rad: f64, translation: Point) -> Self {
        let (sin, cos) = angle_rad.sin_cos();
        Self {
            angle: angle_rad,
            cos,
            sin,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, Point::ORIGIN)
    }

    pub fn rotate(&self, v: Point) -> Point {
        Point::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }

    pub fn apply(&self, p: Point) -> Point {
        self.rotate(p) + self.translation
    }

    pub fn inverse_apply(&self, q: Point) -> Point {
        let d = q - self.translation;
        Point::new(self.cos * d.x + self.sin * d.y, -self.sin * d.x + self.cos * d.y)
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle.to_degrees()
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_deg(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `a - b` in degrees, in `(-180, 180]`.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Signed smallest difference `a - b` in radians, in `(-pi, pi]`.
pub fn angle_diff_rad(a: f64, b: f64) -> f64 {
    angle_diff_deg(a.to_degrees(), b.to_degrees()).to_radians()
}

/// Shoelace area of a simple polygon; positive for clockwise-on-screen order.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Sutherland-Hodgman clip of a polygon against the box `[lo, hi]`.
pub fn clip_polygon(poly: &[Point], lo: Point, hi: Point) -> Vec<Point> {
    let mut out = poly.to_vec();
    // (axis, bound, keep-if-greater)
    let planes = [(0, lo.x, true), (0, hi.x, false), (1, lo.y, true), (1, hi.y, false)];
    for (axis, bound, greater) in planes {
        if out.is_empty() {
            break;
        }
        let coord = |p: Point| if axis == 0 { p.x } else { p.y };
        let inside = |p: Point| if greater { coord(p) >= bound } else { coord(p) <= bound };
        let input = std::mem::take(&mut out);
        let mut prev = input[input.len() - 1];
        for &cur in &input {
            let (ci, pi) = (inside(cur), inside(prev));
            if ci != pi {
                let t = (bound - coord(prev)) / (coord(cur) - coord(prev));
                out.push(prev + (cur - prev) * t);
            }
            if ci {
                out.push(cur);
            }
            prev = cur;
        }
    }
    out
}

/// Liang-Barsky clip of segment `a`-`b` against the box `[lo, hi]`.
pub fn clip_segment(a: Point, b: Point, lo: Point, hi: Point) -> Option<(Point, Point)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.x, a.x - lo.x),
        (d.x, hi.x - a.x),
        (-d.y, a.y - lo.y),
        (d.y, hi.y - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| (a + d * t0, a + d * t1))
}
