use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::dots::{assign_lattice, detect_dots};
use crate::error::{parse_err, Error, Result};
use crate::frame::Frame;
use crate::geom::Point;

/// One-coefficient radial correction applied in pixel space before the
/// homography: `q = c + (p - c) * (1 + k1 * |p - c|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub k1: f64,
    pub center: Point,
}

impl Radial {
    fn undistort(&self, p: Point) -> Point {
        let d = p - self.center;
        self.center + d * (1.0 + self.k1 * d.norm_sq())
    }

    /// Inverts `undistort` along the ray through the center (Newton on the radius).
    fn distort(&self, q: Point) -> Point {
        let d = q - self.center;
        let s = d.norm();
        if s == 0.0 || self.k1 == 0.0 {
            return q;
        }
        let mut rho = s;
        for _ in 0..30 {
            let g = rho + self.k1 * rho * rho * rho - s;
            let dg = 1.0 + 3.0 * self.k1 * rho * rho;
            let step = g / dg;
            rho -= step;
            if step.abs() < 1e-13 * s.max(1.0) {
                break;
            }
        }
        self.center + d * (rho / s)
    }
}

/// A mapped point plus a flag raised when the input lay outside the
/// calibrated region (the mapping is still applied).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapped {
    pub point: Point,
    pub extrapolated: bool,
}

/// Pixel-to-world planar mapping: optional radial correction followed by a
/// projective homography (row-major, pixel -> world).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarMap {
    homography: [f64; 9],
    inverse: [f64; 9],
    radial: Option<Radial>,
    region: Option<(Point, Point)>,
}

fn to_matrix(h: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(h)
}

fn from_matrix(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

fn apply_h(h: &[f64; 9], p: Point) -> Point {
    let w = h[6] * p.x + h[7] * p.y + h[8];
    Point::new(
        (h[0] * p.x + h[1] * p.y + h[2]) / w,
        (h[3] * p.x + h[4] * p.y + h[5]) / w,
    )
}

impl PlanarMap {
    pub fn new(homography: [f64; 9], radial: Option<Radial>, region: Option<(Point, Point)>) -> Result<Self> {
        let m = to_matrix(&homography);
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::Domain("homography is singular".into()));
        }
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Domain("homography is not invertible".into()))?;
        Ok(Self {
            homography,
            inverse: from_matrix(&inv),
            radial,
            region,
        })
    }

    /// `px_per_cm` pixels map to one centimeter on both axes.
    pub fn pure_scale(px_per_cm: f64) -> Self {
        let s = 1.0 / px_per_cm;
        Self::new([s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1.0], None, None).expect("non-zero scale")
    }

    /// Similarity map: world = (pixel - origin_px) / px_per_cm.
    pub fn scale_offset(px_per_cm: f64, origin_px: Point) -> Self {
        let s = 1.0 / px_per_cm;
        Self::new(
            [s, 0.0, -origin_px.x * s, 0.0, s, -origin_px.y * s, 0.0, 0.0, 1.0],
            None,
            None,
        )
        .expect("non-zero scale")
    }

    pub fn homography(&self) -> &[f64; 9] {
        &self.homography
    }

    pub fn radial(&self) -> Option<Radial> {
        self.radial
    }

    pub fn region(&self) -> Option<(Point, Point)> {
        self.region
    }

    pub fn with_region(mut self, region: Option<(Point, Point)>) -> Self {
        self.region = region;
        self
    }

    fn outside(&self, p: Point) -> bool {
        match self.region {
            Some((lo, hi)) => p.x < lo.x || p.y < lo.y || p.x > hi.x || p.y > hi.y,
            None => false,
        }
    }

    pub fn map_point(&self, p: Point) -> Mapped {
        let q = match self.radial {
            Some(r) => r.undistort(p),
            None => p,
        };
        Mapped {
            point: apply_h(&self.homography, q),
            extrapolated: self.outside(p),
        }
    }

    pub fn unmap_point(&self, w: Point) -> Mapped {
        let q = apply_h(&self.inverse, w);
        let p = match self.radial {
            Some(r) => r.distort(q),
            None => q,
        };
        Mapped {
            point: p,
            extrapolated: self.outside(p),
        }
    }

    /// Local pixels-per-cm scale at a pixel (geometric mean of the two axes).
    pub fn local_scale(&self, p: Point) -> f64 {
        let e = 0.5;
        let o = self.map_point(p).point;
        let dx = self.map_point(p + Point::new(e, 0.0)).point - o;
        let dy = self.map_point(p + Point::new(0.0, e)).point - o;
        let area = dx.cross(dy).abs();
        e / area.sqrt()
    }

    pub(super) fn to_text_lines(&self) -> String {
        let mut s = String::from("homography=");
        for (i, v) in self.homography.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v:.16e}");
        }
        s.push('\n');
        if let Some(r) = self.radial {
            let _ = writeln!(s, "k1={:.16e}", r.k1);
            let _ = writeln!(s, "center={:.16e},{:.16e}", r.center.x, r.center.y);
        }
        if let Some((lo, hi)) = self.region {
            let _ = writeln!(s, "region={:.16e},{:.16e},{:.16e},{:.16e}", lo.x, lo.y, hi.x, hi.y);
        }
        s
    }

    pub(super) fn from_text_lines(lines: &[(usize, String, String)]) -> Result<Self> {
        let mut h = None;
        let mut k1 = None;
        let mut center = None;
        let mut region = None;
        for (line, key, value) in lines {
            let nums = |sep: char| -> Result<Vec<f64>> {
                value
                    .split(sep)
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| parse_err(*line, format!("bad number {t:?}")))
                    })
                    .collect()
            };
            match key.as_str() {
                "homography" => {
                    let v = nums(' ')?;
                    let arr: [f64; 9] = v
                        .try_into()
                        .map_err(|_| parse_err(*line, "homography needs 9 coefficients"))?;
                    h = Some(arr);
                }
                "k1" => {
                    k1 = Some(
                        nums(',')?
                            .first()
                            .copied()
                            .ok_or_else(|| parse_err(*line, "empty k1"))?,
                    )
                }
                "center" => match nums(',')?.as_slice() {
                    [x, y] => center = Some(Point::new(*x, *y)),
                    _ => return Err(parse_err(*line, "center needs x,y")),
                },
                "region" => match nums(',')?.as_slice() {
                    [a, b, c, d] => region = Some((Point::new(*a, *b), Point::new(*c, *d))),
                    _ => return Err(parse_err(*line, "region needs x0,y0,x1,y1")),
                },
                other => return Err(parse_err(*line, format!("unknown key {other:?}"))),
            }
        }
        let h = h.ok_or_else(|| parse_err(0, "missing homography="))?;
        let radial = match (k1, center) {
            (Some(k1), Some(center)) => Some(Radial { k1, center }),
            (None, None) => None,
            _ => return Err(parse_err(0, "k1= and center= must appear together")),
        };
        Self::new(h, radial, region)
    }
}

/// A dot grid: `cols x rows` dots at `pitch_cm`; dot (col i, row j) sits at
/// world `origin_cm + (i * pitch, j * pitch)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    pub pitch_cm: f64,
    pub dot_radius_cm: f64,
    pub origin_cm: Point,
    /// Also fit the one-coefficient radial term.
    pub fit_radial: bool,
}

impl GridSpec {
    pub fn new(cols: usize, rows: usize, pitch_cm: f64, dot_radius_cm: f64) -> Self {
        Self {
            cols,
            rows,
            pitch_cm,
            dot_radius_cm,
            origin_cm: Point::ORIGIN,
            fit_radial: false,
        }
    }

    pub fn world(&self, col: usize, row: usize) -> Point {
        self.origin_cm + Point::new(col as f64 * self.pitch_cm, row as f64 * self.pitch_cm)
    }

    pub fn dots(&self) -> impl Iterator<Item = (usize, usize, Point)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (c, r, self.world(c, r))))
    }
}

/// Result of [`fit_planar_map`].
#[derive(Debug, Clone)]
pub struct PlanarFit {
    pub map: PlanarMap,
    /// Per-dot world -> pixel round-trip residual, RMS and max, in pixels.
    pub rms_px: f64,
    pub max_px: f64,
    /// Detected dot centroids with their grid world positions.
    pub correspondences: Vec<(Point, Point)>,
}

pub const MAX_CONDITION: f64 = 1e8;

/// Isotropic normalization: centroid to origin, mean distance sqrt(2).
fn normalizer(pts: &[Point]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Point::ORIGIN, |a, &p| a + p) * (1.0 / n);
    let mean_d = pts.iter().map(|&p| p.dist(c)).sum::<f64>() / n;
    let s = if mean_d > 0.0 {
        std::f64::consts::SQRT_2 / mean_d
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn transform(m: &Matrix3<f64>, p: Point) -> Point {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

/// Normalized DLT for `src -> dst`. Returns the homography in normalized
/// coordinates together with the two normalizers and the condition number.
fn dlt(src: &[Point], dst: &[Point]) -> Result<(Matrix3<f64>, Matrix3<f64>, Matrix3<f64>)> {
    let ts = normalizer(src);
    let td = normalizer(dst);
    let n = src.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for i in 0..n {
        let p = transform(&ts, src[i]);
        let q = transform(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-p.x, -p.y, -1.0, 0.0, 0.0, 0.0, q.x * p.x, q.x * p.y, q.x]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y]);
    }
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // singular values of A are the square roots of the eigenvalues of A^T A
    let sv = |k: usize| eig.eigenvalues[order[k]].max(0.0).sqrt();
    let cond = if sv(1) > 0.0 { sv(8) / sv(1) } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let v = eig.eigenvectors.column(order[0]);
    let h = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
    Ok((h, ts, td))
}

/// Detects the dot grid, fits a homography by least squares and, when
/// requested, a single radial coefficient.
pub fn fit_planar_map(grid_image: &Frame, spec: &GridSpec) -> Result<PlanarFit> {
    let needed = 16;
    let dots = detect_dots(grid_image)?;
    if dots.len() < needed {
        return Err(Error::TooFewDots {
            found: dots.len(),
            needed,
        });
    }
    let assigned = assign_lattice(&dots, spec)?;
    let (pix, world): (Vec<Point>, Vec<Point>) = assigned.iter().copied().unzip();

    let (hn, tp, tw) = dlt(&pix, &world)?;
    let hn = hn / hn[(2, 2)];
    let center = Point::new(grid_image.width() as f64 / 2.0, grid_image.height() as f64 / 2.0);
    let radius = pix.iter().map(|&p| p.dist(center)).fold(1.0, f64::max);

    // Gauss-Newton / LM on world-space residuals in normalized coordinates.
    // params: 8 free entries of the normalized homography (h33 = 1) and,
    // optionally, kappa = k1 * radius^2.
    let nparams = if spec.fit_radial { 9 } else { 8 };
    let mut theta = DVector::<f64>::zeros(nparams);
    for k in 0..8 {
        theta[k] = hn[(k / 3, k % 3)];
    }
    let tw_world: Vec<Point> = world.iter().map(|&w| transform(&tw, w)).collect();
    let residuals = |theta: &DVector<f64>| -> DVector<f64> {
        let m = Matrix3::new(
            theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6], theta[7], 1.0,
        );
        let k1 = if theta.len() > 8 {
            theta[8] / (radius * radius)
        } else {
            0.0
        };
        let radial = Radial { k1, center };
        let mut r = DVector::zeros(2 * pix.len());
        for (i, &p) in pix.iter().enumerate() {
            let q = transform(&(m * tp), radial.undistort(p));
            r[2 * i] = q.x - tw_world[i].x;
            r[2 * i + 1] = q.y - tw_world[i].y;
        }
        r
    };
    let mut r = residuals(&theta);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..60 {
        let mut jac = DMatrix::<f64>::zeros(r.len(), nparams);
        for k in 0..nparams {
            let step = 1e-7 * theta[k].abs().max(1e-2);
            let mut tp_ = theta.clone();
            tp_[k] += step;
            let mut tm_ = theta.clone();
            tm_[k] -= step;
            let col = (residuals(&tp_) - residuals(&tm_)) / (2.0 * step);
            jac.set_column(k, &col);
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..10 {
            let mut lhs = jtj.clone();
            for k in 0..nparams {
                lhs[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = lhs.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = &theta + &delta;
            let rc = residuals(&cand);
            let c = rc.norm_squared();
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                theta = cand;
                r = rc;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let mn = Matrix3::new(
        theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6], theta[7], 1.0,
    );
    let tw_inv = tw.try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
    let full = tw_inv * mn * tp;
    let full = full / full[(2, 2)];
    let radial = spec.fit_radial.then(|| Radial {
        k1: theta[8] / (radius * radius),
        center,
    });
    let (lo, hi) = crate::edgemap::bbox_of(pix.iter().copied());
    let margin = {
        let s = PlanarMap::new(from_matrix(&full), radial, None)?;
        0.5 * spec.pitch_cm * s.local_scale(Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0))
    };
    let region = Some((lo - Point::new(margin, margin), hi + Point::new(margin, margin)));
    let map = PlanarMap::new(from_matrix(&full), radial, region)?;

    let errs: Vec<f64> = assigned
        .iter()
        .map(|&(p, w)| map.unmap_point(w).point.dist(p))
        .collect();
    let rms_px = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let max_px = errs.iter().copied().fold(0.0, f64::max);
    Ok(PlanarFit {
        map,
        rms_px,
        max_px,
        correspondences: assigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_scale_map_examples() {
        let m = PlanarMap::pure_scale(10.0);
        let w = m.map_point(Point::new(10.0, 0.0));
        assert!((w.point.x - 1.0).abs() < 1e-15 && w.point.y == 0.0);
        assert!(!w.extrapolated);
        let back = m.unmap_point(w.point).point;
        assert!((back.x - 10.0).abs() < 1e-12);
    }

    #[test]
    fn radial_inverse_round_trips() {
        let r = Radial {
            k1: -4.0e-7,
            center: Point::new(320.0, 240.0),
        };
        for &(x, y) in &[(0.0, 0.0), (639.0, 479.0), (320.0, 240.0), (100.5, 400.25)] {
            let p = Point::new(x, y);
            assert!(r.distort(r.undistort(p)).dist(p) < 1e-9);
        }
    }

    #[test]
    fn region_flags_extrapolation() {
        let m = PlanarMap::pure_scale(10.0).with_region(Some((Point::new(0.0, 0.0), Point::new(100.0, 100.0))));
        assert!(!m.map_point(Point::new(50.0, 50.0)).extrapolated);
        assert!(m.map_point(Point::new(150.0, 50.0)).extrapolated);
        assert!((m.map_point(Point::new(150.0, 50.0)).point.x - 15.0).abs() < 1e-12);
    }

    #[test]
    fn singular_homography_is_rejected() {
        assert!(PlanarMap::new([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0], None, None).is_err());
    }

    #[test]
    fn dlt_recovers_exact_homography() {
        let h = Matrix3::new(0.09, 0.004, -12.0, -0.003, 0.095, -7.0, 2e-5, -1e-5, 1.0);
        let src: Vec<Point> = (0..5)
            .flat_map(|i| (0..4).map(move |j| Point::new(50.0 + 90.0 * i as f64, 40.0 + 110.0 * j as f64)))
            .collect();
        let dst: Vec<Point> = src.iter().map(|&p| transform(&h, p)).collect();
        let (hn, ts, td) = dlt(&src, &dst).unwrap();
        let full = td.try_inverse().unwrap() * hn * ts;
        let full = full / full[(2, 2)];
        assert!((full - h).abs().max() < 1e-10);
    }

    #[test]
    fn collinear_points_are_ill_conditioned() {
        let src: Vec<Point> = (0..20).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(dlt(&src, &src), Err(Error::IllConditioned(_))));
    }
}
