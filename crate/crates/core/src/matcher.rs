//! Edge-based geometric model search.
//!
//! A model is the set of edge chains extracted from a marker image. Search
//! runs coarse to fine: a truncated chamfer scan over translations and
//! angles on the coarsest pyramid level, local re-scans on each finer level,
//! then Gauss-Newton refinement against the nearest target edgels. Every
//! surviving candidate is graded by edge coverage and fit error.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::edgemap::{bbox_of, edge_map, CellIndex, EdgeChain, EdgeMap, EdgeParams, Edgel};
use crate::error::{parse_err, Error, Result};
use crate::frame::Frame;
use crate::geom::{angle_diff_rad, wrap_deg, Point, Rigid};
use crate::kv::parse_f64;

pub const MODEL_HEADER: &str = "pednav-model v1";

/// Minimum total edge length of a model, px.
pub const MIN_MODEL_LENGTH: f64 = 100.0;
/// Minimum edgel count on the coarsest pyramid level.
pub const MIN_LEVEL_POINTS: usize = 16;
pub const MAX_LEVELS: usize = 3;

/// Chamfer truncation distance, cells of the current level.
const CHAMFER_TAU: f32 = 2.0;
/// Direction agreement needed for a correspondence.
const MAX_DIRECTION_DEG: f64 = 45.0;
/// Tangential slack for a correspondence, px.
const TANGENTIAL_SLACK: f64 = 1.0;
const REFINE_ITERATIONS: usize = 5;
const REFINE_TOLERANCE_PX: f64 = 0.01;

/// One model edgel, relative to the model origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub position: Point,
    /// Unit gradient direction.
    pub normal: Point,
    /// Length share of the owning chain, px.
    pub share: f64,
}

/// One pyramid level: edgels subsampled onto a `2^level` grid, expressed in
/// that level's cell units.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub factor: f64,
    pub points: Vec<Point>,
    pub radius: f64,
    /// Angle increment that moves the outermost point by two cells, degrees.
    pub angle_step_deg: f64,
}

impl Level {
    fn build(points: &[ModelPoint], level: usize) -> Self {
        let factor = (1u32 << level) as f64;
        let mut cells: Vec<((i64, i64), Point, usize)> = Vec::new();
        let mut sorted: Vec<((i64, i64), Point)> = points
            .iter()
            .map(|p| {
                let q = p.position * (1.0 / factor);
                ((q.x.floor() as i64, q.y.floor() as i64), q)
            })
            .collect();
        sorted.sort_by_key(|a| a.0);
        for (key, q) in sorted {
            match cells.last_mut() {
                Some((k, acc, n)) if *k == key => {
                    *acc = *acc + q;
                    *n += 1;
                }
                _ => cells.push((key, q, 1)),
            }
        }
        let pts: Vec<Point> = cells.into_iter().map(|(_, acc, n)| acc * (1.0 / n as f64)).collect();
        let radius = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        Self {
            factor,
            points: pts,
            radius,
            angle_step_deg: (2.0 / radius.max(1.0)).atan().to_degrees().round().max(1.0),
        }
    }
}

/// A searchable marker model. Positions are relative to `origin`, the mean
/// of all active edgels in the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricModel {
    pub active_edges: Vec<EdgeChain>,
    pub total_active_length: f64,
    pub bounding_box: (Point, Point),
    /// Source-image position of the model origin.
    pub origin: Point,
    /// Point reported as the match centroid, in model coordinates.
    pub reference: Point,
    pub levels: Vec<Level>,
    points: Vec<ModelPoint>,
}

impl GeometricModel {
    /// Builds a model from chains in model coordinates.
    pub fn from_chains(chains: Vec<EdgeChain>, origin: Point, reference: Point) -> Result<Self> {
        let total: f64 = chains.iter().map(|c| c.length).sum();
        let count: usize = chains.iter().map(|c| c.edgels.len()).sum();
        if total < MIN_MODEL_LENGTH || count < MIN_LEVEL_POINTS {
            return Err(Error::InsufficientEdges {
                length: total,
                edgels: count,
            });
        }
        let mut points = Vec::with_capacity(count);
        for c in &chains {
            for (e, share) in c.edgels.iter().zip(c.length_shares()) {
                points.push(ModelPoint {
                    position: e.position,
                    normal: e.normal(),
                    share,
                });
            }
        }
        let active = chains;
        let mut levels = vec![Level::build(&points, 0)];
        for l in 1..MAX_LEVELS {
            let next = Level::build(&points, l);
            if next.points.len() < MIN_LEVEL_POINTS {
                break;
            }
            levels.push(next);
        }
        Ok(Self {
            bounding_box: bbox_of(points.iter().map(|p| p.position)),
            total_active_length: total,
            active_edges: active,
            origin,
            reference,
            levels,
            points,
        })
    }

    pub fn points(&self) -> &[ModelPoint] {
        &self.points
    }

    pub fn width(&self) -> f64 {
        self.bounding_box.1.x - self.bounding_box.0.x
    }

    /// Source-image position of the reference point.
    pub fn reference_in_source(&self) -> Point {
        self.origin + self.reference
    }

    pub fn with_reference_in_source(mut self, p: Point) -> Self {
        self.reference = p - self.origin;
        self
    }

    /// Pose that places the model exactly where it was extracted.
    pub fn source_pose(&self) -> Pose {
        Pose {
            translation: self.origin,
            angle_deg: 0.0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_HEADER}\n");
        let _ = writeln!(s, "origin {:?} {:?}", self.origin.x, self.origin.y);
        let _ = writeln!(s, "reference {:?} {:?}", self.reference.x, self.reference.y);
        for c in &self.active_edges {
            let _ = writeln!(s, "chain {} {}", c.edgels.len(), u8::from(c.closed));
            for e in &c.edgels {
                let _ = writeln!(
                    s,
                    "{:?} {:?} {:?} {:?}",
                    e.position.x, e.position.y, e.direction, e.magnitude
                );
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, h)) if h == MODEL_HEADER => {}
            _ => return Err(parse_err(1, format!("expected header `{MODEL_HEADER}`"))),
        }
        let nums =
            |line: usize, parts: &[&str]| -> Result<Vec<f64>> { parts.iter().map(|p| parse_f64(line, p)).collect() };
        let mut origin = Point::ORIGIN;
        let mut reference = Point::ORIGIN;
        let mut chains = Vec::new();
        let mut lines = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        while let Some((line, l)) = lines.next() {
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts[0] {
                "origin" | "reference" if parts.len() == 3 => {
                    let v = nums(line, &parts[1..])?;
                    let p = Point::new(v[0], v[1]);
                    if parts[0] == "origin" {
                        origin = p;
                    } else {
                        reference = p;
                    }
                }
                "chain" if parts.len() == 3 => {
                    let n: usize = parts[1].parse().map_err(|_| parse_err(line, "bad edgel count"))?;
                    let closed = match parts[2] {
                        "0" => false,
                        "1" => true,
                        _ => return Err(parse_err(line, "closed flag must be 0 or 1")),
                    };
                    let mut edgels = Vec::with_capacity(n);
                    for _ in 0..n {
                        let (line, l) = lines.next().ok_or_else(|| parse_err(line, "truncated chain"))?;
                        let parts: Vec<&str> = l.split_whitespace().collect();
                        if parts.len() != 4 {
                            return Err(parse_err(line, "edgel needs `x y dir mag`"));
                        }
                        let v = nums(line, &parts)?;
                        edgels.push(Edgel {
                            position: Point::new(v[0], v[1]),
                            direction: v[2],
                            magnitude: v[3],
                        });
                    }
                    chains.push(EdgeChain::new(edgels, closed));
                }
                _ => return Err(parse_err(line, format!("unexpected `{l}`"))),
            }
        }
        Self::from_chains(chains, origin, reference)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Builds a model from every edge chain of `marker_image`; the reference
/// point is the model origin.
///
/// The origin is the edgel mean snapped to 1/1024 px, which keeps the shift
/// into model coordinates exact in floating point.
pub fn build_model(marker_image: &Frame, params: &EdgeParams) -> Result<GeometricModel> {
    let em = edge_map(marker_image, params);
    let n = em.edgel_count();
    if n == 0 {
        return Err(Error::InsufficientEdges { length: 0.0, edgels: 0 });
    }
    let mean = em.edgels().fold(Point::ORIGIN, |a, e| a + e.position) * (1.0 / n as f64);
    let snap = |v: f64| (v * 1024.0).round() / 1024.0;
    let origin = Point::new(snap(mean.x), snap(mean.y));
    let chains = em
        .chains
        .into_iter()
        .map(|c| {
            let moved = c
                .edgels
                .iter()
                .map(|e| Edgel {
                    position: e.position - origin,
                    ..*e
                })
                .collect();
            EdgeChain::new(moved, c.closed)
        })
        .collect();
    GeometricModel::from_chains(chains, origin, Point::ORIGIN)
}

/// Placement of the model: rotate model coordinates by `angle_deg`, then
/// translate by `translation`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Point,
    pub angle_deg: f64,
}

impl Pose {
    fn rigid(&self) -> Rigid {
        Rigid::new(self.angle_deg.to_radians(), self.translation)
    }
}

/// Places model points. Written as `source + delta` so the source pose maps
/// every model edgel back onto its source position bit for bit.
struct Placer {
    rigid: Rigid,
    shift: Point,
    origin: Point,
}

impl Placer {
    fn new(model: &GeometricModel, pose: &Pose) -> Self {
        Self {
            rigid: pose.rigid(),
            shift: pose.translation - model.origin,
            origin: model.origin,
        }
    }

    fn place(&self, p: Point) -> Point {
        let rp = self.rigid.rotate(p);
        (self.origin + p) + ((rp - p) + self.shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Start and end of the searched angle interval, degrees.
    pub angle_range: (f64, f64),
    /// Coarse angle step; derived from the model radius when `None`.
    pub angle_step_coarse: Option<f64>,
    pub acceptance: f64,
    pub target_acceptance: f64,
    /// Fit-error weighing factor, 0 to 100.
    pub fit_error_weight: f64,
    /// Normalization constant of the fit error and correspondence reach, px.
    pub max_fit_error: f64,
    /// Fraction of `acceptance` a coarse candidate must reach.
    pub coarse_gate: f64,
    pub max_candidates: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            angle_range: (0.0, 360.0),
            angle_step_coarse: None,
            acceptance: 70.0,
            target_acceptance: 50.0,
            fit_error_weight: 1.0,
            max_fit_error: 2.0,
            coarse_gate: 0.6,
            max_candidates: 12,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let pct = 0.0..=100.0;
        if !pct.contains(&self.acceptance) || !pct.contains(&self.target_acceptance) {
            return Err(Error::Domain("acceptance levels must lie in [0, 100]".into()));
        }
        if !pct.contains(&self.fit_error_weight) {
            return Err(Error::Domain("fit error weight must lie in [0, 100]".into()));
        }
        if !(self.max_fit_error > 0.0) || !(self.angle_range.1 > self.angle_range.0) {
            return Err(Error::Domain(
                "max_fit_error must be positive and the angle range non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// Restricts the searched model positions to a disk around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Match {
    pub centroid: Point,
    /// In-plane rotation, degrees in `[0, 360)`.
    pub angle: f64,
    pub score: f64,
    pub target_score: f64,
    /// Mean squared edge deviation, px^2.
    pub fit_error: f64,
    pub model_coverage: f64,
    pub target_coverage: f64,
    pub n_common: usize,
    pub pose: Pose,
}

/// Coverage and fit figures of one occurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grade {
    pub score: f64,
    pub target_score: f64,
    pub model_coverage: f64,
    pub target_coverage: f64,
    pub fit_error: f64,
    pub n_common: usize,
}

/// Mean squared distance over the common pairs.
pub fn fit_error(common_pairs: &[(Point, Point)]) -> Result<f64> {
    if common_pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let sum: f64 = common_pairs.iter().map(|(a, b)| (*a - *b).norm_sq()).sum();
    Ok(sum / common_pairs.len() as f64)
}

pub fn normalized_fit_error(fit_error: f64, max_fit_error: f64) -> f64 {
    (fit_error / (max_fit_error * max_fit_error)).min(1.0)
}

/// `coverage * (1 - w * nfe)`, clamped to `[0, 100]`.
pub fn score_formula(coverage: f64, weight: f64, nfe: f64) -> f64 {
    (coverage * (1.0 - weight * nfe)).clamp(0.0, 100.0)
}

/// Edgels of one frame indexed for correspondence lookup.
pub struct Target {
    edgels: Vec<Edgel>,
    shares: Vec<f64>,
    index: Option<CellIndex>,
}

impl Target {
    pub fn new(map: &EdgeMap) -> Self {
        let mut edgels = Vec::with_capacity(map.edgel_count());
        let mut shares = Vec::with_capacity(edgels.capacity());
        for c in &map.chains {
            edgels.extend_from_slice(&c.edgels);
            shares.extend(c.length_shares());
        }
        let index = (!edgels.is_empty()).then(|| CellIndex::new(&edgels));
        Self { edgels, shares, index }
    }

    pub fn edgels(&self) -> &[Edgel] {
        &self.edgels
    }

    /// Nearest edgel to a model point at `x` with normal `n` that lies within
    /// `reach` along the normal and `slack` along the tangent, and whose
    /// direction agrees.
    fn correspond(&self, x: Point, n: Point, reach: f64, slack: f64) -> Option<usize> {
        let index = self.index.as_ref()?;
        let cos_limit = MAX_DIRECTION_DEG.to_radians().cos();
        let t = n.perp();
        let mut best: Option<(f64, usize)> = None;
        index.around(x, (reach.max(slack)).ceil() as i64, |k| {
            let e = &self.edgels[k];
            let d = e.position - x;
            let dn = d.dot(n).abs();
            if dn > reach || d.dot(t).abs() > slack || e.normal().dot(n) < cos_limit {
                return;
            }
            let dd = d.norm_sq();
            if best.is_none_or(|(b, bk)| dd < b || (dd == b && k < bk)) {
                best = Some((dd, k));
            }
        });
        best.map(|(_, k)| k)
    }
}

/// Grades the model at `pose` against the target edgels.
pub fn grade(model: &GeometricModel, target: &Target, pose: &Pose, params: &SearchParams) -> Grade {
    let placer = Placer::new(model, pose);
    let mfe = params.max_fit_error;
    let mut matched = 0.0;
    let mut pairs = Vec::new();
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &model.points {
        let x = placer.place(p.position);
        lo = Point::new(lo.x.min(x.x), lo.y.min(x.y));
        hi = Point::new(hi.x.max(x.x), hi.y.max(x.y));
        let n = placer.rigid.rotate(p.normal);
        if let Some(k) = target.correspond(x, n, mfe, TANGENTIAL_SLACK) {
            let q = target.edgels[k].position;
            // slide along the model tangent to the foot of the normal through q
            let t = n.perp();
            let foot = x + t * t.dot(q - x);
            matched += p.share;
            pairs.push((foot, q));
        }
    }
    let pad = Point::new(mfe, mfe);
    let (lo, hi) = (lo - pad, hi + pad);
    let in_box: f64 = target
        .edgels
        .iter()
        .zip(&target.shares)
        .filter(|(e, _)| {
            let q = e.position;
            q.x >= lo.x && q.x <= hi.x && q.y >= lo.y && q.y <= hi.y
        })
        .map(|(_, s)| s)
        .sum();
    let model_coverage = (100.0 * matched / model.total_active_length).min(100.0);
    let target_coverage = if in_box > 0.0 {
        (100.0 * matched / in_box).min(100.0)
    } else {
        0.0
    };
    let fe = fit_error(&pairs).unwrap_or(mfe * mfe);
    let nfe = normalized_fit_error(fe, mfe);
    let w = params.fit_error_weight;
    Grade {
        score: score_formula(model_coverage, w, nfe),
        target_score: score_formula(target_coverage, w, nfe),
        model_coverage,
        target_coverage,
        fit_error: fe,
        n_common: pairs.len(),
    }
}

/// Gauss-Newton pose refinement minimizing point-to-line distances between
/// placed model edgels and their corresponding target edgels.
pub fn refine(model: &GeometricModel, target: &Target, start: Pose, params: &SearchParams) -> Pose {
    let mut pose = start;
    let reach = params.max_fit_error + 1.0;
    for it in 0..REFINE_ITERATIONS {
        let placer = Placer::new(model, &pose);
        let gate = if it == 0 { reach } else { params.max_fit_error };
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        let mut used = 0;
        for p in &model.points {
            let x = placer.place(p.position);
            let n = placer.rigid.rotate(p.normal);
            let Some(k) = target.correspond(x, n, gate, TANGENTIAL_SLACK + 0.5) else {
                continue;
            };
            let e = &target.edgels[k];
            let tn = e.normal();
            let r = tn.dot(x - e.position);
            let arm = placer.rigid.rotate(p.position).perp();
            let j = [tn.x, tn.y, tn.dot(arm)];
            for a in 0..3 {
                for b in 0..3 {
                    ata[a][b] += j[a] * j[b];
                }
                atb[a] -= j[a] * r;
            }
            used += 1;
        }
        if used < 3 {
            break;
        }
        let Some(d) = solve3(ata, atb) else {
            break;
        };
        pose.translation = pose.translation + Point::new(d[0], d[1]);
        pose.angle_deg += d[2].to_degrees();
        let moved = d[0].hypot(d[1]) + d[2].abs() * model.levels[0].radius;
        if moved < REFINE_TOLERANCE_PX {
            break;
        }
    }
    pose.angle_deg = wrap_deg(pose.angle_deg);
    pose
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let v = nalgebra::Vector3::from_column_slice(&b);
    let x = m.lu().solve(&v)?;
    x.iter().all(|c| c.is_finite()).then(|| [x[0], x[1], x[2]])
}

/// Per-cell chamfer credit `1 - min(d², τ²)/τ²` of one pyramid level over a
/// rectangle of cells starting at `(x0, y0)`.
struct DistanceGrid {
    x0: i64,
    y0: i64,
    w: usize,
    h: usize,
    credit: Vec<f32>,
}

impl DistanceGrid {
    fn new(edgels: &[Edgel], factor: f64, lo: (i64, i64), hi: (i64, i64)) -> Self {
        let (x0, y0) = lo;
        let w = (hi.0 - x0 + 1).max(1) as usize;
        let h = (hi.1 - y0 + 1).max(1) as usize;
        let mut d = vec![f32::INFINITY; w * h];
        for e in edgels {
            let cx = (e.position.x / factor).round() as i64 - x0;
            let cy = (e.position.y / factor).round() as i64 - y0;
            if cx >= 0 && cy >= 0 && (cx as usize) < w && (cy as usize) < h {
                d[cy as usize * w + cx as usize] = 0.0;
            }
        }
        squared_edt(&mut d, w, h);
        let cap = CHAMFER_TAU * CHAMFER_TAU;
        d.iter_mut().for_each(|v| *v = 1.0 - v.min(cap) / cap);
        Self {
            x0,
            y0,
            w,
            h,
            credit: d,
        }
    }
}

/// Exact squared Euclidean distance transform (lower envelope of parabolas),
/// rows then columns. Cells holding 0 are sites; all others start infinite.
fn squared_edt(d: &mut [f32], w: usize, h: usize) {
    let n = w.max(h);
    let mut f = vec![0f64; n];
    let mut out = vec![0f64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut pass = |f: &[f64], out: &mut [f64]| {
        let len = f.len();
        let Some(first) = f.iter().position(|x| x.is_finite()) else {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        };
        let mut k = 0usize;
        v[0] = first;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in first + 1..len {
            if !f[q].is_finite() {
                continue;
            }
            let qf = q as f64;
            let mut s;
            loop {
                let p = v[k] as f64;
                s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * (qf - p));
                if s <= z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let dq = q as f64 - v[k] as f64;
            *o = dq * dq + f[v[k]];
        }
    };
    for y in 0..h {
        for x in 0..w {
            f[x] = d[y * w + x] as f64;
        }
        pass(&f[..w], &mut out[..w]);
        for x in 0..w {
            d[y * w + x] = out[x] as f32;
        }
    }
    for x in 0..w {
        for y in 0..h {
            f[y] = d[y * w + x] as f64;
        }
        pass(&f[..h], &mut out[..h]);
        for y in 0..h {
            d[y * w + x] = out[y] as f32;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    /// Model-origin position in cells of the candidate's level.
    x: i64,
    y: i64,
    angle_deg: f64,
    score: f64,
}

/// Rotated model points rounded to cells, with their row-major offsets in
/// one grid.
struct Stencil {
    cells: Vec<(i64, i64)>,
    linear: Vec<isize>,
    min: (i64, i64),
    max: (i64, i64),
}

impl Stencil {
    fn new(points: &[Point], angle_deg: f64, grid: &DistanceGrid) -> Self {
        let r = Rigid::new(angle_deg.to_radians(), Point::ORIGIN);
        let cells: Vec<(i64, i64)> = points
            .iter()
            .map(|&p| {
                let q = r.rotate(p);
                (q.x.round() as i64, q.y.round() as i64)
            })
            .collect();
        let linear = cells.iter().map(|&(x, y)| (y * grid.w as i64 + x) as isize).collect();
        let min = cells
            .iter()
            .fold((i64::MAX, i64::MAX), |m, c| (m.0.min(c.0), m.1.min(c.1)));
        let max = cells
            .iter()
            .fold((i64::MIN, i64::MIN), |m, c| (m.0.max(c.0), m.1.max(c.1)));
        Self {
            cells,
            linear,
            min,
            max,
        }
    }
}

/// Chamfer score in percent with early exit once `gate` is out of reach.
fn chamfer(grid: &DistanceGrid, st: &Stencil, x: i64, y: i64, gate: f64) -> f64 {
    let n = st.cells.len();
    let need = (gate / 100.0 * n as f64) as f32;
    let (bx, by) = (x - grid.x0, y - grid.y0);
    let inside =
        bx + st.min.0 >= 0 && by + st.min.1 >= 0 && bx + st.max.0 < grid.w as i64 && by + st.max.1 < grid.h as i64;
    let mut sum = 0.0f32;
    if inside {
        let base = by as isize * grid.w as isize + bx as isize;
        for (i, &off) in st.linear.iter().enumerate() {
            sum += grid.credit[(base + off) as usize];
            if sum + ((n - i - 1) as f32) < need {
                break;
            }
        }
    } else {
        for (i, &(ox, oy)) in st.cells.iter().enumerate() {
            let (cx, cy) = (bx + ox, by + oy);
            if cx >= 0 && cy >= 0 && (cx as usize) < grid.w && (cy as usize) < grid.h {
                sum += grid.credit[cy as usize * grid.w + cx as usize];
            }
            if sum + ((n - i - 1) as f32) < need {
                break;
            }
        }
    }
    100.0 * sum as f64 / n as f64
}

fn angle_grid(range: (f64, f64), step: f64) -> Vec<f64> {
    let extent = range.1 - range.0;
    let full = extent >= 360.0 - 1e-9;
    let count = if full {
        (extent / step).ceil().max(1.0) as usize
    } else {
        (extent / step).ceil().max(0.0) as usize + 1
    };
    let step = if full {
        extent / count as f64
    } else {
        extent / (count - 1).max(1) as f64
    };
    (0..count).map(|k| range.0 + step * k as f64).collect()
}

/// Finds model occurrences in `target`, best score first.
pub fn find(model: &GeometricModel, target: &EdgeMap, params: &SearchParams) -> Vec<Match> {
    find_in(model, target, &Target::new(target), params, None)
}

/// [`find`] with a prepared target and an optional search window on the
/// match centroid.
pub fn find_in(
    model: &GeometricModel,
    map: &EdgeMap,
    target: &Target,
    params: &SearchParams,
    window: Option<SearchWindow>,
) -> Vec<Match> {
    if target.edgels.is_empty() {
        return Vec::new();
    }
    let top = model.levels.len() - 1;
    let gate = params.coarse_gate * params.acceptance;

    // region of model-origin positions at full resolution
    let slack = model.reference.norm();
    let (lo, hi) = match window {
        Some(w) => (
            Point::new(w.center.x - w.radius - slack, w.center.y - w.radius - slack),
            Point::new(w.center.x + w.radius + slack, w.center.y + w.radius + slack),
        ),
        None => (
            Point::ORIGIN,
            Point::new(map.width() as f64 - 1.0, map.height() as f64 - 1.0),
        ),
    };

    let grid_for = |level: usize, lo: Point, hi: Point| {
        let lv = &model.levels[level];
        let f = lv.factor;
        let pad = lv.radius.ceil() as i64 + CHAMFER_TAU as i64 + 2;
        DistanceGrid::new(
            &target.edgels,
            f,
            ((lo.x / f).floor() as i64 - pad, (lo.y / f).floor() as i64 - pad),
            ((hi.x / f).ceil() as i64 + pad, (hi.y / f).ceil() as i64 + pad),
        )
    };

    // coarse scan
    let lv = &model.levels[top];
    let step = params.angle_step_coarse.unwrap_or(lv.angle_step_deg);
    let grid = grid_for(top, lo, hi);
    let f = lv.factor;
    let (sx0, sy0) = ((lo.x / f).floor() as i64, (lo.y / f).floor() as i64);
    let (sx1, sy1) = ((hi.x / f).ceil() as i64, (hi.y / f).ceil() as i64);
    let (sw, sh) = ((sx1 - sx0 + 1) as usize, (sy1 - sy0 + 1) as usize);
    let mut cands = Vec::new();
    let mut scores = vec![0f64; sw * sh];
    // Only cells near a target edgel carry credit, so the scan scatters their
    // credit onto every model position that would sample them.
    let lit: Vec<(i64, i64, f32)> = grid
        .credit
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(i, &c)| {
            (
                (i % grid.w) as i64 + grid.x0 - sx0,
                (i / grid.w) as i64 + grid.y0 - sy0,
                c,
            )
        })
        .collect();
    let mut sums = vec![0f32; sw * sh];
    for angle in angle_grid(params.angle_range, step) {
        let offsets = Stencil::new(&lv.points, angle, &grid);
        let n = offsets.cells.len() as f64;
        sums.iter_mut().for_each(|v| *v = 0.0);
        for &(ox, oy) in &offsets.cells {
            for &(cx, cy, c) in &lit {
                let (x, y) = (cx - ox, cy - oy);
                if x >= 0 && y >= 0 && (x as usize) < sw && (y as usize) < sh {
                    sums[y as usize * sw + x as usize] += c;
                }
            }
        }
        for (s, &v) in scores.iter_mut().zip(&sums) {
            *s = 100.0 * v as f64 / n;
        }
        for y in 0..sh {
            for x in 0..sw {
                let s = scores[y * sw + x];
                if s < gate {
                    continue;
                }
                let mut is_max = true;
                'nb: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= sw as i64 || ny >= sh as i64 {
                            continue;
                        }
                        let o = scores[ny as usize * sw + nx as usize];
                        // strict on one side so plateaus keep a single maximum
                        if o > s || (o == s && (dy, dx) < (0, 0)) {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    cands.push(Candidate {
                        x: sx0 + x as i64,
                        y: sy0 + y as i64,
                        angle_deg: angle,
                        score: s,
                    });
                }
            }
        }
    }
    let mut cands = suppress(cands, lv.radius * 0.5, step * 1.5, params.max_candidates);

    // descend the pyramid
    for level in (0..top).rev() {
        let lv = &model.levels[level];
        let fine_step = params
            .angle_step_coarse
            .map_or(lv.angle_step_deg, |s| s / (1u32 << (top - level)) as f64);
        let coarse_step = model.levels[level + 1].angle_step_deg;
        let mut next = Vec::with_capacity(cands.len());
        for c in &cands {
            let centre = Point::new(c.x as f64 * 2.0, c.y as f64 * 2.0) * lv.factor;
            let grid = grid_for(
                level,
                centre - Point::new(3.0, 3.0) * lv.factor,
                centre + Point::new(3.0, 3.0) * lv.factor,
            );
            let half = (coarse_step * 0.5 / fine_step).ceil() as i64;
            let mut best = Candidate { score: -1.0, ..*c };
            for ka in -half..=half {
                let angle = c.angle_deg + ka as f64 * fine_step;
                let offsets = Stencil::new(&lv.points, angle, &grid);
                for dy in -2..=2 {
                    for dx in -2..=2 {
                        let (x, y) = (c.x * 2 + dx, c.y * 2 + dy);
                        let s = chamfer(&grid, &offsets, x, y, 0.0);
                        if s > best.score {
                            best = Candidate {
                                x,
                                y,
                                angle_deg: angle,
                                score: s,
                            };
                        }
                    }
                }
            }
            next.push(best);
        }
        cands = next;
    }

    // refine and grade at full resolution
    let mut matches: Vec<Match> = Vec::new();
    for c in &cands {
        let start = Pose {
            translation: Point::new(c.x as f64, c.y as f64),
            angle_deg: c.angle_deg,
        };
        let pose = refine(model, target, start, params);
        let g = grade(model, target, &pose, params);
        if g.score < params.acceptance || g.target_score < params.target_acceptance {
            continue;
        }
        let centroid = Rigid::new(pose.angle_deg.to_radians(), pose.translation).apply(model.reference);
        if let Some(w) = window {
            if centroid.dist(w.center) > w.radius + 1.0 {
                continue;
            }
        }
        matches.push(Match {
            centroid,
            angle: pose.angle_deg,
            score: g.score,
            target_score: g.target_score,
            fit_error: g.fit_error,
            model_coverage: g.model_coverage,
            target_coverage: g.target_coverage,
            n_common: g.n_common,
            pose,
        });
    }
    dedupe(matches, model.width() * 0.5)
}

/// Greedy suppression in (position, angle), keeping at most `keep`.
fn suppress(mut cands: Vec<Candidate>, dist: f64, angle: f64, keep: usize) -> Vec<Candidate> {
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
            .then(a.angle_deg.total_cmp(&b.angle_deg))
    });
    let mut out: Vec<Candidate> = Vec::new();
    for c in cands {
        let near = out.iter().any(|o| {
            let d = ((o.x - c.x) as f64).hypot((o.y - c.y) as f64);
            d < dist
                && angle_diff_rad(o.angle_deg.to_radians(), c.angle_deg.to_radians())
                    .abs()
                    .to_degrees()
                    < angle
        });
        if !near {
            out.push(c);
            if out.len() == keep {
                break;
            }
        }
    }
    out
}

/// Drops matches whose centroid lies within `min_dist` of a better one.
fn dedupe(mut matches: Vec<Match>, min_dist: f64) -> Vec<Match> {
    matches.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.target_score.total_cmp(&a.target_score))
            .then(a.centroid.y.total_cmp(&b.centroid.y))
            .then(a.centroid.x.total_cmp(&b.centroid.x))
    });
    let mut out: Vec<Match> = Vec::new();
    for m in matches {
        if out.iter().all(|o| o.centroid.dist(m.centroid) >= min_dist) {
            out.push(m);
        }
    }
    out
}
