//! Gradient-based edge extraction.
//!
//! Three stages, in order: a Sobel gradient field, edgel detection by
//! non-maximum suppression along the true gradient direction with hysteresis
//! thresholding, and greedy chaining of neighboring edgels into contours.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use crate::frame::Frame;
use crate::geom::Point;

/// Signed Sobel responses and their magnitude for every pixel.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    pub mag: Vec<f32>,
}

impl GradientField {
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn max_magnitude(&self) -> f32 {
        self.mag.iter().copied().fold(0.0, f32::max)
    }

    /// Bilinear sample of the magnitude image; `p` must lie inside the frame.
    fn sample_mag(&self, px: f64, py: f64) -> f64 {
        let x0 = (px.floor() as usize).min(self.width - 2);
        let y0 = (py.floor() as usize).min(self.height - 2);
        let fx = px - x0 as f64;
        let fy = py - y0 as f64;
        let i = y0 * self.width + x0;
        let m00 = self.mag[i] as f64;
        let m10 = self.mag[i + 1] as f64;
        let m01 = self.mag[i + self.width] as f64;
        let m11 = self.mag[i + self.width + 1] as f64;
        let top = m00 + (m10 - m00) * fx;
        let bottom = m01 + (m11 - m01) * fx;
        top + (bottom - top) * fy
    }
}

/// 3x3 Sobel gradient with replicate padding.
pub fn gradient(frame: &Frame) -> GradientField {
    let (w, h) = (frame.width(), frame.height());
    let px = frame.pixels();
    let n = w * h;
    let mut gx = vec![0f32; n];
    let mut gy = vec![0f32; n];
    let mut mag = vec![0f32; n];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        let (rm, r0, rp) = (&px[ym * w..ym * w + w], &px[y * w..y * w + w], &px[yp * w..yp * w + w]);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let v = |row: &[u8], i: usize| row[i] as i32;
            let sx = (v(rm, xp) + 2 * v(r0, xp) + v(rp, xp)) - (v(rm, xm) + 2 * v(r0, xm) + v(rp, xm));
            let sy = (v(rp, xm) + 2 * v(rp, x) + v(rp, xp)) - (v(rm, xm) + 2 * v(rm, x) + v(rm, xp));
            let i = y * w + x;
            gx[i] = sx as f32;
            gy[i] = sy as f32;
            mag[i] = ((sx * sx + sy * sy) as f32).sqrt();
        }
    }
    GradientField {
        width: w,
        height: h,
        gx,
        gy,
        mag,
    }
}

/// A subpixel edge element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edgel {
    pub position: Point,
    /// Gradient direction in radians, `[0, 2pi)`; points from dark to bright.
    pub direction: f64,
    pub magnitude: f64,
}

impl Edgel {
    pub fn normal(&self) -> Point {
        Point::from_angle(self.direction)
    }
}

/// Pixels closer than this to the frame border never produce edgels.
pub const BORDER: usize = 2;

/// Non-maximum suppression plus hysteresis.
///
/// A pixel is a candidate when its magnitude is at least `low` and is a local
/// maximum against the two bilinear samples one pixel away along the
/// gradient. Candidates at or above `high` seed the kept set, which then
/// grows through 8-connected candidates.
pub fn extract_edgels(field: &GradientField, low: f64, high: f64) -> Vec<Edgel> {
    let (w, h) = (field.width, field.height);
    if w <= 2 * BORDER || h <= 2 * BORDER {
        return Vec::new();
    }
    let low = low.max(f64::MIN_POSITIVE);
    // slot per pixel: index into `cands` + 1, or 0
    let mut slot = vec![0u32; w * h];
    let mut cands: Vec<(usize, Edgel)> = Vec::new();
    for y in BORDER..h - BORDER {
        for x in BORDER..w - BORDER {
            let i = y * w + x;
            let m = field.mag[i] as f64;
            if m < low {
                continue;
            }
            let (gx, gy) = (field.gx[i] as f64, field.gy[i] as f64);
            let (dx, dy) = (gx / m, gy / m);
            let (xf, yf) = (x as f64, y as f64);
            let ahead = field.sample_mag(xf + dx, yf + dy);
            let behind = field.sample_mag(xf - dx, yf - dy);
            // ties resolve toward the bright side so a plateau yields one edgel
            if !(m >= ahead && m > behind) {
                continue;
            }
            let denom = behind - 2.0 * m + ahead;
            let offset = if denom < 0.0 {
                ((behind - ahead) / (2.0 * denom)).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let mut direction = gy.atan2(gx);
            if direction < 0.0 {
                direction += TAU;
            }
            if direction >= TAU {
                direction = 0.0;
            }
            cands.push((
                i,
                Edgel {
                    position: Point::new(xf + offset * dx, yf + offset * dy),
                    direction,
                    magnitude: m,
                },
            ));
            slot[i] = cands.len() as u32;
        }
    }

    let mut keep = vec![false; cands.len()];
    let mut queue = VecDeque::new();
    for (k, (_, e)) in cands.iter().enumerate() {
        if e.magnitude >= high {
            keep[k] = true;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        let i = cands[k].0;
        let (x, y) = (i % w, i / w);
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                let s = slot[ny * w + nx];
                if s != 0 && !keep[s as usize - 1] {
                    keep[s as usize - 1] = true;
                    queue.push_back(s as usize - 1);
                }
            }
        }
    }
    cands
        .into_iter()
        .zip(keep)
        .filter_map(|((_, e), k)| k.then_some(e))
        .collect()
}

/// An ordered run of neighboring edgels.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeChain {
    pub edgels: Vec<Edgel>,
    pub closed: bool,
    pub length: f64,
}

impl EdgeChain {
    pub fn new(edgels: Vec<Edgel>, closed: bool) -> Self {
        let length = polyline_length(&edgels, closed);
        Self { edgels, closed, length }
    }

    /// Portion of the chain length attributed to each edgel: half of each
    /// adjacent segment. Sums to `length`.
    pub fn length_shares(&self) -> Vec<f64> {
        let n = self.edgels.len();
        let mut shares = vec![0.0; n];
        if n < 2 {
            return shares;
        }
        let segs = if self.closed { n } else { n - 1 };
        for s in 0..segs {
            let (a, b) = (s, (s + 1) % n);
            let d = self.edgels[a].position.dist(self.edgels[b].position) * 0.5;
            shares[a] += d;
            shares[b] += d;
        }
        shares
    }

    pub fn centroid(&self) -> Point {
        let n = self.edgels.len().max(1) as f64;
        let s = self.edgels.iter().fold(Point::ORIGIN, |acc, e| acc + e.position);
        s * (1.0 / n)
    }

    /// Circular mean of the gradient directions, radians.
    pub fn mean_direction(&self) -> f64 {
        let s = self.edgels.iter().fold(Point::ORIGIN, |acc, e| acc + e.normal());
        s.y.atan2(s.x).rem_euclid(TAU)
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        bbox_of(self.edgels.iter().map(|e| e.position))
    }
}

pub(crate) fn bbox_of(points: impl Iterator<Item = Point>) -> (Point, Point) {
    points.fold(
        (
            Point::new(f64::INFINITY, f64::INFINITY),
            Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

fn polyline_length(edgels: &[Edgel], closed: bool) -> f64 {
    let mut len: f64 = edgels.windows(2).map(|w| w[0].position.dist(w[1].position)).sum();
    if closed && edgels.len() > 2 {
        len += edgels[edgels.len() - 1].position.dist(edgels[0].position);
    }
    len
}

/// Linking constraints for [`chain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Maximum distance between consecutive edgels, px.
    pub radius: f64,
    /// Maximum direction change between consecutive edgels, degrees.
    pub max_turn_deg: f64,
    /// Chains shorter than this are dropped, px.
    pub min_length: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            radius: std::f64::consts::SQRT_2 + 0.5,
            max_turn_deg: 60.0,
            min_length: 5.0,
        }
    }
}

impl ChainParams {
    pub fn links(&self, a: &Edgel, b: &Edgel) -> bool {
        a.position.dist(b.position) <= self.radius
            && crate::geom::angle_diff_rad(a.direction, b.direction).abs() < self.max_turn_deg.to_radians()
    }
}

/// Cell-bucketed lookup of edgels by position.
pub(crate) struct CellIndex {
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl CellIndex {
    pub(crate) fn new(edgels: &[Edgel]) -> Self {
        let (lo, hi) = bbox_of(edgels.iter().map(|e| e.position));
        let x0 = lo.x.floor() as i64 - 1;
        let y0 = lo.y.floor() as i64 - 1;
        let w = (hi.x.floor() as i64 - x0 + 2).max(1);
        let h = (hi.y.floor() as i64 - y0 + 2).max(1);
        let cell = |e: &Edgel| ((e.position.y.floor() as i64 - y0) * w + (e.position.x.floor() as i64 - x0)) as usize;
        let mut start = vec![0u32; (w * h) as usize + 1];
        for e in edgels {
            start[cell(e) + 1] += 1;
        }
        for i in 1..start.len() {
            start[i] += start[i - 1];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; edgels.len()];
        for (k, e) in edgels.iter().enumerate() {
            let c = cell(e);
            items[fill[c] as usize] = k as u32;
            fill[c] += 1;
        }
        Self {
            x0,
            y0,
            w,
            h,
            start,
            items,
        }
    }

    pub(crate) fn around(&self, p: Point, reach: i64, mut f: impl FnMut(usize)) {
        let cx = p.x.floor() as i64 - self.x0;
        let cy = p.y.floor() as i64 - self.y0;
        for y in (cy - reach).max(0)..=(cy + reach).min(self.h - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(self.w - 1) {
                let c = (y * self.w + x) as usize;
                for &k in &self.items[self.start[c] as usize..self.start[c + 1] as usize] {
                    f(k as usize);
                }
            }
        }
    }
}

/// Greedy chaining of edgels.
///
/// Seeds are visited in input order; each chain grows forward along the
/// contour tangent, then backward from the seed. Every retained edgel lands
/// in exactly one chain.
pub fn chain(edgels: &[Edgel], params: &ChainParams) -> Vec<EdgeChain> {
    if edgels.is_empty() {
        return Vec::new();
    }
    let index = CellIndex::new(edgels);
    let reach = params.radius.ceil() as i64;
    let mut used = vec![false; edgels.len()];
    let mut chains = Vec::new();

    let next = |cur: usize, sign: f64, used: &[bool]| -> Option<usize> {
        let e = &edgels[cur];
        let n = e.normal();
        let t = n.perp() * sign;
        let mut best: Option<(f64, usize)> = None;
        index.around(e.position, reach, |k| {
            if used[k] || !params.links(e, &edgels[k]) {
                return;
            }
            let d = edgels[k].position - e.position;
            let along = d.dot(t);
            if along <= 0.0 {
                return;
            }
            let cost = d.norm() + 2.0 * d.dot(n).abs();
            if best.is_none_or(|(c, bk)| cost < c || (cost == c && k < bk)) {
                best = Some((cost, k));
            }
        });
        best.map(|(_, k)| k)
    };

    for seed in 0..edgels.len() {
        if used[seed] {
            continue;
        }
        used[seed] = true;
        let mut fwd = vec![seed];
        let mut cur = seed;
        while let Some(k) = next(cur, 1.0, &used) {
            used[k] = true;
            fwd.push(k);
            cur = k;
        }
        let mut back = Vec::new();
        cur = seed;
        while let Some(k) = next(cur, -1.0, &used) {
            used[k] = true;
            back.push(k);
            cur = k;
        }
        back.reverse();
        back.extend(fwd);
        let ids = back;
        let closed = ids.len() >= 4 && params.links(&edgels[ids[ids.len() - 1]], &edgels[ids[0]]);
        let c = EdgeChain::new(ids.iter().map(|&k| edgels[k]).collect(), closed);
        if c.length >= params.min_length {
            chains.push(c);
        }
    }
    chains
}

/// Hysteresis thresholds, either absolute or relative to the frame's peak
/// gradient magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholds {
    Absolute { low: f64, high: f64 },
    Relative { high_frac: f64, low_ratio: f64 },
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Relative {
            high_frac: 0.2,
            low_ratio: 0.4,
        }
    }
}

impl Thresholds {
    pub fn resolve(&self, field: &GradientField) -> (f64, f64) {
        match *self {
            Thresholds::Absolute { low, high } => (low, high),
            Thresholds::Relative { high_frac, low_ratio } => {
                let high = high_frac * field.max_magnitude() as f64;
                (low_ratio * high, high)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeParams {
    pub thresholds: Thresholds,
    pub chain: ChainParams,
}

/// The edge map of one frame: gradient field plus chained contours.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub field: GradientField,
    pub chains: Vec<EdgeChain>,
    pub low: f64,
    pub high: f64,
}

impl EdgeMap {
    pub fn width(&self) -> usize {
        self.field.width
    }

    pub fn height(&self) -> usize {
        self.field.height
    }

    pub fn edgels(&self) -> impl Iterator<Item = &Edgel> {
        self.chains.iter().flat_map(|c| c.edgels.iter())
    }

    pub fn edgel_count(&self) -> usize {
        self.chains.iter().map(|c| c.edgels.len()).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.chains.iter().map(|c| c.length).sum()
    }
}

pub fn edge_map(frame: &Frame, params: &EdgeParams) -> EdgeMap {
    let field = gradient(frame);
    let (low, high) = params.thresholds.resolve(&field);
    let edgels = extract_edgels(&field, low, high);
    let chains = chain(&edgels, &params.chain);
    EdgeMap {
        field,
        chains,
        low,
        high,
    }
}
