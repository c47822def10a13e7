//! Dot detection (Otsu threshold, connected components, intensity-weighted
//! centroids) and assignment of detected dots to grid indices.

use std::collections::VecDeque;

use super::planar::GridSpec;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geom::Point;

/// Otsu's threshold: pixels `<= t` form the dark class.
pub fn otsu_threshold(frame: &Frame) -> u8 {
    let mut hist = [0u64; 256];
    for &v in frame.pixels() {
        hist[v as usize] += 1;
    }
    let total = frame.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0u8);
    for t in 0..256 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t as u8;
        }
    }
    best_t
}

/// Centroids of dark blobs, in raster order of their first pixel.
pub fn detect_dots(frame: &Frame) -> Result<Vec<Point>> {
    let (w, h) = (frame.width(), frame.height());
    let px = frame.pixels();
    let t = otsu_threshold(frame);
    let bright: Vec<f64> = px.iter().filter(|&&v| v > t).map(|&v| v as f64).collect();
    if bright.is_empty() {
        return Ok(Vec::new());
    }
    let background = bright.iter().sum::<f64>() / bright.len() as f64;

    let mut label = vec![0u32; w * h];
    let mut blobs: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if px[start] > t || label[start] != 0 {
            continue;
        }
        let id = blobs.len() as u32 + 1;
        label[start] = id;
        queue.push_back(start);
        let mut members = Vec::new();
        let mut touches_border = false;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                touches_border = true;
            }
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if px[j] <= t && label[j] == 0 {
                        label[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        blobs.push((members, touches_border));
    }

    let mut areas: Vec<usize> = blobs
        .iter()
        .filter(|(m, b)| !b && m.len() >= 4)
        .map(|(m, _)| m.len())
        .collect();
    if areas.is_empty() {
        return Ok(Vec::new());
    }
    areas.sort_unstable();
    let median = areas[areas.len() / 2] as f64;

    let mut centroids = Vec::new();
    for (k, (members, border)) in blobs.iter().enumerate() {
        let area = members.len() as f64;
        if *border || members.len() < 4 || area < median / 3.0 || area > median * 3.0 {
            continue;
        }
        let id = k as u32 + 1;
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        for &i in members {
            x0 = x0.min(i % w);
            x1 = x1.max(i % w);
            y0 = y0.min(i / w);
            y1 = y1.max(i / w);
        }
        // weights over the dilated box include the anti-aliased rim but not other blobs
        let (x0, y0) = (x0.saturating_sub(2), y0.saturating_sub(2));
        let (x1, y1) = ((x1 + 2).min(w - 1), (y1 + 2).min(h - 1));
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let i = y * w + x;
                if label[i] != 0 && label[i] != id {
                    continue;
                }
                let wgt = (background - px[i] as f64).max(0.0);
                sw += wgt;
                sx += wgt * x as f64;
                sy += wgt * y as f64;
            }
        }
        if sw > 0.0 {
            centroids.push(Point::new(sx / sw, sy / sw));
        }
    }
    Ok(centroids)
}

/// Assigns grid indices to detected dots by walking the lattice outward from
/// the dot nearest the blob cloud's center, re-estimating the local lattice
/// vectors at every step. Returns `(pixel, world)` pairs.
pub(super) fn assign_lattice(dots: &[Point], spec: &GridSpec) -> Result<Vec<(Point, Point)>> {
    let n = dots.len();
    let mismatch = |msg: String| Error::Format(format!("dot grid does not match spec: {msg}"));
    let nearest_other = |i: usize| -> f64 {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| dots[i].dist(dots[j]))
            .fold(f64::INFINITY, f64::min)
    };
    let mut nn: Vec<f64> = (0..n).map(nearest_other).collect();
    nn.sort_by(f64::total_cmp);
    let pitch = nn[n / 2];

    let mean = dots.iter().fold(Point::ORIGIN, |a, &p| a + p) * (1.0 / n as f64);
    let anchor = (0..n)
        .min_by(|&a, &b| dots[a].dist(mean).total_cmp(&dots[b].dist(mean)))
        .unwrap();

    // initial lattice vectors: neighbors closest to +x and +y
    let neigh: Vec<Point> = (0..n)
        .filter(|&j| j != anchor && dots[j].dist(dots[anchor]) < 1.5 * pitch)
        .map(|j| dots[j] - dots[anchor])
        .collect();
    let pick = |axis: Point| {
        neigh
            .iter()
            .copied()
            .max_by(|a, b| (a.dot(axis) / a.norm()).total_cmp(&(b.dot(axis) / b.norm())))
    };
    let (Some(a0), Some(b0)) = (pick(Point::new(1.0, 0.0)), pick(Point::new(0.0, 1.0))) else {
        return Err(mismatch("anchor dot has no neighbors".into()));
    };
    if a0.dot(Point::new(1.0, 0.0)) <= 0.0 || b0.dot(Point::new(0.0, 1.0)) <= 0.0 || a0 == b0 {
        return Err(mismatch("could not find lattice directions".into()));
    }

    let mut index: Vec<Option<(i64, i64)>> = vec![None; n];
    index[anchor] = Some((0, 0));
    let mut queue = VecDeque::from([(anchor, a0, b0)]);
    while let Some((i, a, b)) = queue.pop_front() {
        let (ci, cj) = index[i].unwrap();
        for (step, di, dj) in [(a, 1, 0), (-a, -1, 0), (b, 0, 1), (-b, 0, -1)] {
            let predicted = dots[i] + step;
            let tol = 0.3 * step.norm();
            let hit = (0..n)
                .filter(|&j| dots[j].dist(predicted) < tol)
                .min_by(|&x, &y| dots[x].dist(predicted).total_cmp(&dots[y].dist(predicted)));
            let Some(j) = hit else { continue };
            let want = (ci + di, cj + dj);
            match index[j] {
                Some(have) if have != want => {
                    return Err(mismatch(format!("inconsistent lattice walk at {want:?}")));
                }
                Some(_) => {}
                None => {
                    index[j] = Some(want);
                    let seen = dots[j] - dots[i];
                    let (na, nb) = if di != 0 {
                        (seen * di as f64, b)
                    } else {
                        (a, seen * dj as f64)
                    };
                    queue.push_back((j, na, nb));
                }
            }
        }
    }

    let placed: Vec<(usize, (i64, i64))> = index
        .iter()
        .enumerate()
        .filter_map(|(k, ix)| ix.map(|ix| (k, ix)))
        .collect();
    let imin = placed.iter().map(|(_, (i, _))| *i).min().unwrap();
    let jmin = placed.iter().map(|(_, (_, j))| *j).min().unwrap();
    let imax = placed.iter().map(|(_, (i, _))| *i).max().unwrap();
    let jmax = placed.iter().map(|(_, (_, j))| *j).max().unwrap();
    if (imax - imin + 1) as usize != spec.cols
        || (jmax - jmin + 1) as usize != spec.rows
        || placed.len() != spec.cols * spec.rows
    {
        return Err(mismatch(format!(
            "found {} dots spanning {}x{}, expected {}x{}",
            placed.len(),
            imax - imin + 1,
            jmax - jmin + 1,
            spec.cols,
            spec.rows
        )));
    }
    Ok(placed
        .into_iter()
        .map(|(k, (i, j))| (dots[k], spec.world((i - imin) as usize, (j - jmin) as usize)))
        .collect())
}
