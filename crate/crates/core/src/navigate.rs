//! Per-frame navigation: edge map, marker search, drill axis, corridor
//! clearance, alert debounce and overlay primitives.
//!
//! A [`Session`] consumes frames strictly in order. Each call to
//! [`Session::step`] yields an immutable [`NavState`] snapshot, and the
//! session keeps every snapshot for [`Session::report`].

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calib::CalibrationModel;
use crate::edgemap::{edge_map, EdgeParams};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geom::{clip_polygon, clip_segment, Point};
use crate::kv::fmt_f64;
use crate::matcher::{find_in, GeometricModel, Match, SearchParams, SearchWindow, Target};
use crate::plangeo::{build_cylinder, clearance_2d, drill_axis, Cylinder, DrillLine, Registration, SurgicalPlan};

pub const REPORT_HEADER: &str =
    "frame,cx,cy,angle,score,target_score,fit_error,depth_cm,clearance_cm,violation,track,search_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Track {
    Tracking,
    Lost,
    Unregistered,
}

impl Track {
    pub fn as_str(self) -> &'static str {
        match self {
            Track::Tracking => "TRACKING",
            Track::Lost => "LOST",
            Track::Unregistered => "UNREGISTERED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OverlayKind {
    CylinderOutline,
    DrillLine,
    AlertBanner,
    ScoreText,
}

/// A drawing instruction in pixel coordinates. Frames are never modified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayPrimitive {
    pub kind: OverlayKind,
    pub geometry: Vec<Point>,
    pub style: String,
}

/// Edge of the debounced violation flag, reported on the frame it flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlertEdge {
    Raised,
    Cleared,
}

/// Navigation snapshot of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    pub frame_index: usize,
    #[serde(rename = "match")]
    pub matched: Option<Match>,
    pub drill_line: Option<DrillLine>,
    /// Tip depth along the corridor axis, cm; positive into the corridor.
    pub depth: Option<f64>,
    /// Corridor radius minus tip distance from the axis, cm.
    pub radial_clearance: Option<f64>,
    pub violation: bool,
    pub alert: Option<AlertEdge>,
    pub track: Track,
    pub search_time: f64,
    pub overlay: Vec<OverlayPrimitive>,
}

impl NavState {
    /// One report row, in the order of [`REPORT_HEADER`].
    pub fn report_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let m = self.matched.as_ref();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.frame_index,
            opt(m.map(|m| m.centroid.x)),
            opt(m.map(|m| m.centroid.y)),
            opt(m.map(|m| m.angle)),
            opt(m.map(|m| m.score)),
            opt(m.map(|m| m.target_score)),
            opt(m.map(|m| m.fit_error)),
            opt(self.depth),
            opt(self.radial_clearance),
            u8::from(self.violation),
            self.track.as_str(),
            fmt_f64(self.search_time),
        )
    }
}

/// Source of search-time readings, in milliseconds.
pub trait Clock: Send {
    fn now_ms(&mut self) -> f64;
}

/// Monotonic wall clock.
#[derive(Debug)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// A clock that never advances; reports then depend on the frames alone.
#[derive(Debug, Default, Clone, Copy)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now_ms(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionParams {
    pub edges: EdgeParams,
    pub search: SearchParams,
    /// Search window half-size around the last centroid, px.
    pub window_px: f64,
    /// Consecutive misses before the track is declared lost.
    pub lost_after: usize,
    /// Consecutive frames the geometric condition must hold to flip the alert.
    pub debounce: usize,
    /// Overlay geometry may extend this far past the frame, px.
    pub clip_margin_px: f64,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            edges: EdgeParams::default(),
            search: SearchParams::default(),
            window_px: 32.0,
            lost_after: 3,
            debounce: 2,
            clip_margin_px: 8.0,
        }
    }
}

pub struct Session {
    calib: CalibrationModel,
    model: GeometricModel,
    plan: SurgicalPlan,
    cylinder: Cylinder,
    registration: Option<Registration>,
    params: SessionParams,
    clock: Box<dyn Clock>,
    next_frame: usize,
    tracking: bool,
    misses: usize,
    last: Option<Held>,
    violation: bool,
    /// Consecutive measured frames whose raw condition disagrees with `violation`.
    contrary: usize,
    states: Vec<NavState>,
}

/// Last measured geometry, shown while a short dropout lasts.
#[derive(Debug, Clone, Copy)]
struct Held {
    centroid: Point,
    line: DrillLine,
    depth: f64,
    radial_clearance: f64,
}

impl Session {
    pub fn new(
        calib: CalibrationModel,
        model: GeometricModel,
        plan: SurgicalPlan,
        params: SessionParams,
    ) -> Result<Self> {
        plan.validate()?;
        params.search.validate()?;
        if !(params.window_px > 0.0)
            || params.lost_after == 0
            || params.debounce == 0
            || !(params.clip_margin_px >= 0.0)
        {
            return Err(Error::Domain("session parameters out of range".into()));
        }
        let cylinder = build_cylinder(&plan);
        Ok(Self {
            calib,
            model,
            plan,
            cylinder,
            registration: None,
            params,
            clock: Box::new(WallClock::default()),
            next_frame: 0,
            tracking: false,
            misses: 0,
            last: None,
            violation: false,
            contrary: 0,
            states: Vec::new(),
        })
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn set_registration(&mut self, registration: Registration) {
        self.registration = Some(registration);
    }

    pub fn registration(&self) -> Option<&Registration> {
        self.registration.as_ref()
    }

    pub fn is_registered(&self) -> bool {
        self.registration.is_some_and(|r| r.finalized)
    }

    pub fn calibration(&self) -> &CalibrationModel {
        &self.calib
    }

    pub fn plan(&self) -> &SurgicalPlan {
        &self.plan
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cylinder
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn states(&self) -> &[NavState] {
        &self.states
    }

    /// Processes the next frame. Fails without consuming the frame when the
    /// registration is not finalized.
    pub fn step(&mut self, frame: &Frame) -> Result<NavState> {
        if !self.is_registered() {
            return Err(Error::Unregistered);
        }
        let (best, search_time) = self.search(frame);
        let index = self.next_frame;
        self.next_frame += 1;

        let mut state = NavState {
            frame_index: index,
            matched: best,
            drill_line: None,
            depth: None,
            radial_clearance: None,
            violation: false,
            alert: None,
            track: Track::Lost,
            search_time,
            overlay: Vec::new(),
        };

        let was_violating = self.violation;
        match best {
            Some(m) => {
                let line = drill_axis(&m, &self.calib, self.registration.as_ref())?;
                let c = clearance_2d(line.tip(self.plan.tip_offset_cm), &self.cylinder);
                let raw =
                    c.axial_depth > 0.0 && c.axial_depth <= self.cylinder.height && c.radial > self.cylinder.radius;
                self.debounce(raw);
                self.tracking = true;
                self.misses = 0;
                self.last = Some(Held {
                    centroid: m.centroid,
                    line,
                    depth: c.axial_depth,
                    radial_clearance: c.radial_clearance,
                });
            }
            None => {
                self.misses += 1;
                if self.misses >= self.params.lost_after {
                    self.tracking = false;
                    self.last = None;
                    self.violation = false;
                    self.contrary = 0;
                }
            }
        }
        if self.tracking {
            let held = self.last.expect("tracking implies a measurement");
            state.track = Track::Tracking;
            state.drill_line = Some(held.line);
            state.depth = Some(held.depth);
            state.radial_clearance = Some(held.radial_clearance);
            state.violation = self.violation;
        }
        state.alert = match (was_violating, state.violation) {
            (false, true) => Some(AlertEdge::Raised),
            (true, false) => Some(AlertEdge::Cleared),
            _ => None,
        };
        state.overlay = self.overlay(frame, &state);
        self.states.push(state.clone());
        Ok(state)
    }

    /// Runs the search on a frame without advancing the session; used to show
    /// the marker before registration is finalized.
    pub fn preview(&mut self, frame: &Frame) -> NavState {
        let (best, search_time) = self.search(frame);
        let mut state = NavState {
            frame_index: self.next_frame,
            matched: best,
            drill_line: None,
            depth: None,
            radial_clearance: None,
            violation: false,
            alert: None,
            track: Track::Unregistered,
            search_time,
            overlay: Vec::new(),
        };
        state.overlay = self.overlay(frame, &state);
        state
    }

    fn search(&mut self, frame: &Frame) -> (Option<Match>, f64) {
        let window = match (self.tracking, self.last) {
            (true, Some(h)) => Some(SearchWindow {
                center: h.centroid,
                radius: self.params.window_px,
            }),
            _ => None,
        };
        let map = edge_map(frame, &self.params.edges);
        let t0 = self.clock.now_ms();
        let target = Target::new(&map);
        let found = find_in(&self.model, &map, &target, &self.params.search, window);
        let elapsed = (self.clock.now_ms() - t0).max(0.0);
        (found.first().copied(), elapsed)
    }

    fn debounce(&mut self, raw: bool) {
        if raw == self.violation {
            self.contrary = 0;
            return;
        }
        self.contrary += 1;
        if self.contrary >= self.params.debounce {
            self.violation = raw;
            self.contrary = 0;
        }
    }

    fn overlay(&self, frame: &Frame, state: &NavState) -> Vec<OverlayPrimitive> {
        let m = self.params.clip_margin_px;
        let lo = Point::new(-0.5 - m, -0.5 - m);
        let hi = Point::new(frame.width() as f64 - 0.5 + m, frame.height() as f64 - 0.5 + m);
        let px = |w: Point| self.calib.unmap_point(w).point;
        let mut out = Vec::new();

        if self.is_registered() {
            let cyl = &self.cylinder;
            let base = Point::new(cyl.base_center.x, cyl.base_center.y);
            let axis = Point::new(cyl.axis_dir.x, cyl.axis_dir.y);
            let side = axis.perp() * cyl.radius;
            let top = base + axis * cyl.height;
            let outline: Vec<Point> = [base - side, top - side, top + side, base + side].map(px).to_vec();
            let clipped = clip_polygon(&outline, lo, hi);
            if !clipped.is_empty() {
                let style = if state.violation { "corridor-alert" } else { "corridor" };
                out.push(primitive(OverlayKind::CylinderOutline, clipped, style));
            }
        }

        if let Some(line) = state.drill_line {
            let a = px(line.point);
            let b = px(line.tip(self.plan.tip_offset_cm));
            if let Some((a, b)) = clip_segment(a, b, lo, hi) {
                let style = match (state.violation, state.matched.is_some()) {
                    (true, _) => "drill-alert",
                    (false, true) => "drill",
                    (false, false) => "drill-held",
                };
                out.push(primitive(OverlayKind::DrillLine, vec![a, b], style));
            }
        }

        let (w, h) = (frame.width() as f64, frame.height() as f64);
        if state.violation {
            let banner = vec![
                Point::new(0.0, 0.0),
                Point::new(w - 1.0, 0.0),
                Point::new(w - 1.0, 23.0),
                Point::new(0.0, 23.0),
            ];
            out.push(primitive(OverlayKind::AlertBanner, banner, "alert"));
        }
        let style = match state.track {
            Track::Tracking => "score",
            Track::Lost => "score-lost",
            Track::Unregistered => "score-unregistered",
        };
        out.push(primitive(OverlayKind::ScoreText, vec![Point::new(8.0, h - 8.0)], style));
        out
    }

    /// Per-frame CSV of every processed frame.
    pub fn report(&self) -> Result<String> {
        report_csv(&self.states)
    }
}

fn primitive(kind: OverlayKind, geometry: Vec<Point>, style: &str) -> OverlayPrimitive {
    OverlayPrimitive {
        kind,
        geometry,
        style: style.into(),
    }
}

pub fn report_csv(states: &[NavState]) -> Result<String> {
    if states.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut s = format!("{REPORT_HEADER}\n");
    for st in states {
        let _ = writeln!(s, "{}", st.report_row());
    }
    Ok(s)
}
