//! Command-line subcommands.

use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pednav::calib::{
    estimate_focal, fit_planar_map, CalibrationModel, CameraPlacement, DisplacementSample, GridSpec, PlanarMap,
};
use pednav::edgemap::EdgeParams;
use pednav::frame::{read_seq_file, write_seq_file, Frame};
use pednav::geom::Point;
use pednav::kv::{fmt_f64, parse_list};
use pednav::matcher::{build_model, GeometricModel};
use pednav::navigate::{Clock, FrozenClock, Session, Track, WallClock};
use pednav::plangeo::{alignment_residual, finalize_registration, SurgicalPlan};
use pednav::synth::{
    model_image, render_grid, render_scenario, truth_csv, MarkerSpec, Scenario, CAMERA_H_CM, CAMERA_V_CM,
    DEFAULT_PX_PER_CM,
};

use crate::config::{parse_needles, ConfigError, PipelineConfig, CONFIG_ENV};
use crate::service::{Service, ServiceSetup, Source, QUEUE_CAPACITY};

/// Reference search time measured on 2012-era hardware, ms.
pub const REFERENCE_SEARCH_MS: f64 = 11.5;

pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_UNREGISTERED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pednav", version, about = "Marker-based drill navigation")]
pub struct Cli {
    /// Pipeline configuration file.
    #[arg(long, short, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Estimate the focal constant and planar map; write a calibration file.
    Calibrate(CalibrateArgs),
    /// Build a marker model from an image or the synthetic marker.
    BuildModel(BuildModelArgs),
    /// Navigate a recorded sequence and write the per-frame report.
    Track(TrackArgs),
    /// Time the marker search over a scenario or sequence.
    Bench(BenchArgs),
    /// Render a scripted scenario with everything needed to track it.
    Simulate(SimulateArgs),
    /// Stream navigation states to the operator console.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Displacement samples: x1_cm,y1_cm,x2_cm,y2_cm,x1_px,y1_px,x2_px,y2_px per row.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    pub samples: Option<PathBuf>,
    /// Image of the dot grid described by the config's grid_* keys.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Camera height above the object plane, cm.
    #[arg(long)]
    pub camera_v: Option<f64>,
    /// Horizontal camera offset, cm.
    #[arg(long)]
    pub camera_h: Option<f64>,
    /// Fix Pd/Rd (px per cm) instead of averaging the samples.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Output calibration file; defaults to the config's `calibration`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildModelArgs {
    /// Marker image (PGM).
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub image: Option<PathBuf>,
    /// Reference point reported as the centroid, image px: x,y.
    #[arg(long, requires = "image")]
    pub reference: Option<String>,
    /// Use the synthetic marker.
    #[arg(long)]
    pub synth: bool,
    #[arg(long, default_value_t = DEFAULT_PX_PER_CM)]
    pub px_per_cm: f64,
    /// Output model file; defaults to the config's `model`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockKind {
    Wall,
    /// Search times read 0; reports depend on the frames alone.
    Frozen,
}

impl ClockKind {
    fn make(self) -> Box<dyn Clock> {
        match self {
            ClockKind::Wall => Box::new(WallClock::default()),
            ClockKind::Frozen => Box::new(FrozenClock),
        }
    }
}

/// Paths and registration shared by `track` and `serve`.
#[derive(Debug, Args)]
pub struct Inputs {
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Needle tips in the image: x1,y1,x2,y2,x3,y3.
    #[arg(long, allow_hyphen_values = true)]
    pub needles: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Frame sequence (.seq).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: Inputs,
    /// Report CSV; stdout when absent.
    #[arg(long, short)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ClockKind::Wall)]
    pub clock: ClockKind,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Time a recorded sequence, using the config's calibration, model, plan and needles.
    #[arg(long, conflicts_with = "scenario")]
    pub input: Option<PathBuf>,
    /// Scenario name (straight, veering) or script file.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub clutter: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Use only the first N frames.
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario name (straight, veering) or script file.
    #[arg(long, default_value = "straight")]
    pub scenario: String,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub clutter: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Keep only the first N frames.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Also render a calibration dot grid (grid.pgm).
    #[arg(long)]
    pub grid: bool,
    /// Leave needles out of the written config.
    #[arg(long)]
    pub no_needles: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long)]
    pub port: Option<u16>,
    /// Replay this sequence; defaults to the config's `input`.
    #[arg(long, conflicts_with = "live")]
    pub input: Option<PathBuf>,
    /// Host the synthetic generator and accept steering.
    #[arg(long)]
    pub live: bool,
    /// Live-synth script: name or file; defaults to the config's `scenario`, then straight.
    #[arg(long, requires = "live")]
    pub scenario: Option<String>,
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub max_fps: Option<f64>,
    #[arg(long, value_enum, default_value_t = ClockKind::Wall)]
    pub clock: ClockKind,
    /// Log live-synth ground truth as CSV.
    #[arg(long)]
    pub truth_log: Option<PathBuf>,
    /// Include each frame as base64 PGM in STATE messages.
    #[arg(long)]
    pub stream_frames: bool,
    /// Exit after the first connection ends.
    #[arg(long)]
    pub once: bool,
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Cmd::Calibrate(a) => calibrate(&cfg, a),
        Cmd::BuildModel(a) => build_model_cmd(&cfg, a),
        Cmd::Track(a) => {
            apply_inputs(&mut cfg, &a.inputs, a.input.clone())?;
            track(&cfg, &a)
        }
        Cmd::Bench(a) => bench(&cfg, &a),
        Cmd::Simulate(a) => simulate(&a),
        Cmd::Serve(a) => {
            apply_inputs(&mut cfg, &a.inputs, a.input.clone())?;
            if let Some(p) = a.port {
                cfg.port = p;
            }
            if let Some(f) = a.max_fps {
                cfg.max_fps = f;
            }
            cfg.validate()?;
            serve(&cfg, &a)
        }
    }
}

fn apply_inputs(cfg: &mut PipelineConfig, inputs: &Inputs, input: Option<PathBuf>) -> Result<(), ConfigError> {
    if let Some(p) = &inputs.calibration {
        cfg.calibration = Some(p.clone());
    }
    if let Some(p) = &inputs.model {
        cfg.model = Some(p.clone());
    }
    if let Some(p) = &inputs.plan {
        cfg.plan = Some(p.clone());
    }
    if let Some(p) = input {
        cfg.input = Some(p);
    }
    if let Some(n) = &inputs.needles {
        cfg.needles = Some(parse_needles(0, n)?);
    }
    cfg.check_files()
}

fn placement(cfg: &PipelineConfig, v: Option<f64>, h: Option<f64>) -> anyhow::Result<CameraPlacement> {
    let v = v.or(cfg.camera_v_cm).ok_or(ConfigError::Required("camera_v_cm"))?;
    let h = h.or(cfg.camera_h_cm).ok_or(ConfigError::Required("camera_h_cm"))?;
    Ok(CameraPlacement::new(v, h)?)
}

/// Reads displacement samples. `#` lines and a header row are skipped;
/// columns past the eighth are ignored.
pub fn parse_samples(text: &str) -> anyhow::Result<Vec<DisplacementSample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let v = parse_list(i + 1, line)?;
        if v.len() < 8 {
            bail!("sample line {}: expected 8 numbers, got {}", i + 1, v.len());
        }
        let p = |k: usize| Point::new(v[k], v[k + 1]);
        out.push(DisplacementSample::new(p(0), p(2), p(4), p(6)).with_context(|| format!("sample line {}", i + 1))?);
    }
    if out.is_empty() {
        bail!("no displacement samples found");
    }
    Ok(out)
}

fn calibrate(cfg: &PipelineConfig, a: CalibrateArgs) -> anyhow::Result<u8> {
    let place = placement(cfg, a.camera_v, a.camera_h)?;
    let d = place.axial();
    println!("D = {d:.4} cm");
    println!("theta = {:.4} deg", place.elevation_deg());
    let model = if let Some(path) = &a.samples {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        let samples = parse_samples(&text)?;
        let est = estimate_focal(&samples, &place)?;
        println!(
            "samples: {}, mean Pd/Rd = {:.4} px/cm (spread {:.4}), f from samples = {:.2}",
            samples.len(),
            est.mean_ratio,
            est.spread,
            est.f
        );
        let ratio = a.ratio.unwrap_or(est.mean_ratio);
        let model = CalibrationModel::from_ratio(place, ratio, PlanarMap::pure_scale(ratio))?;
        println!("f = {:.2}  (Pd/Rd = {})", model.focal(), fmt_f64(ratio));
        println!("sample  Pd_px  Rd_cm  calculated_Rd_cm  residual_cm");
        for (i, s) in samples.iter().enumerate() {
            let pd = s.pixel_displacement();
            let rd = s.world_displacement();
            let calc = model.pixels_to_world(pd);
            println!(
                "{:>6}  {:>5.2}  {:>5.3}  {:>16.4}  {:>+11.4}",
                i + 1,
                pd,
                rd,
                calc,
                calc - rd
            );
        }
        model
    } else {
        let path = a.grid.as_ref().expect("clap requires samples or grid");
        let spec = cfg.grid.ok_or(ConfigError::Required(
            "grid_cols/grid_rows/grid_pitch_cm/grid_dot_radius_cm",
        ))?;
        let frame = Frame::read_pgm(path).map_err(|e| match e {
            pednav::Error::Io(source) => anyhow::Error::new(ConfigError::Read {
                path: path.clone(),
                source,
            }),
            other => other.into(),
        })?;
        let fit = fit_planar_map(&frame, &spec)?;
        let center = Point::new(frame.width() as f64 / 2.0 - 0.5, frame.height() as f64 / 2.0 - 0.5);
        let scale = fit.map.local_scale(center);
        println!(
            "grid: {} dots, RMS {:.4} px, max {:.4} px",
            fit.correspondences.len(),
            fit.rms_px,
            fit.max_px
        );
        let model = CalibrationModel::new(place, scale * d, fit.map)?;
        println!("f = {:.2}  (Pd/Rd at image center = {:.4} px/cm)", model.focal(), scale);
        model
    };
    let out = a
        .out
        .or_else(|| cfg.calibration.clone())
        .ok_or(ConfigError::Required("--out or calibration"))?;
    model.save(&out)?;
    eprintln!("wrote {}", out.display());
    Ok(0)
}

fn build_model_cmd(cfg: &PipelineConfig, a: BuildModelArgs) -> anyhow::Result<u8> {
    let model = if a.synth {
        synth_model(a.px_per_cm, &cfg.edges)?
    } else {
        let path = a.image.as_ref().expect("clap requires image or synth");
        let frame = Frame::read_pgm(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut m = build_model(&frame, &cfg.edges)?;
        if let Some(r) = &a.reference {
            let v = parse_list(0, r)?;
            if v.len() != 2 {
                bail!("--reference expects x,y");
            }
            m = m.with_reference_in_source(Point::new(v[0], v[1]));
        }
        m
    };
    let out = a
        .out
        .or_else(|| cfg.model.clone())
        .ok_or(ConfigError::Required("--out or model"))?;
    model.save(&out)?;
    println!(
        "model: {} chains, {} edgels, {:.1} px of edge, {} pyramid levels",
        model.active_edges.len(),
        model.points().len(),
        model.total_active_length,
        model.levels.len()
    );
    eprintln!("wrote {}", out.display());
    Ok(0)
}

/// Model of the synthetic marker, reference at its rendered center.
pub fn synth_model(px_per_cm: f64, edges: &EdgeParams) -> anyhow::Result<GeometricModel> {
    let (img, center) = model_image(&MarkerSpec::canonical(), px_per_cm);
    Ok(build_model(&img, edges)?.with_reference_in_source(center))
}

struct Loaded {
    calib: CalibrationModel,
    model: GeometricModel,
    plan: SurgicalPlan,
}

fn load_inputs(cfg: &PipelineConfig) -> anyhow::Result<Loaded> {
    let calib = cfg.require("calibration", &cfg.calibration)?;
    let model = cfg.require("model", &cfg.model)?;
    let plan = cfg.require("plan", &cfg.plan)?;
    Ok(Loaded {
        calib: CalibrationModel::load(calib).with_context(|| format!("calibration {}", calib.display()))?,
        model: GeometricModel::load(model).with_context(|| format!("model {}", model.display()))?,
        plan: SurgicalPlan::load(plan).with_context(|| format!("plan {}", plan.display()))?,
    })
}

fn track(cfg: &PipelineConfig, a: &TrackArgs) -> anyhow::Result<u8> {
    let input = cfg.require("input", &cfg.input)?;
    let l = load_inputs(cfg)?;
    let Some(needles) = cfg.needles else {
        eprintln!("unregistered: no needle positions given (set `needles` in the config or pass --needles)");
        return Ok(EXIT_UNREGISTERED);
    };
    let residual = alignment_residual(&needles, &l.plan, &l.calib);
    let reg = finalize_registration(needles, residual, cfg.registration_tolerance_cm);
    if !reg.finalized {
        eprintln!(
            "unregistered: needle residual {residual:.4} cm exceeds the {} cm tolerance",
            cfg.registration_tolerance_cm
        );
        return Ok(EXIT_UNREGISTERED);
    }
    let frames = read_seq_file(input).with_context(|| format!("sequence {}", input.display()))?;
    let mut session = Session::new(l.calib, l.model, l.plan, cfg.session_params())?.with_clock(a.clock.make());
    session.set_registration(reg);
    for f in &frames {
        session.step(f)?;
    }
    let report = session.report()?;
    match &a.report {
        Some(p) => std::fs::write(p, &report).with_context(|| format!("cannot write {}", p.display()))?,
        None => std::io::stdout().write_all(report.as_bytes())?,
    }
    let states = session.states();
    let violations = states.iter().filter(|s| s.violation).count();
    let lost = states.iter().filter(|s| s.track == Track::Lost).count();
    eprintln!(
        "{} frames, {} tracking, {} lost, {} violation frames",
        states.len(),
        states.len() - lost,
        lost,
        violations
    );
    Ok(if violations > 0 { EXIT_VIOLATION } else { 0 })
}

/// Built-in scenario by name, or a script file.
pub fn load_scenario(name: &str, noise: f64, seed: u64) -> anyhow::Result<Scenario> {
    Ok(match name {
        "straight" => Scenario::straight(noise, seed),
        "veering" => Scenario::veering(noise, seed),
        path => {
            Scenario::load(path).with_context(|| format!("scenario {path}: not a built-in name or readable script"))?
        }
    })
}

/// Registration with needles exactly on the plan's lines.
fn exact_needles(calib: &CalibrationModel, plan: &SurgicalPlan) -> [Point; 3] {
    plan.line_x.map(|x| calib.unmap_point(Point::new(x, 2.0)).point)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub count: usize,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank percentiles of search times.
pub fn timing(times: &[f64]) -> Option<Timing> {
    if times.is_empty() {
        return None;
    }
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    let at = |q: f64| t[((t.len() as f64 * q).ceil() as usize).clamp(1, t.len()) - 1];
    Some(Timing {
        count: t.len(),
        p50: at(0.5),
        p95: at(0.95),
        max: t[t.len() - 1],
    })
}

fn bench(cfg: &PipelineConfig, a: &BenchArgs) -> anyhow::Result<u8> {
    let (mut frames, calib, model, plan, needles) = if let Some(input) = &a.input {
        let mut cfg = cfg.clone();
        cfg.input = Some(input.clone());
        cfg.check_files()?;
        let l = load_inputs(&cfg)?;
        let frames = read_seq_file(input).with_context(|| format!("sequence {}", input.display()))?;
        let needles = cfg.needles.unwrap_or_else(|| exact_needles(&l.calib, &l.plan));
        (frames, l.calib, l.model, l.plan, needles)
    } else {
        let name = a.scenario.as_deref().unwrap_or("straight");
        let mut s = load_scenario(name, a.noise, a.seed)?;
        s.clutter = a.clutter;
        if let Some(n) = a.frames {
            s.poses.truncate(n);
        }
        let frames = s.render(&MarkerSpec::canonical())?;
        let calib = s.calibration();
        let model = match &cfg.model {
            Some(p) => GeometricModel::load(p)?,
            None => synth_model(s.px_per_cm, &cfg.edges)?,
        };
        let needles = exact_needles(&calib, &s.plan);
        (frames, calib, model, s.plan, needles)
    };
    if let Some(n) = a.frames {
        frames.truncate(n);
    }
    if frames.is_empty() {
        bail!("nothing to bench: the input has no frames");
    }
    let residual = alignment_residual(&needles, &plan, &calib);
    let mut session = Session::new(calib, model, plan, cfg.session_params())?;
    session.set_registration(finalize_registration(needles, residual, f64::INFINITY));
    for f in &frames {
        session.step(f)?;
    }
    let states = session.states();
    // a frame searched the full image unless the previous one was tracking
    let (mut seeded, mut full) = (Vec::new(), Vec::new());
    for (i, st) in states.iter().enumerate() {
        let windowed = i > 0 && states[i - 1].track == Track::Tracking;
        if windowed { &mut seeded } else { &mut full }.push(st.search_time);
    }
    let all: Vec<f64> = states.iter().map(|s| s.search_time).collect();
    let found = states.iter().filter(|s| s.matched.is_some()).count();
    println!("frames: {} ({} with a match)", states.len(), found);
    for (label, t) in [("all", &all), ("seeded window", &seeded), ("full frame", &full)] {
        if let Some(t) = timing(t) {
            println!(
                "{label:<14} n={:<5} P50 {:>7.3} ms  P95 {:>7.3} ms  max {:>7.3} ms",
                t.count, t.p50, t.p95, t.max
            );
        }
    }
    let t = timing(&all).expect("non-empty");
    let ratio = t.max / REFERENCE_SEARCH_MS;
    println!("reference: max {REFERENCE_SEARCH_MS} ms on 2012-era hardware; this run's max is {ratio:.2}x that");
    Ok(0)
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<u8> {
    let mut s = load_scenario(&a.scenario, a.noise, a.seed)?;
    s.clutter = a.clutter;
    if let Some(n) = a.frames {
        s.poses.truncate(n);
    }
    if s.is_empty() {
        bail!("scenario has no frames");
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let out = |name: &str| a.out.join(name);
    let spec = MarkerSpec::canonical();
    let rendered = render_scenario(&s, &spec)?;
    write_seq_file(out("frames.seq"), &rendered.frames)?;
    std::fs::write(out("truth.csv"), truth_csv(&rendered.truth))?;
    s.save(out("scenario.txt"))?;
    let calib = s.calibration();
    calib.save(out("calibration.txt"))?;
    s.plan.save(out("plan.txt"))?;
    let model = synth_model(s.px_per_cm, &EdgeParams::default())?;
    model.save(out("marker.model"))?;

    let mut cfg = PipelineConfig {
        calibration: Some(out("calibration.txt")),
        model: Some(out("marker.model")),
        plan: Some(out("plan.txt")),
        input: Some(out("frames.seq")),
        scenario: Some(out("scenario.txt")),
        needles: (!a.no_needles).then(|| exact_needles(&calib, &s.plan)),
        camera_v_cm: Some(CAMERA_V_CM),
        camera_h_cm: Some(CAMERA_H_CM),
        ..PipelineConfig::default()
    };
    if a.grid {
        let mut g = GridSpec::new(11, 9, 3.0, 0.4);
        g.origin_cm = Point::new(-15.0, -12.0);
        let img = render_grid(&g, calib.map(), s.width, s.height, a.noise, a.seed)?;
        img.write_pgm(out("grid.pgm"))?;
        cfg.grid = Some(g);
    }
    std::fs::write(out("pednav.conf"), cfg.to_text(&a.out))?;
    let violations = rendered.truth.iter().filter(|t| t.violation).count();
    println!(
        "{}: {} frames {}x{}, {} ground-truth violation frames; config {}",
        s.name,
        rendered.frames.len(),
        s.width,
        s.height,
        violations,
        out("pednav.conf").display()
    );
    Ok(0)
}

fn serve(cfg: &PipelineConfig, a: &ServeArgs) -> anyhow::Result<u8> {
    let (calibration, model, plan, source, needles) = if a.live {
        let name = a
            .scenario
            .clone()
            .or_else(|| cfg.scenario.as_ref().map(|p| p.display().to_string()))
            .unwrap_or_else(|| "straight".into());
        let script = load_scenario(&name, 0.0, 1)?;
        if script.is_empty() {
            bail!("scenario {name} has no poses");
        }
        let calib = script.calibration();
        let model = match &cfg.model {
            Some(p) => GeometricModel::load(p)?,
            None => synth_model(script.px_per_cm, &cfg.edges)?,
        };
        let plan = script.plan;
        (calib, model, plan, Source::LiveSynth(Box::new(script)), cfg.needles)
    } else {
        let input = cfg.require("input", &cfg.input)?;
        let l = load_inputs(cfg)?;
        let frames = read_seq_file(input).with_context(|| format!("sequence {}", input.display()))?;
        (l.calib, l.model, l.plan, Source::Replay(frames), cfg.needles)
    };
    let setup = ServiceSetup {
        calibration,
        model,
        plan,
        params: cfg.session_params(),
        needles,
        registration_tolerance_cm: cfg.registration_tolerance_cm,
        source,
        max_fps: cfg.max_fps,
        frozen_clock: a.clock == ClockKind::Frozen,
        stream_frames: a.stream_frames,
        truth_log: a.truth_log.clone(),
        queue_capacity: QUEUE_CAPACITY,
    };
    let service = Service::bind((a.bind.as_str(), cfg.port), setup)?;
    println!("listening on {}", service.local_addr()?);
    std::io::stdout().flush()?;
    if a.once {
        let s = service.serve_one()?;
        eprintln!("connection closed: {} frames, {} dropped", s.frames, s.dropped);
        Ok(0)
    } else {
        service.run()?;
        Ok(0)
    }
}
