//! Pipeline configuration: one `key = value` file with `#` comments.
//!
//! Relative paths are resolved against the directory holding the file.
//! Command-line flags override individual values after loading.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pednav::calib::GridSpec;
use pednav::edgemap::{ChainParams, EdgeParams, Thresholds};
use pednav::geom::Point;
use pednav::kv::{fmt_f64, parse_f64, parse_list, KvDoc};
use pednav::matcher::SearchParams;
use pednav::navigate::SessionParams;
use pednav::plangeo::REGISTRATION_TOLERANCE_CM;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PEDNAV_CONFIG";

pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("config: {key} refers to missing file {path}")]
    MissingFile { key: &'static str, path: PathBuf },
    #[error("config: {0}")]
    Range(String),
    #[error("config: {0} is required for this command")]
    Required(&'static str),
}

impl From<pednav::Error> for ConfigError {
    fn from(e: pednav::Error) -> Self {
        match e {
            pednav::Error::Parse { line, msg } => ConfigError::Invalid { line, msg },
            other => ConfigError::Range(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub calibration: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub input: Option<PathBuf>,
    /// Scenario script hosted by the live-synth service.
    pub scenario: Option<PathBuf>,
    /// Needle tips marked in the image, px, for registration.
    pub needles: Option<[Point; 3]>,
    pub registration_tolerance_cm: f64,
    pub edges: EdgeParams,
    pub search: SearchParams,
    pub window_px: f64,
    pub lost_after: usize,
    pub debounce: usize,
    pub port: u16,
    /// Frame-rate cap of the service; 0 means uncapped.
    pub max_fps: f64,
    pub camera_v_cm: Option<f64>,
    pub camera_h_cm: Option<f64>,
    pub grid: Option<GridSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let session = SessionParams::default();
        Self {
            calibration: None,
            model: None,
            plan: None,
            input: None,
            scenario: None,
            needles: None,
            registration_tolerance_cm: REGISTRATION_TOLERANCE_CM,
            edges: session.edges,
            search: session.search,
            window_px: session.window_px,
            lost_after: session.lost_after,
            debounce: session.debounce,
            port: DEFAULT_PORT,
            max_fps: 0.0,
            camera_v_cm: None,
            camera_h_cm: None,
            grid: None,
        }
    }
}

const PATH_KEYS: [&str; 5] = ["calibration", "model", "plan", "input", "scenario"];

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Parses a config document; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let doc = KvDoc::parse(text, None)?;
        let mut c = Self::default();
        let mut high_frac = None;
        let mut low_ratio = None;
        let mut abs = (None, None);
        let mut grid = (None, None, None, None, None, None);
        for (line, key, value) in &doc.entries {
            let line = *line;
            let num = || parse_f64(line, value).map_err(ConfigError::from);
            let count = || {
                value.parse::<usize>().map_err(|_| ConfigError::Invalid {
                    line,
                    msg: format!("{key}: expected a non-negative integer, got {value:?}"),
                })
            };
            match key.as_str() {
                k if PATH_KEYS.contains(&k) => {
                    let p = base.join(value);
                    match k {
                        "calibration" => c.calibration = Some(p),
                        "model" => c.model = Some(p),
                        "plan" => c.plan = Some(p),
                        "input" => c.input = Some(p),
                        _ => c.scenario = Some(p),
                    }
                }
                "needles" => c.needles = Some(parse_needles(line, value)?),
                "registration_tolerance_cm" => c.registration_tolerance_cm = num()?,
                "edge_high_frac" => high_frac = Some(num()?),
                "edge_low_ratio" => low_ratio = Some(num()?),
                "edge_high" => abs.1 = Some(num()?),
                "edge_low" => abs.0 = Some(num()?),
                "chain_max_turn_deg" => c.edges.chain.max_turn_deg = num()?,
                "chain_min_length" => c.edges.chain.min_length = num()?,
                "acceptance" => c.search.acceptance = num()?,
                "target_acceptance" => c.search.target_acceptance = num()?,
                "fit_error_weight" => c.search.fit_error_weight = num()?,
                "max_fit_error" => c.search.max_fit_error = num()?,
                "angle_min" => c.search.angle_range.0 = num()?,
                "angle_max" => c.search.angle_range.1 = num()?,
                "angle_step_coarse" => c.search.angle_step_coarse = Some(num()?),
                "window_px" => c.window_px = num()?,
                "lost_after" => c.lost_after = count()?,
                "debounce" => c.debounce = count()?,
                "port" => {
                    c.port = value.parse().map_err(|_| ConfigError::Invalid {
                        line,
                        msg: format!("port: expected 0..65535, got {value:?}"),
                    })?
                }
                "max_fps" => c.max_fps = num()?,
                "camera_v_cm" => c.camera_v_cm = Some(num()?),
                "camera_h_cm" => c.camera_h_cm = Some(num()?),
                "grid_cols" => grid.0 = Some(count()?),
                "grid_rows" => grid.1 = Some(count()?),
                "grid_pitch_cm" => grid.2 = Some(num()?),
                "grid_dot_radius_cm" => grid.3 = Some(num()?),
                "grid_origin_cm" => {
                    let v = parse_list(line, value)?;
                    if v.len() != 2 {
                        return Err(ConfigError::Invalid {
                            line,
                            msg: "grid_origin_cm: expected x,y".into(),
                        });
                    }
                    grid.4 = Some(Point::new(v[0], v[1]));
                }
                "grid_fit_radial" => {
                    grid.5 = Some(matches!(value.as_str(), "1" | "true" | "yes"));
                }
                _ => {
                    return Err(ConfigError::Invalid {
                        line,
                        msg: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        c.edges.thresholds = match (abs, high_frac, low_ratio) {
            ((None, None), hf, lr) => {
                let Thresholds::Relative { high_frac, low_ratio } = Thresholds::default() else {
                    unreachable!()
                };
                Thresholds::Relative {
                    high_frac: hf.unwrap_or(high_frac),
                    low_ratio: lr.unwrap_or(low_ratio),
                }
            }
            ((Some(low), Some(high)), None, None) => Thresholds::Absolute { low, high },
            _ => {
                return Err(ConfigError::Range(
                    "give either edge_low and edge_high, or edge_high_frac/edge_low_ratio".into(),
                ))
            }
        };
        if let (Some(cols), Some(rows), Some(pitch), Some(radius)) = (grid.0, grid.1, grid.2, grid.3) {
            let mut g = GridSpec::new(cols, rows, pitch, radius);
            g.origin_cm = grid.4.unwrap_or(Point::ORIGIN);
            g.fit_radial = grid.5.unwrap_or(false);
            c.grid = Some(g);
        } else if grid.0.is_some() || grid.1.is_some() || grid.2.is_some() || grid.3.is_some() {
            return Err(ConfigError::Range(
                "grid needs grid_cols, grid_rows, grid_pitch_cm and grid_dot_radius_cm".into(),
            ));
        }
        c.validate()?;
        Ok(c)
    }

    /// Range checks on every numeric setting.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Range(m.into()));
        match self.edges.thresholds {
            Thresholds::Relative { high_frac, low_ratio } => {
                if !(high_frac > 0.0 && high_frac <= 1.0) {
                    return bad("edge_high_frac must lie in (0, 1]");
                }
                if !(low_ratio > 0.0 && low_ratio <= 1.0) {
                    return bad("edge_low_ratio must lie in (0, 1]");
                }
            }
            Thresholds::Absolute { low, high } => {
                if !(low >= 0.0 && low <= high) {
                    return bad("edge thresholds need 0 <= edge_low <= edge_high");
                }
            }
        }
        let ChainParams {
            max_turn_deg,
            min_length,
            ..
        } = self.edges.chain;
        if !(max_turn_deg > 0.0 && max_turn_deg <= 180.0) {
            return bad("chain_max_turn_deg must lie in (0, 180]");
        }
        if !(min_length >= 0.0) {
            return bad("chain_min_length must be >= 0");
        }
        self.search.validate()?;
        if !(self.window_px > 0.0) {
            return bad("window_px must be positive");
        }
        if self.lost_after == 0 || self.debounce == 0 {
            return bad("lost_after and debounce must be at least 1");
        }
        if !(self.max_fps >= 0.0) {
            return bad("max_fps must be >= 0");
        }
        if !(self.registration_tolerance_cm >= 0.0) {
            return bad("registration_tolerance_cm must be >= 0");
        }
        Ok(())
    }

    /// Every configured path must exist.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        let paths = [
            ("calibration", &self.calibration),
            ("model", &self.model),
            ("plan", &self.plan),
            ("input", &self.input),
            ("scenario", &self.scenario),
        ];
        for (key, p) in paths {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::MissingFile { key, path: p.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn session_params(&self) -> SessionParams {
        SessionParams {
            edges: self.edges,
            search: self.search,
            window_px: self.window_px,
            lost_after: self.lost_after,
            debounce: self.debounce,
            ..SessionParams::default()
        }
    }

    pub fn require<'a>(&self, key: &'static str, v: &'a Option<PathBuf>) -> Result<&'a Path, ConfigError> {
        v.as_deref().ok_or(ConfigError::Required(key))
    }

    /// Serializes the settings; paths are written relative to `base` when
    /// they live under it.
    pub fn to_text(&self, base: &Path) -> String {
        let mut s = String::from("# pednav pipeline configuration\n");
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        for (key, p) in [
            ("calibration", &self.calibration),
            ("model", &self.model),
            ("plan", &self.plan),
            ("input", &self.input),
            ("scenario", &self.scenario),
        ] {
            if let Some(p) = p {
                let _ = writeln!(s, "{key} = {}", rel(p));
            }
        }
        if let Some(n) = self.needles {
            let v: Vec<String> = n.iter().flat_map(|p| [fmt_f64(p.x), fmt_f64(p.y)]).collect();
            let _ = writeln!(s, "needles = {}", v.join(","));
        }
        let _ = writeln!(
            s,
            "registration_tolerance_cm = {}",
            fmt_f64(self.registration_tolerance_cm)
        );
        match self.edges.thresholds {
            Thresholds::Relative { high_frac, low_ratio } => {
                let _ = writeln!(s, "edge_high_frac = {}", fmt_f64(high_frac));
                let _ = writeln!(s, "edge_low_ratio = {}", fmt_f64(low_ratio));
            }
            Thresholds::Absolute { low, high } => {
                let _ = writeln!(s, "edge_low = {}", fmt_f64(low));
                let _ = writeln!(s, "edge_high = {}", fmt_f64(high));
            }
        }
        let _ = writeln!(s, "chain_max_turn_deg = {}", fmt_f64(self.edges.chain.max_turn_deg));
        let _ = writeln!(s, "chain_min_length = {}", fmt_f64(self.edges.chain.min_length));
        let sp = &self.search;
        let _ = writeln!(s, "acceptance = {}", fmt_f64(sp.acceptance));
        let _ = writeln!(s, "target_acceptance = {}", fmt_f64(sp.target_acceptance));
        let _ = writeln!(s, "fit_error_weight = {}", fmt_f64(sp.fit_error_weight));
        let _ = writeln!(s, "max_fit_error = {}", fmt_f64(sp.max_fit_error));
        let _ = writeln!(s, "angle_min = {}", fmt_f64(sp.angle_range.0));
        let _ = writeln!(s, "angle_max = {}", fmt_f64(sp.angle_range.1));
        if let Some(step) = sp.angle_step_coarse {
            let _ = writeln!(s, "angle_step_coarse = {}", fmt_f64(step));
        }
        let _ = writeln!(s, "window_px = {}", fmt_f64(self.window_px));
        let _ = writeln!(s, "lost_after = {}", self.lost_after);
        let _ = writeln!(s, "debounce = {}", self.debounce);
        let _ = writeln!(s, "port = {}", self.port);
        let _ = writeln!(s, "max_fps = {}", fmt_f64(self.max_fps));
        if let Some(v) = self.camera_v_cm {
            let _ = writeln!(s, "camera_v_cm = {}", fmt_f64(v));
        }
        if let Some(h) = self.camera_h_cm {
            let _ = writeln!(s, "camera_h_cm = {}", fmt_f64(h));
        }
        if let Some(g) = self.grid {
            let _ = writeln!(s, "grid_cols = {}", g.cols);
            let _ = writeln!(s, "grid_rows = {}", g.rows);
            let _ = writeln!(s, "grid_pitch_cm = {}", fmt_f64(g.pitch_cm));
            let _ = writeln!(s, "grid_dot_radius_cm = {}", fmt_f64(g.dot_radius_cm));
            let _ = writeln!(
                s,
                "grid_origin_cm = {},{}",
                fmt_f64(g.origin_cm.x),
                fmt_f64(g.origin_cm.y)
            );
            let _ = writeln!(s, "grid_fit_radial = {}", g.fit_radial);
        }
        s
    }
}

pub fn parse_needles(line: usize, value: &str) -> Result<[Point; 3], ConfigError> {
    let v = parse_list(line, value)?;
    if v.len() != 6 {
        return Err(ConfigError::Invalid {
            line,
            msg: format!("needles: expected x1,y1,x2,y2,x3,y3, got {} numbers", v.len()),
        });
    }
    Ok([Point::new(v[0], v[1]), Point::new(v[2], v[3]), Point::new(v[4], v[5])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_an_empty_file() {
        let c = PipelineConfig::parse("# nothing\n", Path::new("/tmp")).unwrap();
        assert_eq!(c, PipelineConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let text = "model = m.txt\nacceptance = 65 # lower\nneedles = 1,2,3,4,5,6\nedge_high_frac = 0.3\nport = 9000\n";
        let c = PipelineConfig::parse(text, Path::new("/data")).unwrap();
        assert_eq!(c.model.as_deref(), Some(Path::new("/data/m.txt")));
        assert_eq!(c.search.acceptance, 65.0);
        assert_eq!(c.needles.unwrap()[2], Point::new(5.0, 6.0));
        assert_eq!(c.port, 9000);
        assert!(matches!(c.edges.thresholds, Thresholds::Relative { high_frac, .. } if high_frac == 0.3));
    }

    #[test]
    fn rejects_bad_values() {
        let base = Path::new(".");
        for text in [
            "bogus = 1\n",
            "acceptance = 120\n",
            "edge_high_frac = 0\n",
            "edge_low = 5\n",
            "edge_low = 9\nedge_high = 3\n",
            "needles = 1,2,3\n",
            "lost_after = 0\n",
            "grid_cols = 5\n",
            "window_px = -1\n",
            "port = 70000\n",
            "acceptance\n",
        ] {
            assert!(PipelineConfig::parse(text, base).is_err(), "{text:?}");
        }
    }

    #[test]
    fn missing_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.conf");
        std::fs::write(&path, "plan = nowhere.txt\n").unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(ConfigError::MissingFile { key: "plan", .. })
        ));
        assert!(matches!(
            PipelineConfig::load(dir.path().join("absent.conf")),
            Err(ConfigError::Read { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig {
            model: Some(PathBuf::from("/w/marker.model")),
            needles: Some([Point::new(0.1, 0.2), Point::new(1.0 / 3.0, 4.0), Point::new(5.5, -6.0)]),
            camera_v_cm: Some(56.0),
            camera_h_cm: Some(77.0),
            grid: Some(GridSpec::new(7, 5, 1.5, 0.3)),
            ..PipelineConfig::default()
        };
        c.search.angle_step_coarse = Some(7.5);
        let back = PipelineConfig::parse(&c.to_text(Path::new("/w")), Path::new("/w")).unwrap();
        assert_eq!(back, c);
    }
}
