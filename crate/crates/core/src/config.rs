//! Experiment definitions.
//!
//! An experiment is a TOML document with a handful of sections:
//!
//! ```toml
//! name = "single-peak"
//! solver = "fd"              # fd | hj-eps | hj-limit | eigen
//! case = "single-speed"      # single-speed | two-speed
//!
//! [landscape]
//! offset = 0.5
//! terms = [{ family = "quadratic_plus", h = 2.5, center = 40.0 }]
//!
//! [shift]
//! epsilon = 0.1
//! c = 1.0
//!
//! [grid]
//! length = 300.0
//! nodes = 2000
//!
//! [time]
//! t_final = 2000.0
//!
//! [initial]
//! kind = "gaussian"
//! amp = 0.1
//! center = 37.5
//! width = 100.0
//! ```
//!
//! Times are lab times for `fd` and `τ = ε t` for the Hamilton–Jacobi
//! solvers. A two-speed landscape uses `delta`, `peak1`, `peak2` instead of
//! `offset` and `terms`; its growth is `a1 + a2 − delta`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eigen::EigenDomain;
use crate::fd::{Frame, Grid, SimOptions};
use crate::landscape::{
    Bump, Environment, FitnessLandscape, LandscapeError, Model, ShiftSpec, TwoPeakLandscape,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Landscape {
        path: String,
        #[source]
        source: LandscapeError,
    },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Fd,
    HjEps,
    HjLimit,
    Eigen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    SingleSpeed,
    TwoSpeed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Bump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak1: Option<Bump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak2: Option<Bump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub origin: f64,
    pub length: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Absent means the stable step is chosen automatically (fd only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// `n0 = amp · exp(−(x − center)² / width)`
    Gaussian,
    /// `u0 = −ε (log amp − (x − center)² / width)`
    LogQuadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub amp: f64,
    pub center: f64,
    pub width: f64,
}

impl InitialConfig {
    pub fn density(&self, x: f64) -> f64 {
        self.amp * (-(x - self.center).powi(2) / self.width).exp()
    }

    pub fn log_density(&self, x: f64, eps: f64) -> f64 {
        -eps * (self.amp.ln() - (x - self.center).powi(2) / self.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "is_lab")]
    pub frame: FrameConfig,
}

fn default_stride() -> usize {
    10
}

fn is_lab(f: &FrameConfig) -> bool {
    *f == FrameConfig::Lab
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            snapshot_times: Vec::new(),
            stride: default_stride(),
            share_radius: None,
            dir: None,
            frame: FrameConfig::Lab,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FrameConfig {
    #[default]
    Lab,
    CoMoving,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub center: f64,
    pub radius: f64,
    pub spacing: f64,
    /// Extra radii and epsilons for a convergence table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub solver: Solver,
    pub case: Case,
    pub landscape: LandscapeConfig,
    pub shift: ShiftConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenConfig>,
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        self.model()?;
        let needs_run = self.solver != Solver::Eigen;
        if needs_run {
            let grid = self.grid.as_ref().ok_or_else(|| invalid("grid", "required for this solver"))?;
            if !(grid.length > 0.0 && grid.length.is_finite()) {
                return Err(invalid("grid.length", "must be positive"));
            }
            if grid.nodes < 3 {
                return Err(invalid("grid.nodes", "need at least 3 nodes"));
            }
            if !grid.origin.is_finite() {
                return Err(invalid("grid.origin", "must be finite"));
            }
            let time = self.time.as_ref().ok_or_else(|| invalid("time", "required for this solver"))?;
            if !(time.t_final >= 0.0 && time.t_final.is_finite()) {
                return Err(invalid("time.t_final", "must be nonnegative"));
            }
            if let Some(dt) = time.dt {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(invalid("time.dt", "must be positive"));
                }
            }
            if self.solver != Solver::Fd && time.dt.is_none() {
                return Err(invalid("time.dt", "required for the Hamilton-Jacobi solvers"));
            }
            let init = self.initial.as_ref().ok_or_else(|| invalid("initial", "required for this solver"))?;
            if !(init.amp > 0.0) {
                return Err(invalid("initial.amp", "must be positive"));
            }
            if !(init.width > 0.0) {
                return Err(invalid("initial.width", "must be positive"));
            }
            if !init.center.is_finite() {
                return Err(invalid("initial.center", "must be finite"));
            }
            for (i, &ts) in self.output.snapshot_times.iter().enumerate() {
                if !(0.0..=time.t_final).contains(&ts) {
                    return Err(invalid(
                        &format!("output.snapshot_times[{i}]"),
                        format!("{ts} outside [0, {}]", time.t_final),
                    ));
                }
            }
            if self.output.stride == 0 {
                return Err(invalid("output.stride", "must be at least 1"));
            }
            if let Some(r) = self.output.share_radius {
                if !(r > 0.0) {
                    return Err(invalid("output.share_radius", "must be positive"));
                }
            }
        }
        if matches!(self.solver, Solver::HjEps | Solver::HjLimit) && self.case != Case::SingleSpeed {
            return Err(invalid("case", "the Hamilton-Jacobi solvers need a single-speed landscape"));
        }
        if self.output.frame == FrameConfig::CoMoving && self.case != Case::SingleSpeed {
            return Err(invalid("output.frame", "co-moving frame needs a single speed"));
        }
        if self.solver == Solver::Eigen {
            if self.case != Case::SingleSpeed {
                return Err(invalid("case", "eigen solver needs a single-speed landscape"));
            }
            let e = self.eigen.as_ref().ok_or_else(|| invalid("eigen", "required for the eigen solver"))?;
            EigenDomain::with_spacing(e.center, e.radius, e.spacing)
                .map_err(|err| invalid("eigen", err.to_string()))?;
            for (i, r) in e.radii.iter().enumerate() {
                if !(*r > 0.0) {
                    return Err(invalid(&format!("eigen.radii[{i}]"), "must be positive"));
                }
            }
            for (i, v) in e.epsilons.iter().enumerate() {
                if !(*v > 0.0) {
                    return Err(invalid(&format!("eigen.epsilons[{i}]"), "must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn single_landscape(&self) -> Result<FitnessLandscape, ConfigError> {
        let l = &self.landscape;
        if l.delta.is_some() || l.peak1.is_some() || l.peak2.is_some() {
            return Err(invalid("landscape", "delta/peak1/peak2 belong to two-speed landscapes"));
        }
        if l.terms.is_empty() {
            return Err(invalid("landscape.terms", "at least one term required"));
        }
        FitnessLandscape::new(l.terms.clone(), l.offset.unwrap_or(0.0)).map_err(|source| {
            ConfigError::Landscape {
                path: "landscape".into(),
                source,
            }
        })
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        let s = &self.shift;
        let lerr = |path: &str| {
            let path = path.to_string();
            move |source| ConfigError::Landscape { path, source }
        };
        match self.case {
            Case::SingleSpeed => {
                let a = self.single_landscape()?;
                if s.c1.is_some() || s.c2.is_some() {
                    return Err(invalid("shift", "c1/c2 belong to two-speed experiments"));
                }
                let c = s.c.ok_or_else(|| invalid("shift.c", "required"))?;
                let shift = ShiftSpec::single(s.epsilon, c).map_err(lerr("shift"))?;
                Model::new(Environment::SingleSpeed(a), shift).map_err(lerr("case"))
            }
            Case::TwoSpeed => {
                let l = &self.landscape;
                if !l.terms.is_empty() || l.offset.is_some() {
                    return Err(invalid("landscape", "terms/offset belong to single-speed landscapes"));
                }
                let p1 = l.peak1.ok_or_else(|| invalid("landscape.peak1", "required"))?;
                let p2 = l.peak2.ok_or_else(|| invalid("landscape.peak2", "required"))?;
                let delta = l.delta.ok_or_else(|| invalid("landscape.delta", "required"))?;
                let a1 = FitnessLandscape::new(vec![p1], 0.0).map_err(lerr("landscape.peak1"))?;
                let a2 = FitnessLandscape::new(vec![p2], 0.0).map_err(lerr("landscape.peak2"))?;
                let tp = TwoPeakLandscape::new(a1, a2, delta).map_err(lerr("landscape"))?;
                if s.c.is_some() {
                    return Err(invalid("shift.c", "two-speed experiments use c1 and c2"));
                }
                let c1 = s.c1.ok_or_else(|| invalid("shift.c1", "required"))?;
                let c2 = s.c2.ok_or_else(|| invalid("shift.c2", "required"))?;
                let shift = ShiftSpec::pair(s.epsilon, c1, c2).map_err(lerr("shift"))?;
                Model::new(Environment::TwoSpeed(tp), shift).map_err(lerr("case"))
            }
        }
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = self.grid.as_ref().ok_or_else(|| invalid("grid", "required"))?;
        Grid::with_origin(g.origin, g.length, g.nodes).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn sim_options(&self) -> Result<SimOptions, ConfigError> {
        let time = self.time.as_ref().ok_or_else(|| invalid("time", "required"))?;
        let mut o = SimOptions::new(time.t_final);
        o.dt = time.dt;
        o.stride = self.output.stride;
        o.snapshot_times = self.output.snapshot_times.clone();
        o.share_radius = self.output.share_radius;
        o.frame = match self.output.frame {
            FrameConfig::Lab => Frame::Lab,
            FrameConfig::CoMoving => Frame::CoMoving,
        };
        Ok(o)
    }

    /// Applies command-line overrides and revalidates.
    pub fn with_overrides(mut self, ov: &Overrides) -> Result<Self, ConfigError> {
        if let Some(dt) = ov.dt {
            self.time
                .as_mut()
                .ok_or_else(|| invalid("time", "no time section to override"))?
                .dt = Some(dt);
        }
        if let Some(nx) = ov.nx {
            self.grid
                .as_mut()
                .ok_or_else(|| invalid("grid", "no grid section to override"))?
                .nodes = nx;
        }
        if let Some(ts) = &ov.snapshot_times {
            self.output.snapshot_times = ts.clone();
        }
        self.validate()?;
        Ok(self)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub nx: Option<usize>,
    pub snapshot_times: Option<Vec<f64>>,
}

/// A figure preset shipped with the library.
#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub figure: &'static str,
    pub file: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($fig:literal, $file:literal) => {
        Preset {
            figure: $fig,
            file: $file,
            text: include_str!(concat!("../presets/", $file)),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig1", "fig1.toml"),
    preset!("fig2", "fig2_eps.toml"),
    preset!("fig2", "fig2_limit.toml"),
    preset!("fig3", "fig3_c2_2.5.toml"),
    preset!("fig3", "fig3_c2_1.toml"),
    preset!("fig4", "fig4_z12.toml"),
    preset!("fig4", "fig4_z8.toml"),
    preset!("fig4", "fig4_z4.toml"),
    preset!("fig4", "fig4_z0.toml"),
    preset!("fig5", "fig5.toml"),
];

pub const FIGURES: &[&str] = &["fig1", "fig2", "fig3", "fig4", "fig5"];

/// The experiments behind a figure.
pub fn figure_presets(figure: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    if !FIGURES.contains(&figure) {
        return Err(invalid("figure", format!("unknown figure {figure:?}, expected one of {FIGURES:?}")));
    }
    PRESETS
        .iter()
        .filter(|p| p.figure == figure)
        .map(|p| {
            ExperimentConfig::from_toml(p.text).map_err(|e| match e {
                ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", p.file)),
                other => other,
            })
        })
        .collect()
}
