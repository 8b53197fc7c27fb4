//! Runs experiment configs and writes CSV artifacts plus a JSON-lines
//! verdict log.
//!
//! Each experiment writes into `<out>/<name>/`. Every CSV starts with
//! `#`-prefixed lines carrying the crate version and the config hash, and
//! floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, classify, Classification, Thresholds, Verdict};
use crate::config::{figure_presets, ConfigError, ExperimentConfig, InitialKind, Overrides, Solver};
use crate::eigen::{self, EigenDomain, EigenError, Normalization};
use crate::fd::{self, FdError, Frame};
use crate::hj::{self, HjError, HjOptions, HjScheme, LogField};
use crate::landscape::{Environment, LandscapeError, Velocities};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("density solver: {0}")]
    Fd(#[from] FdError),
    #[error("Hamilton-Jacobi solver: {0}")]
    Hj(#[from] HjError),
    #[error("eigen solver: {0}")]
    Eigen(#[from] EigenError),
    #[error("landscape: {0}")]
    Landscape(#[from] LandscapeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One line of the verdict log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictRecord {
    pub experiment: String,
    pub config_hash: String,
    pub version: &'static str,
    pub solver: Solver,
    pub thresholds: Thresholds,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated_verdict: Option<Verdict>,
    /// Concentration point measured in the frame of the predicted dominant point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_argmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_argmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover_time: Option<f64>,
    pub discrepancies: BTreeMap<String, f64>,
}

impl VerdictRecord {
    fn new(cfg: &ExperimentConfig, class: Classification) -> Self {
        VerdictRecord {
            experiment: cfg.name.clone(),
            config_hash: cfg.hash(),
            version: VERSION,
            solver: cfg.solver,
            thresholds: class.thresholds,
            verdict: class.verdict,
            simulated_verdict: None,
            measured_argmax: None,
            predicted_argmax: None,
            crossover_time: None,
            discrepancies: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub record: VerdictRecord,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Comma-separated table with `#` header comments.
pub struct CsvTable {
    comments: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(cfg: &ExperimentConfig, columns: &[&'static str]) -> Self {
        CsvTable {
            comments: vec![
                format!("lagshift {VERSION}"),
                format!("config_hash {}", cfg.hash()),
                format!("experiment {}", cfg.name),
            ],
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn row(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        fs::write(path, self.render()).map_err(io_err(path))
    }
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: PathBuf) -> Result<Self, RunError> {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Sink { dir, files: Vec::new() })
    }

    fn table(&mut self, name: &str, table: &CsvTable) -> Result<(), RunError> {
        let path = self.dir.join(name);
        table.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }
}

fn predicted(verdict: &Verdict) -> Option<(usize, f64)> {
    match verdict.effective() {
        Some(Verdict::Persist { index, location }) => Some((*index, *location)),
        _ => None,
    }
}

/// Velocity of the tracked point that the theory expects to dominate.
fn dominant_velocity(cfg: &ExperimentConfig, index: usize) -> f64 {
    let eps = cfg.shift.epsilon;
    match (cfg.shift.c, cfg.shift.c1, cfg.shift.c2) {
        (Some(c), _, _) => eps * c,
        (None, Some(c1), Some(c2)) => eps * if index == 0 { c1 } else { c2 },
        _ => 0.0,
    }
}

/// Runs one experiment, writing its artifacts under `out/<name>/`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunArtifacts, RunError> {
    cfg.validate()?;
    let mut sink = Sink::new(out.join(&cfg.name))?;
    sink.text("config.toml", &cfg.to_toml())?;
    let class = classify(&cfg.model()?);
    let mut record = VerdictRecord::new(cfg, class);
    match cfg.solver {
        Solver::Fd => run_fd(cfg, &mut sink, &mut record)?,
        Solver::HjEps | Solver::HjLimit => run_hj(cfg, &mut sink, &mut record)?,
        Solver::Eigen => run_eigen(cfg, &mut sink, &mut record)?,
    }
    sink.text("verdict.json", &(record.to_json() + "\n"))?;
    Ok(RunArtifacts {
        dir: sink.dir,
        files: sink.files,
        record,
    })
}

fn run_fd(cfg: &ExperimentConfig, sink: &mut Sink, record: &mut VerdictRecord) -> Result<(), RunError> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let init = cfg.initial.as_ref().expect("validated");
    if init.kind != InitialKind::Gaussian {
        log::info!("{}: density solver starts from exp(-u0/eps)", cfg.name);
    }
    let eps = model.epsilon();
    let n0 = fd::DensityField::from_fn(&grid, |x| match init.kind {
        InitialKind::Gaussian => init.density(x),
        InitialKind::LogQuadratic => (-init.log_density(x, eps) / eps).exp(),
    })?;
    let opts = cfg.sim_options()?;
    let out = fd::simulate(&model, &n0, &grid, &opts)?;
    let d = &out.diagnostics;

    let mut diag = CsvTable::new(cfg, &["t", "rho", "argmax_x", "share_peak1", "share_peak2"]);
    diag.comment(format!("epsilon {eps} (tau = epsilon * t)"))
        .comment(format!("dt {}", fmt_f64(d.dt)))
        .comment(format!("share_radius {}", fmt_f64(d.share_radius)))
        .comment(format!(
            "frame {}",
            if d.frame == Frame::Lab { "lab" } else { "co-moving" }
        ));
    for (i, p) in d.tracked.iter().enumerate() {
        diag.comment(format!(
            "peak{} origin {} velocity {}",
            i + 1,
            fmt_f64(p.origin),
            fmt_f64(p.velocity)
        ));
    }
    let share = |i: usize, k: usize| d.shares.get(i).map_or(f64::NAN, |s| s[k]);
    for k in 0..d.len() {
        diag.row(vec![d.times[k], d.rho[k], d.argmax_x[k], share(0, k), share(1, k)]);
    }
    sink.table("diagnostics.csv", &diag)?;

    for (k, snap) in out.snapshots.iter().enumerate() {
        let mut t = CsvTable::new(cfg, &["x", "n"]);
        t.comment(format!("t {}", fmt_f64(snap.t)));
        for (j, v) in snap.values.iter().enumerate() {
            t.row(vec![grid.x(j), *v]);
        }
        sink.table(&format!("snapshot_{k:03}.csv"), &t)?;
    }

    record.simulated_verdict = Some(analysis::simulated_verdict(d));
    let report = analysis::ConcentrationReport::from_diagnostics(d);
    record.crossover_time = analysis::crossover_time(&report);
    let last = d.len() - 1;
    record.discrepancies.insert("boundary_mass_fraction".into(), d.max_boundary_fraction);
    if let Some((index, location)) = predicted(&record.verdict) {
        let v = dominant_velocity(cfg, index);
        let measured = d.argmax_in_frame(last, v);
        record.measured_argmax = Some(measured);
        record.predicted_argmax = Some(location);
        record.discrepancies.insert("argmax".into(), (measured - location).abs());
        if let (Environment::SingleSpeed(a), Velocities::Single(c)) = (&model.environment, model.shift.velocities) {
            if analysis::plateaued(&d.times, &d.rho) {
                match eigen_on_grid(a, c, eps, &grid, location) {
                    Ok(pair) => {
                        let pred = analysis::eigen_predicted_rho(&pair, |x| a.value(x));
                        let rho = d.rho[last];
                        record.discrepancies.insert("rho_vs_eigen_relative".into(), (rho - pred).abs() / pred);
                        let shift = match d.frame {
                            Frame::Lab => eps * c * d.times[last],
                            Frame::CoMoving => 0.0,
                        };
                        if let Ok(disc) = analysis::compare_profile_to_eigenvector(&out.final_field, &grid, &pair, shift) {
                            record.discrepancies.insert("profile_vs_eigenvector".into(), disc);
                        }
                    }
                    Err(e) => log::warn!("{}: eigen comparison skipped: {e}", cfg.name),
                }
            }
        }
    }
    Ok(())
}

/// Eigenpair on nodes commensurate with `grid`, centred near `around`.
pub fn eigen_on_grid(
    a: &crate::landscape::FitnessLandscape,
    c: f64,
    eps: f64,
    grid: &fd::Grid,
    around: f64,
) -> Result<eigen::EigenPair, EigenError> {
    let (lo, hi) = a.support_hull();
    let radius = (around - lo).abs().max((hi - around).abs()) + 10.0;
    let dx = grid.dx();
    let steps = (radius / dx).ceil();
    eigen::principal_eigenpair(|x| a.value(x), c, eps, &EigenDomain::with_spacing(around, steps * dx, dx)?)
}

fn run_hj(cfg: &ExperimentConfig, sink: &mut Sink, record: &mut VerdictRecord) -> Result<(), RunError> {
    let a = cfg.single_landscape()?;
    let c = cfg.shift.c.expect("validated");
    let eps = cfg.shift.epsilon;
    let grid = cfg.grid()?;
    let init = cfg.initial.as_ref().expect("validated");
    let u0 = LogField::from_fn(&grid, |x| match init.kind {
        InitialKind::LogQuadratic => init.log_density(x, eps),
        InitialKind::Gaussian => -eps * init.density(x).ln(),
    });
    let time = cfg.time.as_ref().expect("validated");
    let opts = HjOptions {
        t_final: time.t_final,
        dt: time.dt.expect("validated"),
        snapshot_times: cfg.output.snapshot_times.clone(),
    };
    let scheme = if cfg.solver == Solver::HjEps {
        HjScheme::Epsilon
    } else {
        HjScheme::Limit
    };
    let run = hj::simulate(scheme, &a, c, eps, &grid, &u0, &opts)?;

    let mut series = CsvTable::new(cfg, &["n", "tau", "rho_or_P", "argmin_u"]);
    series.comment(format!(
        "{} scheme, dt {}, co-moving coordinates",
        if scheme == HjScheme::Epsilon { "epsilon" } else { "limit" },
        fmt_f64(run.dt)
    ));
    let stride = cfg.output.stride;
    for k in 0..run.pressure.len() {
        if k % stride == 0 || k + 1 == run.pressure.len() {
            series.row(vec![k as f64, run.times[k], run.pressure[k], run.minimizer[k]]);
        }
    }
    sink.table("series.csv", &series)?;
    for (k, (t, field)) in run.snapshots.iter().enumerate() {
        let mut tab = CsvTable::new(cfg, &["x", "u"]);
        tab.comment(format!("tau {}", fmt_f64(*t)));
        for (j, v) in field.values.iter().enumerate() {
            tab.row(vec![grid.x(j), *v]);
        }
        sink.table(&format!("u_{k:03}.csv"), &tab)?;
    }
    if let Some(&m) = run.minimizer.last() {
        record.measured_argmax = Some(m);
        if let Some((_, location)) = predicted(&record.verdict) {
            record.predicted_argmax = Some(location);
            record.discrepancies.insert("argmin".into(), (m - location).abs());
        }
    }
    if scheme == HjScheme::Limit {
        let worst = run.min_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        record.discrepancies.insert("renormalization".into(), worst);
    }
    Ok(())
}

fn run_eigen(cfg: &ExperimentConfig, sink: &mut Sink, record: &mut VerdictRecord) -> Result<(), RunError> {
    let a = cfg.single_landscape()?;
    let c = cfg.shift.c.expect("validated");
    let eps = cfg.shift.epsilon;
    let e = cfg.eigen.as_ref().expect("validated");
    let dom = EigenDomain::with_spacing(e.center, e.radius, e.spacing)?;
    let pair = eigen::principal_eigenpair(|x| a.value(x), c, eps, &dom)?;
    let hat = eigen::weighted_rescale(&pair, c, eps);
    let pl1 = pair.normalized(Normalization::L1);
    let mut tab = CsvTable::new(cfg, &["x", "p", "p_hat"]);
    tab.comment(format!("lambda {}", fmt_f64(pair.lambda)))
        .comment(format!("R {} eps {} c {}", fmt_f64(e.radius), eps, c));
    for ((x, p), q) in pl1.xs.iter().zip(&pl1.vector).zip(&hat) {
        tab.row(vec![*x, *p, *q]);
    }
    sink.table("eigenvector.csv", &tab)?;

    let radii = if e.radii.is_empty() { vec![e.radius] } else { e.radii.clone() };
    let epsilons = if e.epsilons.is_empty() { vec![eps] } else { e.epsilons.clone() };
    let table = eigen::eigenvalue_convergence_table(&a, c, &epsilons, &radii, e.center, e.spacing)?;
    let mut conv = CsvTable::new(cfg, &["R", "eps", "lambda"]);
    conv.comment(format!("limit -(a_M - c^2/4) = {}", fmt_f64(-a.persistence_threshold(c))));
    for (i, ep) in table.eps.iter().enumerate() {
        for (j, r) in table.radii.iter().enumerate() {
            conv.row(vec![*r, *ep, table.lambda[i][j]]);
        }
    }
    sink.table("convergence.csv", &conv)?;

    let xmax = pair.xs[pair.argmax()];
    record.measured_argmax = Some(xmax);
    if let Some((_, location)) = predicted(&record.verdict) {
        record.predicted_argmax = Some(location);
        record.discrepancies.insert("argmax".into(), (xmax - location).abs());
    }
    record
        .discrepancies
        .insert("lambda_vs_limit".into(), (pair.lambda + a.persistence_threshold(c)).abs());
    record.discrepancies.insert("symmetric_residual".into(), pair.symmetric_residual());
    record.discrepancies.insert("drift_residual".into(), pair.drift_residual());
    Ok(())
}

/// Runs experiments on a bounded worker pool and writes `out/verdicts.jsonl`
/// in input order.
pub fn run_many(cfgs: &[ExperimentConfig], out: &Path, threads: usize) -> Result<Vec<RunArtifacts>, RunError> {
    use rayon::prelude::*;
    let mut names = std::collections::BTreeSet::new();
    for c in cfgs {
        if !names.insert(c.name.as_str()) {
            return Err(ConfigError::Invalid {
                path: "name".into(),
                message: format!("duplicate experiment name {:?}", c.name),
            }
            .into());
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<Result<RunArtifacts, RunError>> =
        pool.install(|| cfgs.par_iter().map(|c| run(c, out)).collect());
    let artifacts = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_verdict_log(out, artifacts.iter().map(|a| &a.record))?;
    Ok(artifacts)
}

pub fn write_verdict_log<'a>(out: &Path, records: impl IntoIterator<Item = &'a VerdictRecord>) -> Result<PathBuf, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("verdicts.jsonl");
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json());
        text.push('\n');
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Runs every preset of `figure` with `overrides` applied.
pub fn reproduce(figure: &str, out: &Path, threads: usize, overrides: &Overrides) -> Result<Vec<RunArtifacts>, RunError> {
    let cfgs = figure_presets(figure)?
        .into_iter()
        .map(|c| c.with_overrides(overrides))
        .collect::<Result<Vec<_>, _>>()?;
    run_many(&cfgs, out, threads)
}

/// Theory-only verdict record for a config.
pub fn classify_config(cfg: &ExperimentConfig) -> Result<VerdictRecord, RunError> {
    let class = classify(&cfg.model()?);
    let mut r = VerdictRecord::new(cfg, class);
    r.predicted_argmax = predicted(&r.verdict).map(|p| p.1);
    Ok(r)
}
