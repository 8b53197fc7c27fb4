//! Post-processing: verdicts from thresholds and from runs, concentration
//! reports, crossover detection, and profile-vs-eigenvector comparison.

use serde::Serialize;
use thiserror::Error;

use crate::eigen::EigenPair;
use crate::fd::{DensityField, Grid, RunDiagnostics};
use crate::landscape::{Environment, FitnessLandscape, LandscapeError, Model, Velocities};

/// `ρ(T) / ρ(0)` below which a run counts as extinct.
pub const EXTINCTION_RATIO: f64 = 1e-6;

/// Relative change of `ρ` over the last tenth of a run below which it has plateaued.
pub const PLATEAU_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("grids are not commensurate: {0}")]
    GridMismatch(String),
    #[error("density has zero mass")]
    ZeroMass,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Concentration on tracked point `index`, whose position at `t = 0`
    /// (equivalently in its co-moving frame) is `location`.
    Persist { index: usize, location: f64 },
    Extinct,
    /// The theorems do not apply; `tentative` is what the thresholds suggest anyway.
    OutsideHypotheses {
        reason: String,
        tentative: Option<Box<Verdict>>,
    },
}

impl Verdict {
    /// The verdict itself, or the tentative one when outside the hypotheses.
    pub fn effective(&self) -> Option<&Verdict> {
        match self {
            Verdict::OutsideHypotheses { tentative, .. } => tentative.as_deref(),
            v => Some(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Thresholds {
    /// `a_M − c²/4`
    Single { threshold: f64 },
    /// `F_i = a_{i,M} − c_i²/4 − δ`
    Pair { f1: f64, f2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

fn outside(reason: impl Into<String>, tentative: Option<Verdict>) -> Verdict {
    Verdict::OutsideHypotheses {
        reason: reason.into(),
        tentative: tentative.map(Box::new),
    }
}

/// Theory verdict from the persistence thresholds alone.
pub fn classify(model: &Model) -> Classification {
    match (&model.environment, model.shift.velocities) {
        (Environment::SingleSpeed(a), Velocities::Single(c)) => classify_single(a, c),
        (Environment::TwoSpeed(tp), Velocities::Pair { c1, c2 }) => {
            let f = tp.lagged_fitness(c1, c2);
            let thresholds = Thresholds::Pair { f1: f.f1, f2: f.f2 };
            let tentative = if f.extinct() {
                Some(Verdict::Extinct)
            } else {
                f.dominant().and_then(|i| {
                    let c = if i == 0 { c1 } else { c2 };
                    tp.lagged_optimum(i, c)
                        .ok()
                        .map(|location| Verdict::Persist { index: i, location })
                })
            };
            let verdict = if tp.delta <= 0.0 {
                outside(format!("background death rate {} is not positive", tp.delta), tentative)
            } else if f.tie() {
                outside("lagged fitness values tie", None)
            } else {
                match tentative {
                    Some(v) => v,
                    None => outside("lagged optimum root structure violated", None),
                }
            };
            Classification { verdict, thresholds }
        }
        _ => unreachable!("validated in Model::new"),
    }
}

fn classify_single(a: &FitnessLandscape, c: f64) -> Classification {
    let thr = a.persistence_threshold(c);
    let thresholds = Thresholds::Single { threshold: thr };
    let tie = crate::landscape::TIE_TOLERANCE * thr.abs().max(1.0);
    if thr.abs() < tie {
        return Classification {
            verdict: outside("critical speed: a_M - c^2/4 = 0", None),
            thresholds,
        };
    }
    let tentative = if thr < 0.0 {
        Ok(Verdict::Extinct)
    } else {
        dominant_candidate(a, c)
    };
    let verdict = match (tentative, a.decay_floor()) {
        (Err(e), _) => outside(e.to_string(), None),
        (Ok(v), None) => outside("growth rate does not become negative far away", Some(v)),
        (Ok(v), Some(_)) => v,
    };
    Classification { verdict, thresholds }
}

/// The lagged optimum trailing the shallowest maximum.
fn dominant_candidate(a: &FitnessLandscape, c: f64) -> Result<Verdict, LandscapeError> {
    let cands = a.concentration_candidates(c)?;
    let target = a.shallowest_peaks()[0];
    let pick = if c > 0.0 {
        cands.iter().enumerate().rfind(|(_, x)| **x <= target)
    } else if c < 0.0 {
        cands.iter().enumerate().find(|(_, x)| **x >= target)
    } else {
        cands.iter().enumerate().find(|(_, x)| (**x - target).abs() < 1e-9)
    };
    pick.map(|(index, &location)| Verdict::Persist { index, location })
        .ok_or(LandscapeError::AssumptionViolated("no candidate trails the shallowest peak".into()))
}

/// Verdict read off a run: extinct when the mass has collapsed by
/// [`EXTINCTION_RATIO`], otherwise the tracked point holding the largest
/// final share.
pub fn simulated_verdict(diag: &RunDiagnostics) -> Verdict {
    let (Some(&r0), Some(&rt)) = (diag.rho.first(), diag.rho.last()) else {
        return Verdict::Extinct;
    };
    if r0 <= 0.0 || rt < EXTINCTION_RATIO * r0 {
        return Verdict::Extinct;
    }
    let best = diag
        .shares
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.last().map(|v| (i, *v)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((index, _)) => Verdict::Persist {
            index,
            location: diag.tracked[index].origin,
        },
        None => outside("no tracked points", None),
    }
}

/// Time series of concentration metrics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub times: Vec<f64>,
    /// Argmax relative to the first tracked point's frame.
    pub argmax_comoving: Vec<f64>,
    pub shares: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
}

impl ConcentrationReport {
    pub fn from_diagnostics(diag: &RunDiagnostics) -> Self {
        let v = diag.tracked.first().map(|p| p.velocity).unwrap_or(0.0);
        ConcentrationReport {
            times: diag.times.clone(),
            argmax_comoving: (0..diag.len()).map(|k| diag.argmax_in_frame(k, v)).collect(),
            shares: diag.shares.clone(),
            widths: diag.widths.clone(),
        }
    }
}

/// First time share 1 exceeds share 2 after a stretch where share 2 led.
pub fn crossover_time(report: &ConcentrationReport) -> Option<f64> {
    if report.shares.len() < 2 {
        return None;
    }
    let (s1, s2) = (&report.shares[0], &report.shares[1]);
    let mut second_led = false;
    for k in 0..report.times.len().min(s1.len()).min(s2.len()) {
        if s2[k] > s1[k] {
            second_led = true;
        } else if second_led && s1[k] > s2[k] {
            return Some(report.times[k]);
        }
    }
    None
}

/// Whether `ρ` changed by less than [`PLATEAU_TOLERANCE`] (relative) over
/// the last 10% of the recorded run.
pub fn plateaued(times: &[f64], rho: &[f64]) -> bool {
    let (Some(&t_end), Some(&r_end)) = (times.last(), rho.last()) else {
        return false;
    };
    let t_start = t_end - 0.1 * (t_end - times[0]);
    let k = times.iter().position(|&t| t >= t_start).unwrap_or(0);
    let window = &rho[k..];
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    r_end > 0.0 && (hi - lo) / r_end < PLATEAU_TOLERANCE
}

/// `‖n(· + shift)/ρ − p‖∞` over the eigen-grid nodes that fall inside the
/// density grid. `p` must be L1-normalized; `n` is interpolated linearly.
pub fn compare_profile_to_eigenvector(
    field: &DensityField,
    grid: &Grid,
    pair: &EigenPair,
    shift: f64,
) -> Result<f64, AnalysisError> {
    let h = pair.h();
    let dx = grid.dx();
    let ratio = h / dx;
    if (ratio - ratio.round()).abs() > 1e-6 && (1.0 / ratio - (1.0 / ratio).round()).abs() > 1e-6 {
        return Err(AnalysisError::GridMismatch(format!("spacings {dx} and {h}")));
    }
    let rho = field.mass(dx);
    if rho <= 0.0 {
        return Err(AnalysisError::ZeroMass);
    }
    let p = pair.normalized(crate::eigen::Normalization::L1);
    let mut worst = 0.0f64;
    for (x, pv) in p.xs.iter().zip(&p.vector) {
        let s = (x + shift - grid.origin()) / dx;
        if s < 0.0 || s > (grid.nodes() - 1) as f64 {
            continue;
        }
        let j = (s.floor() as usize).min(grid.nodes() - 2);
        let w = s - j as f64;
        let n = (1.0 - w) * field.values[j] + w * field.values[j + 1];
        worst = worst.max((n / rho - pv).abs());
    }
    Ok(worst)
}

/// `Σ a(x_k) p(x_k) h` for the L1-normalized drift-form eigenvector.
pub fn eigen_predicted_rho(pair: &EigenPair, growth: impl Fn(f64) -> f64) -> f64 {
    let p = pair.normalized(crate::eigen::Normalization::L1);
    p.h() * p.xs.iter().zip(&p.vector).map(|(x, v)| growth(*x) * v).sum::<f64>()
}
