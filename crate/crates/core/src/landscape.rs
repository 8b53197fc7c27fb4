//! Fitness landscapes, their maxima and curvature, lagged optima and the
//! persistence thresholds that follow from them.
//!
//! A landscape is a constant offset plus a sum of clamped polynomial bumps
//! `(h - (x - center)^k)^+` with `k = 2` or `k = 4`. This covers every
//! experiment we run and keeps first and second derivatives analytic.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance under which two lagged fitness values are a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

const ROOT_TOLERANCE: f64 = 1e-13;
const DEFAULT_SCAN_NODES: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("landscape has no bumps")]
    Empty,
    #[error("bump height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("non-finite parameter in landscape definition")]
    NonFinite,
    #[error("level {level} is never attained by the landscape")]
    NoLaggedOptimum { level: f64 },
    #[error("level {level} coincides with the landscape plateau; lagged optima are not isolated")]
    CriticalLevel { level: f64 },
    #[error("lagged-optimum root structure violated: {0}")]
    AssumptionViolated(String),
    #[error("shift velocities must satisfy c1 < 0 < c2, got c1 = {c1}, c2 = {c2}")]
    ShiftSigns { c1: f64, c2: f64 },
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("two-peak landscapes need exactly one bump per peak and zero offset")]
    NotSinglePeak,
    #[error("velocity kind does not match the environment")]
    VelocityMismatch,
}

/// One clamped polynomial bump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Bump {
    /// `(h - (x - center)^2)^+`
    QuadraticPlus { h: f64, center: f64 },
    /// `(h - (x - center)^4)^+`
    QuarticPlus { h: f64, center: f64 },
}

impl Bump {
    fn parts(&self) -> (f64, f64, i32) {
        match *self {
            Bump::QuadraticPlus { h, center } => (h, center, 2),
            Bump::QuarticPlus { h, center } => (h, center, 4),
        }
    }

    pub fn height(&self) -> f64 {
        self.parts().0
    }

    pub fn center(&self) -> f64 {
        self.parts().1
    }

    /// Half-width of the open interval where the bump is positive.
    pub fn half_width(&self) -> f64 {
        let (h, _, k) = self.parts();
        h.powf(1.0 / k as f64)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (h, c, k) = self.parts();
        (h - (x - c).powi(k)).max(0.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (h, c, k) = self.parts();
        let d = x - c;
        if h - d.powi(k) > 0.0 {
            -(k as f64) * d.powi(k - 1)
        } else {
            0.0
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (h, c, k) = self.parts();
        let d = x - c;
        if h - d.powi(k) > 0.0 {
            -((k * (k - 1)) as f64) * d.powi(k - 2)
        } else {
            0.0
        }
    }

    fn validate(&self) -> Result<(), LandscapeError> {
        let (h, c, _) = self.parts();
        if !h.is_finite() || !c.is_finite() {
            return Err(LandscapeError::NonFinite);
        }
        if h <= 0.0 {
            return Err(LandscapeError::NonPositiveHeight(h));
        }
        Ok(())
    }
}

/// A registered global maximum of a landscape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum {
    pub location: f64,
    pub curvature: f64,
}

/// A root of `a(x) = a_M - c^2/4` together with the sign of `a'` there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaggedOptimum {
    pub location: f64,
    pub slope_sign: Ordering,
}

/// Growth rate `a(x) = offset + sum of bumps`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessLandscape {
    bumps: Vec<Bump>,
    offset: f64,
    max_value: f64,
    maxima: Vec<Maximum>,
}

impl FitnessLandscape {
    pub fn new(bumps: Vec<Bump>, offset: f64) -> Result<Self, LandscapeError> {
        if bumps.is_empty() {
            return Err(LandscapeError::Empty);
        }
        if !offset.is_finite() {
            return Err(LandscapeError::NonFinite);
        }
        for b in &bumps {
            b.validate()?;
        }
        let mut land = FitnessLandscape {
            bumps,
            offset,
            max_value: f64::NEG_INFINITY,
            maxima: Vec::new(),
        };
        land.locate_maxima();
        Ok(land)
    }

    pub fn quadratic(h: f64, center: f64) -> Result<Self, LandscapeError> {
        Self::new(vec![Bump::QuadraticPlus { h, center }], 0.0)
    }

    pub fn quartic(h: f64, center: f64) -> Result<Self, LandscapeError> {
        Self::new(vec![Bump::QuarticPlus { h, center }], 0.0)
    }

    /// The same landscape shifted by a constant.
    pub fn with_offset(&self, offset: f64) -> Result<Self, LandscapeError> {
        Self::new(self.bumps.clone(), offset)
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn value(&self, x: f64) -> f64 {
        self.offset + self.bumps.iter().map(|b| b.value(x)).sum::<f64>()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.derivative(x)).sum()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.second_derivative(x)).sum()
    }

    /// `a_M`
    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    /// Registered global maxima, ascending.
    pub fn maxima(&self) -> &[Maximum] {
        &self.maxima
    }

    /// `sup |a|`
    pub fn sup_abs(&self) -> f64 {
        self.max_value.abs().max(self.offset.abs())
    }

    /// Closed interval outside of which `a` equals its offset.
    pub fn support_hull(&self) -> (f64, f64) {
        self.bumps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            (
                lo.min(b.center() - b.half_width()),
                hi.max(b.center() + b.half_width()),
            )
        })
    }

    /// Radius `R_0` such that `a(x) = offset` for `|x| > R_0`.
    pub fn negativity_radius(&self) -> f64 {
        let (lo, hi) = self.support_hull();
        lo.abs().max(hi.abs())
    }

    /// The floor `delta > 0` with `a(x) < -delta` far away, when one exists.
    /// Any `delta` below `-offset` works; we report `-offset` itself.
    pub fn decay_floor(&self) -> Option<f64> {
        (self.offset < 0.0).then_some(-self.offset)
    }

    fn locate_maxima(&mut self) {
        let (lo, hi) = self.support_hull();
        let mut candidates: Vec<f64> = self.bumps.iter().map(|b| b.center()).collect();
        // critical points of overlapping bumps: sign change + to - of a'
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let mut prev_x = lo;
        let mut prev_d = self.derivative(lo);
        for k in 1..=n {
            let x = lo + k as f64 * step;
            let d = self.derivative(x);
            if prev_d > 0.0 && d < 0.0 {
                if let Some(r) = bisect(|y| self.derivative(y), prev_x, x) {
                    candidates.push(r);
                }
            }
            prev_x = x;
            prev_d = d;
        }
        let a_m = candidates
            .iter()
            .map(|&x| self.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * a_m.abs().max(1.0);
        let mut locs: Vec<f64> = candidates
            .into_iter()
            .filter(|&x| self.value(x) >= a_m - tol)
            .collect();
        locs.sort_by(|a, b| a.total_cmp(b));
        locs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        self.max_value = a_m;
        self.maxima = locs
            .into_iter()
            .map(|x| Maximum {
                location: x,
                curvature: self.second_derivative(x),
            })
            .collect();
    }

    /// All roots of `a(x) = a_M - c^2/4`, each with the sign of `a'`.
    pub fn lagged_optima(&self, c: f64) -> Result<Vec<LaggedOptimum>, LandscapeError> {
        self.lagged_optima_with_scan(c, DEFAULT_SCAN_NODES)
    }

    pub fn lagged_optima_with_scan(
        &self,
        c: f64,
        scan_nodes: usize,
    ) -> Result<Vec<LaggedOptimum>, LandscapeError> {
        if c == 0.0 {
            return Ok(self
                .maxima
                .iter()
                .map(|m| LaggedOptimum {
                    location: m.location,
                    slope_sign: Ordering::Equal,
                })
                .collect());
        }
        let level = self.max_value - c * c / 4.0;
        let plateau_tol = 1e-12 * level.abs().max(1.0);
        if (self.offset - level).abs() <= plateau_tol {
            return Err(LandscapeError::CriticalLevel { level });
        }
        if self.offset > level {
            return Err(LandscapeError::NoLaggedOptimum { level });
        }
        let (lo, hi) = self.support_hull();
        let (lo, hi) = (lo - 1.0, hi + 1.0);
        let f = |x: f64| self.value(x) - level;
        let n = scan_nodes.max(16);
        let step = (hi - lo) / n as f64;
        let mut roots = Vec::new();
        let mut prev_x = lo;
        let mut prev_f = f(lo);
        for k in 1..=n {
            let x = lo + k as f64 * step;
            let fx = f(x);
            if fx == 0.0 {
                roots.push(x);
            } else if prev_f != 0.0 && prev_f.signum() != fx.signum() {
                if let Some(r) = bisect(f, prev_x, x) {
                    roots.push(r);
                }
            }
            prev_x = x;
            prev_f = fx;
        }
        if roots.is_empty() {
            return Err(LandscapeError::NoLaggedOptimum { level });
        }
        self.check_root_structure(&roots)?;
        Ok(roots
            .into_iter()
            .map(|x| LaggedOptimum {
                location: x,
                slope_sign: self.derivative(x).partial_cmp(&0.0).unwrap_or(Ordering::Equal),
            })
            .collect())
    }

    // one root left of the first maximum, one right of the last, two in between
    fn check_root_structure(&self, roots: &[f64]) -> Result<(), LandscapeError> {
        let locs: Vec<f64> = self.maxima.iter().map(|m| m.location).collect();
        let count = |lo: f64, hi: f64| roots.iter().filter(|&&r| r > lo && r < hi).count();
        let first = locs[0];
        let last = *locs.last().unwrap();
        let left = count(f64::NEG_INFINITY, first);
        let right = count(last, f64::INFINITY);
        if left != 1 || right != 1 {
            return Err(LandscapeError::AssumptionViolated(format!(
                "expected one root outside the outermost maxima, found {left} left and {right} right"
            )));
        }
        for w in locs.windows(2) {
            let inner = count(w[0], w[1]);
            if inner != 2 {
                return Err(LandscapeError::AssumptionViolated(format!(
                    "expected two roots in ({}, {}), found {inner}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Lagged optima a population tracking this landscape at speed `c` can
    /// settle on: the roots trailing the motion, i.e. `sign a'(x) = sign c`.
    pub fn concentration_candidates(&self, c: f64) -> Result<Vec<f64>, LandscapeError> {
        let want = 0.0f64.partial_cmp(&-c).unwrap_or(Ordering::Equal);
        Ok(self
            .lagged_optima(c)?
            .into_iter()
            .filter(|o| c == 0.0 || o.slope_sign == want)
            .map(|o| o.location)
            .collect())
    }

    /// `a_M - c^2/4`; the population persists for small `epsilon` iff positive.
    pub fn persistence_threshold(&self, c: f64) -> f64 {
        self.max_value - c * c / 4.0
    }

    /// Maxima minimising `|a''|`; ties within relative 1e-9 are all kept.
    pub fn shallowest_peaks(&self) -> Vec<f64> {
        let best = self
            .maxima
            .iter()
            .map(|m| m.curvature.abs())
            .fold(f64::INFINITY, f64::min);
        let tol = TIE_TOLERANCE * best.max(1.0);
        self.maxima
            .iter()
            .filter(|m| m.curvature.abs() <= best + tol)
            .map(|m| m.location)
            .collect()
    }
}

/// Bisection on a bracketing interval, refined to an absolute width of 1e-13.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOLERANCE * mid.abs().max(1.0) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `a_1(x - eps c_1 t) + a_2(x - eps c_2 t) - delta`
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPeakLandscape {
    pub a1: FitnessLandscape,
    pub a2: FitnessLandscape,
    pub delta: f64,
}

impl TwoPeakLandscape {
    pub fn new(a1: FitnessLandscape, a2: FitnessLandscape, delta: f64) -> Result<Self, LandscapeError> {
        for a in [&a1, &a2] {
            if a.bumps().len() != 1 || a.offset() != 0.0 || a.maxima().len() != 1 {
                return Err(LandscapeError::NotSinglePeak);
            }
        }
        if !delta.is_finite() {
            return Err(LandscapeError::NonFinite);
        }
        Ok(TwoPeakLandscape { a1, a2, delta })
    }

    pub fn peak(&self, i: usize) -> &FitnessLandscape {
        if i == 0 {
            &self.a1
        } else {
            &self.a2
        }
    }

    pub fn value(&self, x: f64, t: f64, eps: f64, c1: f64, c2: f64) -> f64 {
        self.a1.value(x - eps * c1 * t) + self.a2.value(x - eps * c2 * t) - self.delta
    }

    /// `max_{x,t} |a_1 + a_2 - delta|` bound.
    pub fn sup_abs(&self) -> f64 {
        (self.a1.max_value() + self.a2.max_value() - self.delta)
            .abs()
            .max(self.delta.abs())
    }

    /// Lagged optimum of peak `i` at speed `c`, on the trailing side.
    pub fn lagged_optimum(&self, i: usize, c: f64) -> Result<f64, LandscapeError> {
        let cands = self.peak(i).concentration_candidates(c)?;
        cands
            .first()
            .copied()
            .ok_or(LandscapeError::NoLaggedOptimum {
                level: self.peak(i).persistence_threshold(c),
            })
    }

    pub fn lagged_fitness(&self, c1: f64, c2: f64) -> LaggedFitness {
        let f1 = self.a1.max_value() - c1 * c1 / 4.0 - self.delta;
        let f2 = self.a2.max_value() - c2 * c2 / 4.0 - self.delta;
        LaggedFitness::new(f1, f2)
    }
}

/// `F_i = a_{i,M} - c_i^2/4 - delta`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaggedFitness {
    pub f1: f64,
    pub f2: f64,
}

impl LaggedFitness {
    pub fn new(f1: f64, f2: f64) -> Self {
        LaggedFitness { f1, f2 }
    }

    pub fn tie(&self) -> bool {
        let scale = self.f1.abs().max(self.f2.abs()).max(1.0);
        (self.f1 - self.f2).abs() < TIE_TOLERANCE * scale
    }

    /// Index (0 or 1) of the larger lagged fitness; `None` on a tie.
    pub fn dominant(&self) -> Option<usize> {
        if self.tie() {
            None
        } else if self.f1 > self.f2 {
            Some(0)
        } else {
            Some(1)
        }
    }

    pub fn extinct(&self) -> bool {
        self.f1 <= 0.0 && self.f2 <= 0.0
    }
}

/// Shift velocities, in units where the optima move at `eps * c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Velocities {
    Single(f64),
    Pair { c1: f64, c2: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftSpec {
    pub epsilon: f64,
    pub velocities: Velocities,
}

impl ShiftSpec {
    pub fn single(epsilon: f64, c: f64) -> Result<Self, LandscapeError> {
        Self::validate_eps(epsilon)?;
        if !c.is_finite() {
            return Err(LandscapeError::NonFinite);
        }
        Ok(ShiftSpec {
            epsilon,
            velocities: Velocities::Single(c),
        })
    }

    pub fn pair(epsilon: f64, c1: f64, c2: f64) -> Result<Self, LandscapeError> {
        Self::validate_eps(epsilon)?;
        if !(c1 < 0.0 && 0.0 < c2) {
            return Err(LandscapeError::ShiftSigns { c1, c2 });
        }
        Ok(ShiftSpec {
            epsilon,
            velocities: Velocities::Pair { c1, c2 },
        })
    }

    fn validate_eps(epsilon: f64) -> Result<(), LandscapeError> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(())
        } else {
            Err(LandscapeError::BadEpsilon(epsilon))
        }
    }

    /// `C = c_2 - c_1` for the two-speed case.
    pub fn separation_speed(&self) -> Option<f64> {
        match self.velocities {
            Velocities::Pair { c1, c2 } => Some(c2 - c1),
            Velocities::Single(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Environment {
    SingleSpeed(FitnessLandscape),
    TwoSpeed(TwoPeakLandscape),
}

/// A point moving at constant velocity, tracked for mass shares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackedPoint {
    pub origin: f64,
    pub velocity: f64,
}

impl TrackedPoint {
    pub fn at(&self, t: f64) -> f64 {
        self.origin + self.velocity * t
    }
}

/// Environment plus shift: everything the solvers need to evaluate growth.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub environment: Environment,
    pub shift: ShiftSpec,
}

impl Model {
    pub fn new(environment: Environment, shift: ShiftSpec) -> Result<Self, LandscapeError> {
        match (&environment, shift.velocities) {
            (Environment::SingleSpeed(_), Velocities::Single(_))
            | (Environment::TwoSpeed(_), Velocities::Pair { .. }) => Ok(Model { environment, shift }),
            _ => Err(LandscapeError::VelocityMismatch),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.shift.epsilon
    }

    /// Growth rate in the lab frame at `(x, t)`.
    pub fn growth(&self, x: f64, t: f64) -> f64 {
        let eps = self.shift.epsilon;
        match (&self.environment, self.shift.velocities) {
            (Environment::SingleSpeed(a), Velocities::Single(c)) => a.value(x - eps * c * t),
            (Environment::TwoSpeed(tp), Velocities::Pair { c1, c2 }) => tp.value(x, t, eps, c1, c2),
            _ => unreachable!("validated in Model::new"),
        }
    }

    pub fn sup_abs_growth(&self) -> f64 {
        match &self.environment {
            Environment::SingleSpeed(a) => a.sup_abs(),
            Environment::TwoSpeed(tp) => tp.sup_abs(),
        }
    }

    /// Moving lagged optima: the concentration candidates in the
    /// single-speed case, `x̄_i + eps c_i t` in the two-speed case.
    pub fn tracked_points(&self) -> Result<Vec<TrackedPoint>, LandscapeError> {
        let eps = self.shift.epsilon;
        match (&self.environment, self.shift.velocities) {
            (Environment::SingleSpeed(a), Velocities::Single(c)) => Ok(a
                .concentration_candidates(c)?
                .into_iter()
                .map(|x| TrackedPoint {
                    origin: x,
                    velocity: eps * c,
                })
                .collect()),
            (Environment::TwoSpeed(tp), Velocities::Pair { c1, c2 }) => Ok(vec![
                TrackedPoint {
                    origin: tp.lagged_optimum(0, c1)?,
                    velocity: eps * c1,
                },
                TrackedPoint {
                    origin: tp.lagged_optimum(1, c2)?,
                    velocity: eps * c2,
                },
            ]),
            _ => unreachable!("validated in Model::new"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> FitnessLandscape {
        FitnessLandscape::new(
            vec![
                Bump::QuarticPlus { h: 2.5, center: 35.0 },
                Bump::QuadraticPlus { h: 2.5, center: 40.0 },
            ],
            0.5,
        )
        .unwrap()
    }

    // brute-force oracle: dense scan for sign changes, refined by halving
    fn oracle_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
        let n = 1_000_000;
        let h = (hi - lo) / n as f64;
        let mut out = Vec::new();
        for k in 0..n {
            let (mut a, mut b) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
            if f(a).signum() != f(b).signum() {
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if f(m).signum() == f(a).signum() {
                        a = m
                    } else {
                        b = m
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        out
    }

    #[test]
    fn quadratic_lagged_optima() {
        let a = FitnessLandscape::quadratic(2.5, 40.0).unwrap();
        let roots = a.lagged_optima(1.0).unwrap();
        let oracle = oracle_roots(|x| a.value(x) - 2.25, 30.0, 50.0);
        assert_eq!(roots.len(), 2);
        assert_eq!(oracle.len(), 2);
        for (r, o) in roots.iter().zip(&oracle) {
            assert!((r.location - o).abs() < 1e-10);
        }
        assert!((roots[0].location - 39.5).abs() < 1e-10);
        assert!((roots[1].location - 40.5).abs() < 1e-10);
        assert_eq!(roots[0].slope_sign, Ordering::Greater);
        assert_eq!(a.concentration_candidates(1.0).unwrap(), vec![roots[0].location]);
    }

    #[test]
    fn quartic_lagged_optimum() {
        let a = FitnessLandscape::quartic(2.5, 35.0).unwrap();
        let cand = a.concentration_candidates(1.0).unwrap();
        let oracle = oracle_roots(|x| a.value(x) - 2.25, 30.0, 35.0);
        assert_eq!(cand.len(), 1);
        assert!((cand[0] - oracle[0]).abs() < 1e-10);
        assert!((cand[0] - 34.292_893_218_813_45).abs() < 1e-10);
    }

    #[test]
    fn zero_speed_returns_maxima() {
        let a = fig1();
        let lo = a.lagged_optima(0.0).unwrap();
        let locs: Vec<f64> = lo.iter().map(|o| o.location).collect();
        assert_eq!(locs.len(), 2);
        assert!((locs[0] - 35.0).abs() < 1e-10);
        assert!((locs[1] - 40.0).abs() < 1e-10);
    }

    #[test]
    fn fig1_candidates_and_shallowest() {
        let a = fig1();
        assert!((a.max_value() - 3.0).abs() < 1e-14);
        let cands = a.concentration_candidates(1.0).unwrap();
        assert_eq!(cands.len(), 2);
        assert!((cands[0] - (35.0 - 0.25f64.powf(0.25))).abs() < 1e-10);
        assert!((cands[1] - 39.5).abs() < 1e-10);
        assert_eq!(a.shallowest_peaks(), vec![a.maxima()[0].location]);
        assert!(a.maxima()[0].curvature.abs() < 1e-12);
        assert!((a.maxima()[1].curvature + 2.0).abs() < 1e-12);
    }

    #[test]
    fn congruent_parabolas_tie() {
        let a = FitnessLandscape::new(
            vec![
                Bump::QuadraticPlus { h: 1.0, center: 10.0 },
                Bump::QuadraticPlus { h: 1.0, center: 20.0 },
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(a.shallowest_peaks().len(), 2);
        let single = FitnessLandscape::quadratic(1.0, 3.0).unwrap();
        assert_eq!(single.shallowest_peaks(), vec![3.0]);
    }

    #[test]
    fn thresholds() {
        let a = FitnessLandscape::quadratic(2.5, 40.0).unwrap();
        assert_eq!(a.persistence_threshold(1.0), 2.25);
        assert!(a.persistence_threshold(10f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.persistence_threshold(0.0), 2.5);
    }

    #[test]
    fn critical_and_unattained_levels() {
        let a = FitnessLandscape::quadratic(2.5, 40.0).unwrap();
        assert!(matches!(
            a.lagged_optima(10f64.sqrt()),
            Err(LandscapeError::CriticalLevel { .. })
        ));
        assert!(matches!(
            a.lagged_optima(4.0),
            Err(LandscapeError::NoLaggedOptimum { .. })
        ));
    }

    #[test]
    fn merged_peaks_violate_root_structure() {
        // two maxima whose valley stays above the level
        let a = FitnessLandscape::new(
            vec![
                Bump::QuadraticPlus { h: 4.0, center: 0.0 },
                Bump::QuadraticPlus { h: 4.0, center: 2.0 },
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(a.maxima().len(), 1);
        // a lower bump between two maxima pokes above the level: four roots
        let b = FitnessLandscape::new(
            vec![
                Bump::QuadraticPlus { h: 1.0, center: 0.0 },
                Bump::QuadraticPlus { h: 0.97, center: 2.0 },
                Bump::QuadraticPlus { h: 1.0, center: 4.0 },
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(b.maxima().len(), 2);
        assert!(matches!(
            b.lagged_optima(0.5),
            Err(LandscapeError::AssumptionViolated(_))
        ));
    }

    #[test]
    fn two_peak_fitness() {
        let tp = TwoPeakLandscape::new(
            FitnessLandscape::quadratic(1.75, 32.0).unwrap(),
            FitnessLandscape::quadratic(2.5, 48.0).unwrap(),
            -0.5,
        )
        .unwrap();
        let f = tp.lagged_fitness(-1.0, 2.5);
        assert!((f.f1 - 2.0).abs() < 1e-15);
        assert!((f.f2 - 1.4375).abs() < 1e-15);
        assert_eq!(f.dominant(), Some(0));
        let g = tp.lagged_fitness(-1.0, 1.0);
        assert!((g.f2 - 2.75).abs() < 1e-15);
        assert_eq!(g.dominant(), Some(1));
        let tp0 = TwoPeakLandscape { delta: 0.0, ..tp.clone() };
        let h = tp0.lagged_fitness(0.0, 0.0);
        assert_eq!((h.f1, h.f2), (1.75, 2.5));
        // trailing sides: right of x1 for c1 < 0, left of x2 for c2 > 0
        assert!((tp.lagged_optimum(0, -1.0).unwrap() - 32.5).abs() < 1e-10);
        assert!((tp.lagged_optimum(1, 2.5).unwrap() - 46.75).abs() < 1e-10);
        assert!(LaggedFitness::new(1.0, 1.0 + 1e-12).tie());
        assert!(LaggedFitness::new(-0.1, -2.0).extinct());
    }

    #[test]
    fn shift_sign_constraint() {
        assert!(ShiftSpec::pair(0.1, 1.0, 2.0).is_err());
        assert!(ShiftSpec::pair(0.1, -1.0, 2.0).is_ok());
        assert!(ShiftSpec::single(0.0, 1.0).is_err());
    }

    #[test]
    fn continuity_across_kinks() {
        let a = fig1();
        for b in a.bumps() {
            let w = b.half_width();
            for edge in [b.center() - w, b.center() + w] {
                let l = a.value(edge - 1e-13);
                let r = a.value(edge + 1e-13);
                assert!((l - r).abs() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {

            #![proptest_config(crate::test_support::seeded())]
            #[test]
            fn roots_lie_on_level(h in 0.5f64..4.0, center in -20.0f64..20.0, c in 0.05f64..2.0) {
                let a = FitnessLandscape::quadratic(h, center).unwrap();
                prop_assume!(c * c / 4.0 < h * 0.999);
                let level = a.max_value() - c * c / 4.0;
                for r in a.lagged_optima(c).unwrap() {
                    prop_assert!((a.value(r.location) - level).abs() < 1e-10);
                }
            }

            #[test]
            fn threshold_decreasing(h in 0.1f64..5.0, c in 0.01f64..5.0, dc in 0.001f64..1.0) {
                let a = FitnessLandscape::quartic(h, 0.0).unwrap();
                prop_assert!(a.persistence_threshold(c + dc) < a.persistence_threshold(c));
            }

            #[test]
            fn shallowest_ignores_offset(k in -3.0f64..3.0) {
                let base = FitnessLandscape::new(vec![
                    Bump::QuarticPlus { h: 2.5, center: 35.0 },
                    Bump::QuadraticPlus { h: 2.5, center: 40.0 },
                ], 0.0).unwrap();
                let shifted = base.with_offset(k).unwrap();
                prop_assert_eq!(base.shallowest_peaks(), shifted.shallowest_peaks());
            }
        }
    }
}
