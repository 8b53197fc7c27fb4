//! Principal eigenpairs of `−ε² ∂xx − ε c ∂x − a(x)` on a ball with zero
//! Dirichlet data.
//!
//! The drift is removed by the substitution `p = P e^{−c x / 2ε}`, which
//! turns the problem into the self-adjoint one
//!
//! ```text
//! −ε² P'' − (a(x) − c²/4) P = λ P.
//! ```
//!
//! We discretize the self-adjoint form with the three-point Laplacian and
//! solve it by inverse iteration (fixed shift below the spectrum, then a few
//! Rayleigh-shifted sweeps). The drift-form vector is recovered nodewise, so
//! the discrete drift operator is `W S W⁻¹` with `W = diag(e^{−c x_k/2ε})`,
//! exactly similar to the symmetric matrix `S`. Weights are handled in log
//! space; entries whose value underflows are stored as zero.

use serde::Serialize;
use thiserror::Error;

use crate::landscape::FitnessLandscape;

pub const MAX_ITERATIONS: usize = 10_000;
pub const EIGENVALUE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("inverse iteration did not converge in {0} iterations")]
    IterationDiverged(usize),
    #[error("principal eigenvector has a negative entry {value} at node {node}")]
    NotPositive { node: usize, value: f64 },
    #[error("need at least 16 interior nodes, got {0}")]
    TooFewNodes(usize),
    #[error("epsilon and radius must be positive")]
    BadParameters,
    #[error("vector must vanish at the boundary nodes")]
    BoundaryNotZero,
    #[error("zero vector")]
    ZeroVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("singular pivot in tridiagonal solve")]
    SingularPivot,
}

/// Ball `(center − R, center + R)` with `N` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenDomain {
    pub center: f64,
    pub radius: f64,
    pub interior: usize,
}

impl EigenDomain {
    pub fn with_nodes(center: f64, radius: f64, interior: usize) -> Result<Self, EigenError> {
        if !(radius > 0.0) || !center.is_finite() {
            return Err(EigenError::BadParameters);
        }
        if interior < 16 {
            return Err(EigenError::TooFewNodes(interior));
        }
        Ok(EigenDomain {
            center,
            radius,
            interior,
        })
    }

    /// Spacing as close to `h` as `2R/h` being an integer allows. Domains
    /// sharing `center` and `h` have nested node sets.
    pub fn with_spacing(center: f64, radius: f64, h: f64) -> Result<Self, EigenError> {
        if !(h > 0.0) {
            return Err(EigenError::BadParameters);
        }
        let cells = (2.0 * radius / h).round() as usize;
        Self::with_nodes(center, radius, cells.saturating_sub(1))
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / (self.interior + 1) as f64
    }

    /// All `N + 2` nodes including the two boundary nodes.
    pub fn xs(&self) -> Vec<f64> {
        let h = self.h();
        let lo = self.center - self.radius;
        (0..self.interior + 2).map(|k| lo + k as f64 * h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Normalization {
    /// `Σ p dx = 1`
    L1,
    /// `max p = 1`
    Linf,
}

/// Principal eigenpair; vectors include the two zero boundary nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub xs: Vec<f64>,
    /// Drift-form eigenvector `p`.
    pub vector: Vec<f64>,
    /// Self-adjoint eigenvector `P`, L∞-normalized.
    pub symmetric: Vec<f64>,
    pub radius: f64,
    pub eps: f64,
    pub drift: f64,
    pub normalization: Normalization,
    pub iterations: usize,
    /// Diagonal (`2ε²/h² − a + c²/4`) and off-diagonal (`−ε²/h²`) of `S`.
    pub diag: Vec<f64>,
    pub off: f64,
}

impl EigenPair {
    pub fn h(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.vector)
    }

    /// Same eigenvector rescaled.
    pub fn normalized(&self, norm: Normalization) -> EigenPair {
        let mut out = self.clone();
        out.vector = normalize(&self.vector, self.h(), norm);
        out.normalization = norm;
        out
    }

    /// `‖S P − λ P‖∞ / ‖P‖∞` on the self-adjoint form.
    pub fn symmetric_residual(&self) -> f64 {
        let inner = &self.symmetric[1..self.symmetric.len() - 1];
        let r = tridiag_apply(&self.diag, self.off, inner);
        let scale = inner.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        r.iter()
            .zip(inner)
            .map(|(r, v)| (r - self.lambda * v).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// `‖A p − λ p‖∞ / ‖p‖∞` with `A = W S W⁻¹` the discrete drift operator.
    pub fn drift_residual(&self) -> f64 {
        let inner = &self.vector[1..self.vector.len() - 1];
        let ratio = (self.drift * self.h() / (2.0 * self.eps)).exp();
        let n = inner.len();
        let scale = inner.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for k in 0..n {
            let mut ap = self.diag[k] * inner[k];
            if k + 1 < n {
                ap += self.off * ratio * inner[k + 1];
            }
            if k > 0 {
                ap += self.off / ratio * inner[k - 1];
            }
            worst = worst.max((ap - self.lambda * inner[k]).abs());
        }
        worst / scale
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn normalize(v: &[f64], h: f64, norm: Normalization) -> Vec<f64> {
    let s = match norm {
        Normalization::L1 => h * v.iter().map(|x| x.abs()).sum::<f64>(),
        Normalization::Linf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    };
    v.iter().map(|x| x / s).collect()
}

fn tridiag_apply(diag: &[f64], off: f64, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            let mut s = diag[k] * v[k];
            if k > 0 {
                s += off * v[k - 1];
            }
            if k + 1 < n {
                s += off * v[k + 1];
            }
            s
        })
        .collect()
}

/// Solves `(S − μ I) x = b` for symmetric tridiagonal `S` (Thomas algorithm).
pub fn tridiag_solve(diag: &[f64], off: f64, mu: f64, b: &[f64]) -> Result<Vec<f64>, EigenError> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = diag[0] - mu;
    if denom == 0.0 {
        return Err(EigenError::SingularPivot);
    }
    cp[0] = off / denom;
    dp[0] = b[0] / denom;
    for k in 1..n {
        denom = diag[k] - mu - off * cp[k - 1];
        if denom == 0.0 {
            return Err(EigenError::SingularPivot);
        }
        cp[k] = off / denom;
        dp[k] = (b[k] - off * dp[k - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = dp[k] - cp[k] * x[k + 1];
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest eigenvalue and its positive eigenvector of the symmetric
/// tridiagonal matrix `(diag, off)`, `off < 0`.
pub fn smallest_eigenpair(diag: &[f64], off: f64) -> Result<(f64, Vec<f64>, usize), EigenError> {
    let n = diag.len();
    let norm = |v: &mut Vec<f64>| {
        let s = dot(v, v).sqrt();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
    };
    // Gershgorin bound below the spectrum
    let mu0 = diag.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * off.abs() - 1.0;
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + 2.0 * off.abs();
    let mut v = vec![1.0; n];
    norm(&mut v);
    let mut lambda = dot(&v, &tridiag_apply(diag, off, &v));
    let mut iters = 0;
    let mut converged = false;
    while iters < MAX_ITERATIONS {
        iters += 1;
        let mut w = tridiag_solve(diag, off, mu0, &v)?;
        norm(&mut w);
        let next = dot(&w, &tridiag_apply(diag, off, &w));
        v = w;
        let delta = (next - lambda).abs();
        lambda = next;
        if delta < EIGENVALUE_TOLERANCE * lambda.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EigenError::IterationDiverged(iters));
    }
    // Rayleigh-shifted refinement. The shift stays below λ_min by the
    // residual norm (Krylov–Weinstein), so the shifted matrix remains an
    // M-matrix and the iterates stay positive.
    for _ in 0..8 {
        let av = tridiag_apply(diag, off, &v);
        let rq = dot(&v, &av);
        let res: f64 = av
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - rq * x).powi(2))
            .sum::<f64>()
            .sqrt();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if res <= 1e-14 * scale * vmax {
            break;
        }
        let mu = rq - res.max(1e-13 * scale) * 1.01;
        let mut w = tridiag_solve(diag, off, mu, &v)?;
        norm(&mut w);
        v = w;
        iters += 1;
    }
    let av = tridiag_apply(diag, off, &v);
    lambda = dot(&v, &av);
    Ok((lambda, v, iters))
}

/// Principal eigenpair of `−ε² ∂xx − ε c ∂x − a` on `domain`.
pub fn principal_eigenpair(
    growth: impl Fn(f64) -> f64,
    drift: f64,
    eps: f64,
    domain: &EigenDomain,
) -> Result<EigenPair, EigenError> {
    if !(eps > 0.0) || !drift.is_finite() {
        return Err(EigenError::BadParameters);
    }
    let xs = domain.xs();
    let h = domain.h();
    let n = domain.interior;
    let k = eps * eps / (h * h);
    let diag: Vec<f64> = xs[1..=n]
        .iter()
        .map(|&x| 2.0 * k - (growth(x) - 0.25 * drift * drift))
        .collect();
    let off = -k;
    let (lambda, v, iterations) = smallest_eigenpair(&diag, off)?;

    // Perron vector: all one sign up to rounding
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (i, x) in v.iter().enumerate() {
        if sign * x < -1e-12 * vmax {
            return Err(EigenError::NotPositive {
                node: i + 1,
                value: sign * x,
            });
        }
    }
    let peak = argmax(&v.iter().map(|x| sign * x).collect::<Vec<_>>());
    // Tail entries of the iterate carry absolute, not relative, rounding
    // error; the drift weight amplifies them, so rebuild the vector in log
    // space from the two-sided recurrence.
    let log_sym: Vec<f64> = match log_eigenvector(&diag, off, lambda, peak) {
        Some(l) => l,
        None => v
            .iter()
            .map(|x| if sign * x > 0.0 { (sign * x / vmax).ln() } else { f64::NEG_INFINITY })
            .collect(),
    };
    let mut log_full = vec![f64::NEG_INFINITY; n + 2];
    log_full[1..=n].copy_from_slice(&log_sym);
    let top = log_full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sym: Vec<f64> = log_full.iter().map(|l| (l - top).exp()).collect();

    let vector = drift_form(&log_full, &xs, drift, eps, h);
    Ok(EigenPair {
        lambda,
        xs,
        vector,
        symmetric: sym,
        radius: domain.radius,
        eps,
        drift,
        normalization: Normalization::L1,
        iterations,
        diag,
        off,
    })
}

/// `p = P e^{−c x/2ε}` from `log P`, L1-normalized.
fn drift_form(log_sym: &[f64], xs: &[f64], c: f64, eps: f64, h: f64) -> Vec<f64> {
    let logs: Vec<f64> = log_sym.iter().zip(xs).map(|(l, x)| l - c * x / (2.0 * eps)).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    normalize(&raw, h, Normalization::L1)
}

/// `log P` of the eigenvector of `(diag, off)` for `lambda`, scaled so that
/// `P[peak] = 1`. Ratios `P[i±1]/P[i]` are accumulated inward from each
/// end, the direction in which the recurrence is stable. `None` if a ratio
/// is not positive.
fn log_eigenvector(diag: &[f64], off: f64, lambda: f64, peak: usize) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut out = vec![0.0; n];
    // left: t = P[i-1]/P[i]
    let mut t = 0.0;
    let mut up = vec![0.0; peak];
    for i in 0..peak {
        let r = -((diag[i] - lambda) + off * t) / off;
        if !(r > 0.0) || !r.is_finite() {
            return None;
        }
        up[i] = r.ln();
        t = 1.0 / r;
    }
    let mut acc = 0.0;
    for i in (0..peak).rev() {
        acc -= up[i];
        out[i] = acc;
    }
    // right: s = P[i+1]/P[i]
    let mut s = 0.0;
    let mut down = vec![0.0; n];
    for i in (peak + 1..n).rev() {
        let r = -((diag[i] - lambda) + off * s) / off;
        if !(r > 0.0) || !r.is_finite() {
            return None;
        }
        down[i] = r.ln();
        s = 1.0 / r;
    }
    let mut acc = 0.0;
    for i in peak + 1..n {
        acc -= down[i];
        out[i] = acc;
    }
    Some(out)
}

/// Discrete Rayleigh quotient
/// `(ε² Σ |D⁺v|² dx − Σ potential v² dx) / Σ v² dx`.
pub fn rayleigh_quotient(
    vec: &[f64],
    potential: impl Fn(f64) -> f64,
    eps: f64,
    xs: &[f64],
) -> Result<f64, EigenError> {
    if vec.len() != xs.len() {
        return Err(EigenError::LengthMismatch(vec.len(), xs.len()));
    }
    let n = vec.len();
    let vmax = vec.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return Err(EigenError::ZeroVector);
    }
    if vec[0].abs() > 1e-14 * vmax || vec[n - 1].abs() > 1e-14 * vmax {
        return Err(EigenError::BoundaryNotZero);
    }
    let h = xs[1] - xs[0];
    let grad: f64 = vec.windows(2).map(|w| ((w[1] - w[0]) / h).powi(2)).sum::<f64>() * h;
    let pot: f64 = vec.iter().zip(xs).map(|(v, x)| potential(*x) * v * v).sum::<f64>() * h;
    let mass: f64 = vec.iter().map(|v| v * v).sum::<f64>() * h;
    Ok((eps * eps * grad - pot) / mass)
}

/// Exponential envelope rates around the principal eigenvector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayEnvelope {
    pub kappa_lower: f64,
    pub kappa_upper: f64,
    /// Location of the maximum of the L∞-normalized vector.
    pub anchor: f64,
}

impl DecayEnvelope {
    /// `κ̲ = c/2`, `κ̄ = (−c + √(2c² + 4δ))/2`.
    pub fn new(c: f64, delta_floor: f64, anchor: f64) -> Self {
        DecayEnvelope {
            kappa_lower: 0.5 * c,
            kappa_upper: 0.5 * (-c + (2.0 * c * c + 4.0 * delta_floor).sqrt()),
            anchor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub checked_nodes: usize,
    pub lower_violations: Vec<f64>,
    pub upper_violations: Vec<f64>,
    /// Largest `log(bound) − log(p)` over lower-bound violations (in units of 1/ε).
    pub worst_lower_gap: f64,
}

impl EnvelopeReport {
    pub fn violations(&self) -> usize {
        self.lower_violations.len() + self.upper_violations.len()
    }
}

/// Checks `e^{−κ̲|x−x_ε|/ε} ≤ p(x) ≤ min{1, e^{−κ̄(|x|−R₀)/ε}}` nodewise,
/// skipping `boundary_layer` nodes at each end. Comparisons are made in log
/// space so underflowed entries still count.
pub fn check_decay_envelope(
    pair: &EigenPair,
    env: &DecayEnvelope,
    r0: f64,
    boundary_layer: usize,
) -> EnvelopeReport {
    let p = pair.normalized(Normalization::Linf);
    let eps = pair.eps;
    let n = p.xs.len();
    let mut report = EnvelopeReport {
        checked_nodes: 0,
        lower_violations: Vec::new(),
        upper_violations: Vec::new(),
        worst_lower_gap: 0.0,
    };
    let rel = 1e-9;
    for i in boundary_layer..n.saturating_sub(boundary_layer) {
        let x = p.xs[i];
        let v = p.vector[i];
        let log_v = if v > 0.0 { v.ln() } else { f64::NEG_INFINITY };
        report.checked_nodes += 1;
        let log_lower = -env.kappa_lower * (x - env.anchor).abs() / eps;
        if log_v < log_lower - rel {
            report.lower_violations.push(x);
            let gap = if log_v.is_finite() { (log_lower - log_v) * eps } else { f64::INFINITY };
            report.worst_lower_gap = report.worst_lower_gap.max(gap);
        }
        let mut log_upper = 0.0;
        if x.abs() > r0 {
            log_upper = f64::min(0.0, -env.kappa_upper * (x.abs() - r0) / eps);
        }
        if log_v > log_upper + rel {
            report.upper_violations.push(x);
        }
    }
    report
}

/// `p̂ = p e^{c x/2ε} / ‖p e^{c x/2ε}‖_{L1}`, evaluated in log space.
pub fn weighted_rescale(pair: &EigenPair, c: f64, eps: f64) -> Vec<f64> {
    let logs: Vec<f64> = pair
        .vector
        .iter()
        .zip(&pair.xs)
        .map(|(p, x)| if *p > 0.0 { p.ln() + c * x / (2.0 * eps) } else { f64::NEG_INFINITY })
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    normalize(&raw, pair.h(), Normalization::L1)
}

/// `λ_{R,ε}` over a grid of `ε` (rows) and `R` (columns).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenTable {
    pub eps: Vec<f64>,
    pub radii: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    /// Per `ε`: whether `λ` is nonincreasing in `R` to 1e−10.
    pub monotone_in_r: Vec<bool>,
}

/// Solves on nested domains `center ± R` with a common spacing `h`.
pub fn eigenvalue_convergence_table(
    land: &FitnessLandscape,
    c: f64,
    eps_list: &[f64],
    r_list: &[f64],
    center: f64,
    h: f64,
) -> Result<EigenTable, EigenError> {
    if eps_list.is_empty() || r_list.is_empty() {
        return Err(EigenError::BadParameters);
    }
    let mut lambda = Vec::with_capacity(eps_list.len());
    let mut monotone = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let row: Vec<f64> = r_list
            .iter()
            .map(|&r| {
                let dom = EigenDomain::with_spacing(center, r, h)?;
                principal_eigenpair(|x| land.value(x), c, eps, &dom).map(|p| p.lambda)
            })
            .collect::<Result<_, _>>()?;
        monotone.push(row.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        lambda.push(row);
    }
    Ok(EigenTable {
        eps: eps_list.to_vec(),
        radii: r_list.to_vec(),
        lambda,
        monotone_in_r: monotone,
    })
}
