//! Asymptotic-preserving scheme for the log-density `ū = −ε log N` in the
//! co-moving, drift-free frame, and its `ε = 0` limit scheme.
//!
//! With `g(x) = a(x) − c²/4`, time `τ = ε t` and
//! `H(p, q) = max{H⁺(p), H⁻(q)}`, `H⁺(p) = (p⁺)²`, `H⁻(q) = (q⁻)²`, the
//! `ε > 0` scheme is
//!
//! ```text
//! ū_i^{n+1} = ū_i^n − dt [ H(D⁻ū_i − c/2, D⁺ū_i − c/2) − ε (ū_{i+1} − 2ū_i + ū_{i−1})/dx² + g_i − ρ_n ]
//! ρ_n       = dx Σ_i exp(−ū_i^n / ε)
//! ```
//!
//! and the limit scheme is
//!
//! ```text
//! v_i^{n+1} = v_i^n − dt [ H(D⁻v_i − c/2, D⁺v_i − c/2) + g_i − P_{n+1} ],   min_i v_i^{n+1} = 0.
//! ```
//!
//! The constraint fixes `P_{n+1}` as the root of
//! `J ↦ min_i { v_i − dt H_i − dt (g_i − J) }`, which is affine in `J`
//! with slope `dt`, so the root is available in closed form. A bisection
//! solver is kept for cross-checking.
//!
//! Outside the grid, fields are extended linearly from the two outermost
//! nodes, so one-sided slopes at the ends equal the adjacent interior slope
//! and the discrete Laplacian vanishes there.

use thiserror::Error;

use crate::fd::{DensityField, Grid};
use crate::landscape::FitnessLandscape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HjError {
    #[error("non-finite value at node {node} (step {step})")]
    NonFiniteValue { node: usize, step: usize },
    #[error("root of the pressure equation not bracketed")]
    RootNotBracketed,
    #[error("grids are not commensurate: {0}")]
    GridMismatch(String),
    #[error("time step and grid spacing must be positive")]
    BadStep,
    #[error("field length {field} does not match grid with {grid} nodes")]
    LengthMismatch { field: usize, grid: usize },
}

/// Godunov flux for `|p|²`.
pub fn godunov_h(p: f64, q: f64) -> f64 {
    let hp = if p > 0.0 { p * p } else { 0.0 };
    let hm = if q < 0.0 { q * q } else { 0.0 };
    hp.max(hm)
}

/// Nodal values of a log-density.
#[derive(Clone, Debug, PartialEq)]
pub struct LogField {
    pub values: Vec<f64>,
    pub step: usize,
}

impl LogField {
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        LogField {
            values: grid.xs().into_iter().map(f).collect(),
            step: 0,
        }
    }

    /// `ū = −ε log n` for a Gaussian `amp · exp(−(x − center)²/width²)`.
    pub fn log_gaussian(grid: &Grid, eps: f64, amp: f64, center: f64, width: f64) -> Self {
        Self::from_fn(grid, |x| -eps * (amp.ln() - (x - center).powi(2) / (width * width)))
    }

    /// The same field shifted so its minimum is zero.
    pub fn renormalized(&self) -> Self {
        let m = self.min();
        LogField {
            values: self.values.iter().map(|v| v - m).collect(),
            step: self.step,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `dx Σ exp(−ū_i/ε)`
    pub fn pressure(&self, dx: f64, eps: f64) -> f64 {
        dx * self.values.iter().map(|u| (-u / eps).exp()).sum::<f64>()
    }
}

// ghost-extended neighbours
fn neighbours(u: &[f64], i: usize) -> (f64, f64) {
    let n = u.len();
    let left = if i == 0 { 2.0 * u[0] - u[1] } else { u[i - 1] };
    let right = if i == n - 1 {
        2.0 * u[n - 1] - u[n - 2]
    } else {
        u[i + 1]
    };
    (left, right)
}

/// Godunov Hamiltonian at every node.
pub fn hamiltonian(u: &[f64], dx: f64, c: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let (l, r) = neighbours(u, i);
            godunov_h((u[i] - l) / dx - 0.5 * c, (r - u[i]) / dx - 0.5 * c)
        })
        .collect()
}

fn check(grid: &Grid, field: &LogField, dt: f64) -> Result<(), HjError> {
    if field.values.len() != grid.nodes() {
        return Err(HjError::LengthMismatch {
            field: field.values.len(),
            grid: grid.nodes(),
        });
    }
    if !(dt > 0.0) {
        return Err(HjError::BadStep);
    }
    Ok(())
}

/// One step of the `ε > 0` scheme. Returns the new field and `ρ_n`
/// computed from the incoming field.
pub fn ap_step(
    field: &LogField,
    grid: &Grid,
    land: &FitnessLandscape,
    c: f64,
    eps: f64,
    dt: f64,
) -> Result<(LogField, f64), HjError> {
    check(grid, field, dt)?;
    let dx = grid.dx();
    let u = &field.values;
    let rho = field.pressure(dx, eps);
    let h = hamiltonian(u, dx, c);
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let (l, r) = neighbours(u, i);
        let lap = (r - 2.0 * u[i] + l) / (dx * dx);
        let g = land.value(grid.x(i)) - 0.25 * c * c;
        let v = u[i] - dt * (h[i] - eps * lap + g - rho);
        if !v.is_finite() {
            return Err(HjError::NonFiniteValue {
                node: i,
                step: field.step + 1,
            });
        }
        out.push(v);
    }
    Ok((
        LogField {
            values: out,
            step: field.step + 1,
        },
        rho,
    ))
}

/// `min_i { v_i − dt H_i − dt (g_i − J) }` evaluated at `J`.
pub fn pressure_root_function(v: &[f64], h: &[f64], g: &[f64], dt: f64, j: f64) -> f64 {
    v.iter()
        .zip(h)
        .zip(g)
        .map(|((v, h), g)| v - dt * h - dt * (g - j))
        .fold(f64::INFINITY, f64::min)
}

/// Closed-form root: `J = −min_i { v_i − dt H_i − dt g_i } / dt`.
pub fn pressure_root_closed_form(v: &[f64], h: &[f64], g: &[f64], dt: f64) -> f64 {
    -pressure_root_function(v, h, g, dt, 0.0) / dt
}

/// Root by bisection, starting from `[guess − 1, guess + 1]` and doubling
/// the bracket up to 64 times.
pub fn pressure_root_bisection(v: &[f64], h: &[f64], g: &[f64], dt: f64, guess: f64) -> Result<f64, HjError> {
    let f = |j: f64| pressure_root_function(v, h, g, dt, j);
    let mut half = 1.0;
    let (mut lo, mut hi) = (guess - half, guess + half);
    let mut tries = 0;
    while !(f(lo) <= 0.0 && f(hi) >= 0.0) {
        tries += 1;
        if tries > 64 {
            return Err(HjError::RootNotBracketed);
        }
        half *= 2.0;
        lo = guess - half;
        hi = guess + half;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One step of the limit scheme. Returns the renormalized field and `P_{n+1}`.
pub fn limit_step(
    field: &LogField,
    grid: &Grid,
    land: &FitnessLandscape,
    c: f64,
    dt: f64,
) -> Result<(LogField, f64), HjError> {
    check(grid, field, dt)?;
    let dx = grid.dx();
    let v = &field.values;
    let h = hamiltonian(v, dx, c);
    let g: Vec<f64> = grid
        .xs()
        .into_iter()
        .map(|x| land.value(x) - 0.25 * c * c)
        .collect();
    let p = pressure_root_closed_form(v, &h, &g, dt);
    if !p.is_finite() {
        return Err(HjError::NonFiniteValue {
            node: 0,
            step: field.step + 1,
        });
    }
    let mut out: Vec<f64> = (0..v.len())
        .map(|i| v[i] - dt * (h[i] + g[i] - p))
        .collect();
    if let Some(i) = out.iter().position(|x| !x.is_finite()) {
        return Err(HjError::NonFiniteValue {
            node: i,
            step: field.step + 1,
        });
    }
    // absorb rounding so the constraint holds exactly
    let m = out.iter().copied().fold(f64::INFINITY, f64::min);
    for x in &mut out {
        *x -= m;
    }
    Ok((
        LogField {
            values: out,
            step: field.step + 1,
        },
        p,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HjScheme {
    /// The `ε > 0` scheme.
    Epsilon,
    /// The `ε = 0` limit scheme.
    Limit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HjOptions {
    /// Final time in `τ = ε t` units.
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HjRun {
    pub scheme: HjScheme,
    pub dt: f64,
    /// `τ` of each pressure entry.
    pub times: Vec<f64>,
    /// `ρ_n` (ε scheme) or `P_n` (limit scheme).
    pub pressure: Vec<f64>,
    /// Location of `min ū` after each step.
    pub minimizer: Vec<f64>,
    /// `min_i v_i` after each step (limit scheme only).
    pub min_values: Vec<f64>,
    pub snapshots: Vec<(f64, LogField)>,
    pub final_field: LogField,
}

/// Marches either scheme from `u0` up to `opts.t_final`.
pub fn simulate(
    scheme: HjScheme,
    land: &FitnessLandscape,
    c: f64,
    eps: f64,
    grid: &Grid,
    u0: &LogField,
    opts: &HjOptions,
) -> Result<HjRun, HjError> {
    if !(opts.dt > 0.0) || !(opts.t_final >= 0.0) {
        return Err(HjError::BadStep);
    }
    let steps = (opts.t_final / opts.dt).round() as usize;
    let dt = if steps > 0 { opts.t_final / steps as f64 } else { opts.dt };
    let mut field = match scheme {
        HjScheme::Epsilon => u0.clone(),
        HjScheme::Limit => u0.renormalized(),
    };
    let mut snaps: Vec<f64> = opts.snapshot_times.clone();
    snaps.sort_by(|a, b| a.total_cmp(b));
    let mut snap_iter = snaps.into_iter().peekable();
    let mut run = HjRun {
        scheme,
        dt,
        times: Vec::with_capacity(steps),
        pressure: Vec::with_capacity(steps),
        minimizer: Vec::with_capacity(steps),
        min_values: Vec::new(),
        snapshots: Vec::new(),
        final_field: field.clone(),
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        while let Some(&ts) = snap_iter.peek() {
            if t >= ts - 0.5 * dt || k == steps {
                run.snapshots.push((t, field.clone()));
                snap_iter.next();
            } else {
                break;
            }
        }
        if k == steps {
            break;
        }
        let (next, p) = match scheme {
            HjScheme::Epsilon => {
                let (next, rho) = ap_step(&field, grid, land, c, eps, dt)?;
                // ρ_n belongs to the incoming level
                run.times.push(t);
                (next, rho)
            }
            HjScheme::Limit => {
                let (next, p) = limit_step(&field, grid, land, c, dt)?;
                run.times.push(t + dt);
                (next, p)
            }
        };
        run.pressure.push(p);
        run.minimizer.push(grid.x(next.argmin()));
        if scheme == HjScheme::Limit {
            run.min_values.push(next.min());
        }
        field = next;
    }
    run.final_field = field;
    Ok(run)
}

/// Result of comparing `−ε log n` from the density solver with `ū`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub max_discrepancy: f64,
    pub compared_nodes: usize,
    /// Nodes excluded because one side is zero density or non-finite.
    pub non_comparable_nodes: usize,
    /// Minimizer of `−ε log n` in co-moving coordinates.
    pub fd_argmin: f64,
    /// Minimizer of `ū` in co-moving coordinates.
    pub hj_argmin: f64,
}

/// Compares a lab-frame density snapshot at lab time `t` with a co-moving
/// log-density on `hj_grid`. The lab grid is mapped through `x − ε c t`
/// and interpolated linearly; `boundary_layer` nodes at each end of the
/// log-density grid are skipped.
#[allow(clippy::too_many_arguments)]
pub fn consistency_check(
    fd_field: &DensityField,
    fd_grid: &Grid,
    hj_field: &LogField,
    hj_grid: &Grid,
    eps: f64,
    c: f64,
    t: f64,
    boundary_layer: usize,
) -> Result<ConsistencyReport, HjError> {
    if (fd_grid.dx() - hj_grid.dx()).abs() > 1e-9 * hj_grid.dx() {
        return Err(HjError::GridMismatch(format!(
            "dx {} vs {}",
            fd_grid.dx(),
            hj_grid.dx()
        )));
    }
    if fd_field.values.len() != fd_grid.nodes() || hj_field.values.len() != hj_grid.nodes() {
        return Err(HjError::GridMismatch("field length".into()));
    }
    let shift = eps * c * t;
    let dx = fd_grid.dx();
    let log_n = |y_lab: f64| -> Option<f64> {
        let s = (y_lab - fd_grid.origin()) / dx;
        if s < 0.0 || s > (fd_grid.nodes() - 1) as f64 {
            return None;
        }
        let j = (s.floor() as usize).min(fd_grid.nodes() - 2);
        let w = s - j as f64;
        let (a, b) = (fd_field.values[j], fd_field.values[j + 1]);
        if a <= 0.0 || b <= 0.0 {
            return None;
        }
        // interpolate the log, which is smooth where n is
        Some(-eps * ((1.0 - w) * a.ln() + w * b.ln()))
    };
    let mut report = ConsistencyReport {
        max_discrepancy: 0.0,
        compared_nodes: 0,
        non_comparable_nodes: 0,
        fd_argmin: f64::NAN,
        hj_argmin: f64::NAN,
    };
    let mut fd_best = f64::INFINITY;
    let mut hj_best = f64::INFINITY;
    let n = hj_grid.nodes();
    for i in boundary_layer..n.saturating_sub(boundary_layer) {
        let x = hj_grid.x(i);
        let u = hj_field.values[i];
        match log_n(x + shift) {
            Some(l) if u.is_finite() && l.is_finite() => {
                report.compared_nodes += 1;
                report.max_discrepancy = report.max_discrepancy.max((l - u).abs());
                if l < fd_best {
                    fd_best = l;
                    report.fd_argmin = x;
                }
                if u < hj_best {
                    hj_best = u;
                    report.hj_argmin = x;
                }
            }
            _ => report.non_comparable_nodes += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn godunov_values() {
        assert_eq!(godunov_h(1.0, -1.0), 1.0);
        assert_eq!(godunov_h(-1.0, 1.0), 0.0);
        assert_eq!(godunov_h(2.0, -3.0), 9.0);
    }

    #[test]
    fn constant_field_step() {
        let g = Grid::new(10.0, 11).unwrap();
        let land = FitnessLandscape::new(vec![crate::landscape::Bump::QuadraticPlus { h: 1.0, center: 100.0 }], 0.3)
            .unwrap();
        let k = 0.2;
        let eps = 0.1;
        let f = LogField::from_fn(&g, |_| k);
        let (next, rho) = ap_step(&f, &g, &land, 0.0, eps, 0.01).unwrap();
        let rho_expect = g.dx() * 11.0 * (-k / eps).exp();
        assert!((rho - rho_expect).abs() < 1e-15);
        for v in &next.values {
            assert!((v - (k - 0.01 * (0.3 - rho))).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_well_hamiltonian_by_hand() {
        // u = (x - 5)^2 on dx = 0.5, c = 0: slopes are exact differences
        let g = Grid::new(10.0, 21).unwrap();
        let u: Vec<f64> = g.xs().iter().map(|x| (x - 5.0).powi(2)).collect();
        let h = hamiltonian(&u, 0.5, 0.0);
        // x = 3: D- = (4 - 6.25)/0.5 = -4.5, D+ = (2.25 - 4)/0.5 = -3.5 -> H = 3.5^2
        assert!((h[6] - 12.25).abs() < 1e-12);
        // x = 5: D- = -1, D+ = 1 -> 0
        assert_eq!(h[10], 0.0);
        // x = 7: D- = 3.5, D+ = 4.5 -> 12.25
        assert!((h[14] - 12.25).abs() < 1e-12);
    }

    #[test]
    fn limit_root_matches_bisection() {
        let v = [0.3, 0.0, 0.1, 0.5];
        let h = [0.2, 0.0, 0.4, 1.0];
        let gg = [1.0, 2.0, 1.5, 0.5];
        let dt = 0.01;
        let closed = pressure_root_closed_form(&v, &h, &gg, dt);
        let bis = pressure_root_bisection(&v, &h, &gg, dt, 0.0).unwrap();
        assert!((closed - bis).abs() < 1e-12);
        assert!(pressure_root_function(&v, &h, &gg, dt, closed).abs() < 1e-14);
    }

    #[test]
    fn limit_step_keeps_zero_minimum() {
        let g = Grid::new(20.0, 201).unwrap();
        let land = FitnessLandscape::quadratic(2.5, 10.0).unwrap();
        let v = LogField::from_fn(&g, |x| 0.05 * (x - 9.5).powi(2)).renormalized();
        let (next, p) = limit_step(&v, &g, &land, 1.0, 1e-3).unwrap();
        assert_eq!(next.min(), 0.0);
        // minimizing node is the zero of v, where H vanishes to O(dx)
        assert!((p - 2.25).abs() < 0.05);
    }

    #[test]
    fn non_comparable_region_is_flagged() {
        let g = Grid::new(10.0, 11).unwrap();
        let n = DensityField::zeros(&g);
        let u = LogField::from_fn(&g, |_| f64::INFINITY);
        let r = consistency_check(&n, &g, &u, &g, 0.1, 0.0, 0.0, 0).unwrap();
        assert_eq!(r.compared_nodes, 0);
        assert_eq!(r.non_comparable_nodes, 11);
        let g2 = Grid::new(10.0, 21).unwrap();
        assert!(matches!(
            consistency_check(&n, &g, &LogField::from_fn(&g2, |_| 0.0), &g2, 0.1, 0.0, 0.0, 0),
            Err(HjError::GridMismatch(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {

            #![proptest_config(crate::test_support::seeded())]
            #[test]
            fn h_sign_and_monotonicity(p in -10.0f64..10.0, q in -10.0f64..10.0, dp in 0.0f64..3.0, dq in 0.0f64..3.0) {
                let h = godunov_h(p, q);
                prop_assert!(h >= 0.0);
                prop_assert_eq!(h == 0.0, p <= 0.0 && 0.0 <= q);
                prop_assert!(godunov_h(p + dp, q) >= h);
                prop_assert!(godunov_h(p, q + dq) <= h);
            }

            #[test]
            fn closed_form_root_agrees_with_bisection(
                v in proptest::collection::vec(0.0f64..3.0, 2..40),
                seed in 0u64..1000,
                dt in 1e-4f64..0.1,
            ) {
                let n = v.len();
                let h: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 13) as f64 * 0.1).collect();
                let g: Vec<f64> = (0..n).map(|i| ((i as u64 * 3 + seed) % 11) as f64 * 0.3 - 1.0).collect();
                let closed = pressure_root_closed_form(&v, &h, &g, dt);
                let bis = pressure_root_bisection(&v, &h, &g, dt, 0.0).unwrap();
                prop_assert!((closed - bis).abs() <= 1e-12 * closed.abs().max(1.0));
            }
        }
    }
}
