//! Explicit finite differences for the shifted nonlocal reaction-diffusion
//! equation
//!
//! ```text
//! ∂t n − ε² ∂xx n = n (a(x, t) − ρ(t)),   ρ(t) = ∫ n dx
//! ```
//!
//! on `[0, L]` with homogeneous Dirichlet data. One step reads
//!
//! ```text
//! n_j^{k+1} = n_j^k + dt ε²/dx² (n_{j+1}^k − 2 n_j^k + n_{j−1}^k) + dt n_j^k (a(x_j, t_{k+1}) − ρ_k)
//! ```
//!
//! with `ρ_k = dx Σ_j n_j^k`. The update is a convex combination of
//! neighbouring values whenever `2 dt ε²/dx² + dt (‖a‖∞ + ρ_k) ≤ 1`, which is
//! the stability condition enforced here; it gives positivity and the
//! discrete comparison principle.
//!
//! Simulations may also be carried out in the frame co-moving with a single
//! shift speed, where the growth is stationary and a drift `ε c ∂x n` appears.

use thiserror::Error;

use crate::landscape::{LandscapeError, Model, TrackedPoint, Velocities};

/// Fraction of the stability bound used when `dt` is chosen automatically.
pub const AUTO_DT_SAFETY: f64 = 0.8;

/// Boundary-adjacent mass fraction above which the run is flagged.
pub const BOUNDARY_MASS_WARNING: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("stability condition violated: {0}")]
    CflViolation(String),
    #[error("non-finite value at node {node} (t = {t})")]
    NonFiniteValue { node: usize, t: f64 },
    #[error("grid needs at least 3 nodes and a positive length")]
    BadGrid,
    #[error("field length {field} does not match grid with {grid} nodes")]
    LengthMismatch { field: usize, grid: usize },
    #[error("initial density must be finite and nonnegative")]
    NegativeInitialData,
    #[error("the co-moving frame needs a single shift speed")]
    FrameNeedsSingleSpeed,
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
}

/// Uniform nodes `x_j = origin + j dx`, `j = 0..nodes`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    nodes: usize,
    origin: f64,
}

impl Grid {
    /// Grid on `[0, length]`.
    pub fn new(length: f64, nodes: usize) -> Result<Self, FdError> {
        Self::with_origin(0.0, length, nodes)
    }

    pub fn with_origin(origin: f64, length: f64, nodes: usize) -> Result<Self, FdError> {
        if nodes < 3 || !(length > 0.0) || !length.is_finite() || !origin.is_finite() {
            return Err(FdError::BadGrid);
        }
        Ok(Grid {
            length,
            nodes,
            origin,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.x(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    pub fn zeros(grid: &Grid) -> Self {
        DensityField {
            values: vec![0.0; grid.nodes()],
            t: 0.0,
        }
    }

    /// Samples `f` at the nodes and imposes the Dirichlet zeros.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self, FdError> {
        let mut values: Vec<f64> = (0..grid.nodes()).map(|j| f(grid.x(j))).collect();
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FdError::NegativeInitialData);
        }
        values[0] = 0.0;
        *values.last_mut().unwrap() = 0.0;
        Ok(DensityField { values, t: 0.0 })
    }

    /// `ρ = dx Σ n_j`
    pub fn mass(&self, dx: f64) -> f64 {
        dx * self.values.iter().sum::<f64>()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = j;
            }
        }
        best
    }
}

/// One explicit Euler step in the lab frame.
pub fn step(
    field: &DensityField,
    grid: &Grid,
    growth: impl Fn(f64) -> f64,
    rho: f64,
    dt: f64,
    eps: f64,
) -> Result<DensityField, FdError> {
    step_with_drift(field, grid, growth, rho, dt, eps, 0.0)
}

/// One explicit Euler step with an additional drift `v ∂x n` (central
/// differences). `growth` is evaluated at the new time level.
pub fn step_with_drift(
    field: &DensityField,
    grid: &Grid,
    growth: impl Fn(f64) -> f64,
    rho: f64,
    dt: f64,
    eps: f64,
    drift: f64,
) -> Result<DensityField, FdError> {
    let n = grid.nodes();
    if field.values.len() != n {
        return Err(FdError::LengthMismatch {
            field: field.values.len(),
            grid: n,
        });
    }
    let dx = grid.dx();
    let r = dt * eps * eps / (dx * dx);
    let adv = dt * drift / (2.0 * dx);
    if r - adv.abs() < 0.0 {
        return Err(FdError::CflViolation(format!(
            "cell Péclet: |drift| dx = {} exceeds 2 eps^2 = {}",
            drift.abs() * dx,
            2.0 * eps * eps
        )));
    }
    let u = &field.values;
    let t_next = field.t + dt;
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let g = growth(grid.x(j)) - rho;
        let centre = 1.0 - 2.0 * r + dt * g;
        if centre < 0.0 {
            return Err(FdError::CflViolation(format!(
                "2 dt eps^2/dx^2 + dt (rho - a) = {} > 1 at x = {}",
                1.0 - centre,
                grid.x(j)
            )));
        }
        let v = centre * u[j] + (r + adv) * u[j + 1] + (r - adv) * u[j - 1];
        if !v.is_finite() {
            return Err(FdError::NonFiniteValue { node: j, t: t_next });
        }
        out[j] = v;
    }
    Ok(DensityField {
        values: out,
        t: t_next,
    })
}

/// Largest `dt` satisfying the stability condition for a given bound on
/// `‖a‖∞ + ρ`, scaled by [`AUTO_DT_SAFETY`].
pub fn auto_dt(grid: &Grid, eps: f64, growth_plus_rho: f64) -> f64 {
    let dx = grid.dx();
    AUTO_DT_SAFETY / (2.0 * eps * eps / (dx * dx) + growth_plus_rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Frame {
    #[default]
    Lab,
    /// Coordinates `x − ε c t` for a single-speed model.
    CoMoving,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub t_final: f64,
    /// `None` picks [`auto_dt`] from `‖a‖∞` and the a-priori mass bound.
    pub dt: Option<f64>,
    /// Diagnostics every `stride` steps (the first and last step are always kept).
    pub stride: usize,
    pub snapshot_times: Vec<f64>,
    /// Radius of the window around each tracked point; defaults to `5 ε`.
    pub share_radius: Option<f64>,
    pub frame: Frame,
}

impl SimOptions {
    pub fn new(t_final: f64) -> Self {
        SimOptions {
            t_final,
            dt: None,
            stride: 10,
            snapshot_times: Vec::new(),
            share_radius: None,
            frame: Frame::Lab,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunDiagnostics {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    /// Location of the density maximum, in the coordinates of `frame`.
    pub argmax_x: Vec<f64>,
    /// `shares[i][k]`: mass fraction within `share_radius` of tracked point `i` at sample `k`.
    pub shares: Vec<Vec<f64>>,
    /// Length of the set where `n > 0.01 max n`, at least `dx`.
    pub widths: Vec<f64>,
    pub tracked: Vec<TrackedPoint>,
    pub share_radius: f64,
    pub frame: Frame,
    pub dt: f64,
    pub max_boundary_fraction: f64,
}

impl RunDiagnostics {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Argmax at sample `k` in the frame moving at `velocity` (lab units).
    pub fn argmax_in_frame(&self, k: usize, velocity: f64) -> f64 {
        match self.frame {
            Frame::Lab => self.argmax_x[k] - velocity * self.times[k],
            Frame::CoMoving => self.argmax_x[k],
        }
    }

    pub fn boundary_warning(&self) -> bool {
        self.max_boundary_fraction > BOUNDARY_MASS_WARNING
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub diagnostics: RunDiagnostics,
    pub final_field: DensityField,
    pub snapshots: Vec<DensityField>,
    pub grid: Grid,
}

/// Single-speed model, lab frame.
pub fn simulate_case1(
    model: &Model,
    n0: &DensityField,
    grid: &Grid,
    t_final: f64,
    dt: Option<f64>,
) -> Result<SimulationOutput, FdError> {
    let mut opts = SimOptions::new(t_final);
    opts.dt = dt;
    simulate(model, n0, grid, &opts)
}

/// Two-speed model, lab frame.
pub fn simulate_case2(
    model: &Model,
    n0: &DensityField,
    grid: &Grid,
    t_final: f64,
    dt: Option<f64>,
) -> Result<SimulationOutput, FdError> {
    simulate_case1(model, n0, grid, t_final, dt)
}

pub fn simulate(
    model: &Model,
    n0: &DensityField,
    grid: &Grid,
    opts: &SimOptions,
) -> Result<SimulationOutput, FdError> {
    if n0.values.len() != grid.nodes() {
        return Err(FdError::LengthMismatch {
            field: n0.values.len(),
            grid: grid.nodes(),
        });
    }
    if n0.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(FdError::NegativeInitialData);
    }
    let eps = model.epsilon();
    let dx = grid.dx();
    let drift = match (opts.frame, model.shift.velocities) {
        (Frame::Lab, _) => 0.0,
        (Frame::CoMoving, Velocities::Single(c)) => eps * c,
        (Frame::CoMoving, Velocities::Pair { .. }) => return Err(FdError::FrameNeedsSingleSpeed),
    };
    let sup_a = model.sup_abs_growth();
    let rho0 = n0.mass(dx);
    let dt_req = match opts.dt {
        Some(dt) => dt,
        None => auto_dt(grid, eps, sup_a + rho0.max(sup_a)),
    };
    if !(dt_req > 0.0) || !(opts.t_final >= 0.0) {
        return Err(FdError::CflViolation("dt and T must be positive".into()));
    }
    let steps = (opts.t_final / dt_req).ceil().max(if opts.t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    let dt = if steps > 0 { opts.t_final / steps as f64 } else { dt_req };

    let tracked = model.tracked_points()?;
    let radius = opts.share_radius.unwrap_or(5.0 * eps);
    let mut diag = RunDiagnostics {
        shares: vec![Vec::new(); tracked.len()],
        tracked,
        share_radius: radius,
        frame: opts.frame,
        dt,
        ..Default::default()
    };

    let mut snaps: Vec<f64> = opts.snapshot_times.clone();
    snaps.sort_by(|a, b| a.total_cmp(b));
    let mut snap_iter = snaps.into_iter().peekable();
    let mut snapshots = Vec::new();

    let mut field = DensityField {
        values: n0.values.clone(),
        t: 0.0,
    };
    field.values[0] = 0.0;
    *field.values.last_mut().unwrap() = 0.0;
    let stride = opts.stride.max(1);

    let growth_at = |x: f64, t: f64| match opts.frame {
        Frame::Lab => model.growth(x, t),
        Frame::CoMoving => model.growth(x, 0.0),
    };

    for k in 0..=steps {
        let rho = field.mass(dx);
        if k % stride == 0 || k == steps {
            record(&mut diag, &field, grid, rho);
        }
        while let Some(&ts) = snap_iter.peek() {
            if field.t >= ts - 0.5 * dt || k == steps {
                snapshots.push(field.clone());
                snap_iter.next();
            } else {
                break;
            }
        }
        if k == steps {
            break;
        }
        let t_next = (k + 1) as f64 * dt;
        let mut next = step_with_drift(&field, grid, |x| growth_at(x, t_next), rho, dt, eps, drift)?;
        next.t = t_next;
        field = next;
    }
    if diag.boundary_warning() {
        log::warn!(
            "boundary-adjacent mass fraction reached {:.3e}; the domain may be too small",
            diag.max_boundary_fraction
        );
    }
    Ok(SimulationOutput {
        diagnostics: diag,
        final_field: field,
        snapshots,
        grid: *grid,
    })
}

fn record(diag: &mut RunDiagnostics, field: &DensityField, grid: &Grid, rho: f64) {
    let dx = grid.dx();
    let t = field.t;
    diag.times.push(t);
    diag.rho.push(rho);
    let peak = field.values[field.argmax()];
    diag.argmax_x.push(grid.x(field.argmax()));
    let above = field.values.iter().filter(|&&v| v > 0.01 * peak).count();
    diag.widths.push(dx * above.max(1) as f64);
    let n = grid.nodes();
    if rho > 0.0 {
        let edge = dx * (field.values[1] + field.values[n - 2]) / rho;
        diag.max_boundary_fraction = diag.max_boundary_fraction.max(edge);
    }
    for (i, p) in diag.tracked.iter().enumerate() {
        let centre = match diag.frame {
            Frame::Lab => p.at(t),
            Frame::CoMoving => p.origin,
        };
        diag.shares[i].push(window_share(field, grid, centre, diag.share_radius, rho));
    }
}

/// Fraction of the mass within `radius` of `centre`.
pub fn window_share(field: &DensityField, grid: &Grid, centre: f64, radius: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let dx = grid.dx();
    let m: f64 = field
        .values
        .iter()
        .enumerate()
        .filter(|(j, _)| (grid.x(*j) - centre).abs() <= radius)
        .map(|(_, v)| v)
        .sum();
    (dx * m / rho).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{Environment, FitnessLandscape, ShiftSpec};

    fn grid() -> Grid {
        Grid::new(10.0, 101).unwrap()
    }

    #[test]
    fn zero_is_fixed_point() {
        let g = grid();
        let n = DensityField::zeros(&g);
        let out = step(&n, &g, |_| 1.0, 0.0, 0.01, 0.1).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spike_conserves_mass_without_reaction() {
        let g = grid();
        let mut n = DensityField::zeros(&g);
        n.values[50] = 3.0;
        let out = step(&n, &g, |_| 0.0, 0.0, 0.1, 0.1).unwrap();
        assert!((out.mass(g.dx()) - n.mass(g.dx())).abs() < 1e-15);
        assert!(out.values[49] > 0.0 && out.values[51] > 0.0);
    }

    #[test]
    fn constant_interior_grows_uniformly() {
        let g = grid();
        let mut n = DensityField::zeros(&g);
        for v in &mut n.values[1..100] {
            *v = 0.7;
        }
        let (dt, gr, rho) = (0.05, 1.5, 0.4);
        let out = step(&n, &g, |_| gr, rho, dt, 0.1).unwrap();
        let expect = 0.7 * (1.0 + dt * (gr - rho));
        assert!((out.values[50] - expect).abs() < 1e-15);
        assert_eq!(out.values[0], 0.0);
    }

    #[test]
    fn stability_violation_rejected() {
        let g = grid();
        let n = DensityField::zeros(&g);
        assert!(matches!(
            step(&n, &g, |_| 0.0, 0.0, 1.0, 0.1),
            Err(FdError::CflViolation(_))
        ));
        assert!(matches!(
            step(&n, &g, |_| -100.0, 0.0, 0.02, 0.1),
            Err(FdError::CflViolation(_))
        ));
    }

    #[test]
    fn zero_initial_data_goes_nowhere() {
        let a = FitnessLandscape::quadratic(2.5, 5.0).unwrap();
        let model = Model::new(Environment::SingleSpeed(a), ShiftSpec::single(0.1, 1.0).unwrap()).unwrap();
        let g = grid();
        let out = simulate_case1(&model, &DensityField::zeros(&g), &g, 5.0, None).unwrap();
        assert!(out.diagnostics.rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn snapshots_and_stride() {
        let a = FitnessLandscape::quadratic(2.5, 5.0).unwrap();
        let model = Model::new(Environment::SingleSpeed(a), ShiftSpec::single(0.1, 1.0).unwrap()).unwrap();
        let g = grid();
        let n0 = DensityField::from_fn(&g, |x| (-(x - 5.0).powi(2)).exp()).unwrap();
        let mut opts = SimOptions::new(1.0);
        opts.dt = Some(0.01);
        opts.stride = 25;
        opts.snapshot_times = vec![0.0, 0.5, 1.0];
        let out = simulate(&model, &n0, &g, &opts).unwrap();
        assert_eq!(out.diagnostics.times.len(), 5);
        assert_eq!(out.snapshots.len(), 3);
        assert!((out.snapshots[1].t - 0.5).abs() < 1e-12);
        assert!((out.final_field.t - 1.0).abs() < 1e-12);
    }
}
