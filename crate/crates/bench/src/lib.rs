//! Fixtures shared by the solver benchmarks: the quartic-plus-quadratic
//! landscape with the usual initial data, at a few grid sizes.

use lagshift::{Bump, DensityField, FitnessLandscape, Grid, LogField};

pub const EPS: f64 = 0.1;
pub const C: f64 = 1.0;

pub fn landscape() -> FitnessLandscape {
    FitnessLandscape::new(
        vec![
            Bump::QuarticPlus { h: 2.5, center: 35.0 },
            Bump::QuadraticPlus { h: 2.5, center: 40.0 },
        ],
        0.5,
    )
    .expect("fixture landscape")
}

pub struct FdFixture {
    pub grid: Grid,
    pub field: DensityField,
    pub rho: f64,
    pub dt: f64,
}

pub fn fd_fixture(nodes: usize) -> FdFixture {
    let grid = Grid::with_origin(20.0, 40.0, nodes).expect("grid");
    let field = DensityField::from_fn(&grid, |x| 0.1 * (-(x - 37.5).powi(2) / 100.0).exp()).expect("field");
    let rho = field.mass(grid.dx());
    let dt = lagshift::fd::auto_dt(&grid, EPS, 3.0 + rho);
    FdFixture { grid, field, rho, dt }
}

pub struct HjFixture {
    pub grid: Grid,
    pub field: LogField,
    pub dt: f64,
}

pub fn hj_fixture(nodes: usize) -> HjFixture {
    let grid = Grid::with_origin(20.0, 40.0, nodes).expect("grid");
    let field = LogField::log_gaussian(&grid, EPS, 0.1, 37.5, 100.0);
    HjFixture { grid, field, dt: 1e-4 }
}
