//! Numerics for selection–mutation dynamics with linearly shifting fitness
//! optima: lagged optima and persistence thresholds, an explicit density
//! solver, an asymptotic-preserving Hamilton–Jacobi scheme with its limit
//! scheme, principal eigenpairs, and the post-processing that turns runs
//! into persistence/extinction verdicts.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod eigen;
pub mod fd;
pub mod hj;
pub mod landscape;
pub mod runner;
pub mod verify;

pub use analysis::{Classification, Thresholds, Verdict};
pub use config::{ConfigError, ExperimentConfig, Overrides};
pub use eigen::{EigenDomain, EigenPair, Normalization};
pub use fd::{DensityField, Grid, RunDiagnostics};
pub use hj::{godunov_h, LogField};
pub use landscape::{Bump, Environment, FitnessLandscape, Model, ShiftSpec, TwoPeakLandscape, Velocities};
