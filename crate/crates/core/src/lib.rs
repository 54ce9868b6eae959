//! Wong-Zakai approximations of linear stochastic PDEs on the periodic line.
//!
//! The crate is organised bottom-up:
//!
//! | Module      | Contents                                                                  |
//! |-------------|---------------------------------------------------------------------------|
//! | [`grid`]    | periodic spatial grid, spectral derivatives, Sobolev norms                |
//! | [`noise`]   | Wiener paths, polygonal and smoothed approximants, area and `B_n` processes |
//! | [`problem`] | coefficient fields, the operators `L` and `M^k`, structural checks        |
//! | [`solver`]  | method-of-lines integrators for the random PDE and the Itô-form SPDE      |
//! | [`rates`]   | log-log rate fits and replica aggregation                                 |
//!
//! Everything is deterministic given a seed: replicas derive their own
//! streams through [`noise::replica_seed`], so results do not depend on how
//! work is scheduled across threads.

pub mod error;
pub mod grid;
pub mod noise;
pub mod problem;
pub mod rates;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{gaussian_bump, GridFunction, SpatialGrid};
pub use noise::{MultiPath, NoiseBundle, PathKind, Scheme, TimeGrid};
pub use problem::{CoefficientField, ProblemSpec};
pub use rates::{ErrorRecord, RateFit, RateReport};
pub use solver::{SolveRequest, Trajectory};
