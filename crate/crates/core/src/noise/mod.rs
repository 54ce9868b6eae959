//! Wiener paths, their finite-variation approximants, and the driver
//! functionals that control Wong-Zakai rates.
//!
//! All paths live on a uniform fine [`TimeGrid`]. Stochastic integrals are
//! left-point sums on that grid: for Wiener integrands this is the Itô sum,
//! and for the piecewise-linear approximants the antisymmetric area sum is
//! exact segment by segment.

mod approx;
mod cache;
mod functionals;
mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use approx::{approximate, polygonal_approx, smoothed_approx, Velocity};
pub use cache::{read_path_file, write_path_file, PATH_FILE_MAGIC, PATH_FILE_VERSION};
pub use functionals::{area_process, bn_process, sn_identity_residual, sn_process, AreaPath, MatrixPath, NoiseBundle};
pub use report::{noise_report, noise_report_for_path, NoiseReport, NoiseRow};

/// Uniform grid `t_j = j T / n_fine`, `j = 0..=n_fine`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_fine: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_fine: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_fine < 2 {
            return Err(Error::InvalidTimeGrid(format!("need at least 2 steps, got {n_fine}")));
        }
        Ok(Self { horizon, n_fine })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn n_points(&self) -> usize {
        self.n_fine + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_fine as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.horizon / self.n_fine as f64
    }

    /// Coarsens by keeping every `factor`-th point.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_fine.is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "coarsening factor {factor} does not divide n_fine = {}",
                self.n_fine
            )));
        }
        Self::new(self.horizon, self.n_fine / factor)
    }
}

/// How a path was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Wiener,
    Polygonal(usize),
    Smoothed(usize),
    Deterministic,
}

impl PathKind {
    pub fn is_finite_variation(&self) -> bool {
        !matches!(self, PathKind::Wiener)
    }
}

/// Wong-Zakai approximation scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Polygonal,
    Smoothed,
}

impl Scheme {
    /// Whether `n` can be used with this scheme on `grid`.
    pub fn admits(&self, grid: &TimeGrid, n: usize) -> bool {
        match self {
            Scheme::Polygonal => n >= 1 && n <= grid.n_fine() && grid.n_fine().is_multiple_of(n),
            Scheme::Smoothed => n >= 1 && 1.0 / n as f64 >= grid.dt(),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Polygonal => write!(f, "polygonal"),
            Scheme::Smoothed => write!(f, "smoothed"),
        }
    }
}

/// `d1` real-valued components sampled on a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPath {
    grid: TimeGrid,
    kind: PathKind,
    samples: Vec<Vec<f64>>,
}

impl MultiPath {
    pub fn from_samples(grid: TimeGrid, kind: PathKind, samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("a path needs at least one component".into()));
        }
        for (k, row) in samples.iter().enumerate() {
            if row.len() != grid.n_points() {
                return Err(Error::Mismatch(format!(
                    "component {k} has {} samples, grid has {} points",
                    row.len(),
                    grid.n_points()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("component {k} is not finite at index {j}")));
            }
            if kind == PathKind::Wiener && row[0] != 0.0 {
                return Err(Error::InvalidArgument(format!("Wiener component {k} does not start at 0")));
            }
        }
        Ok(Self { grid, kind, samples })
    }

    /// A deterministic path `t ↦ f(k, t)`.
    pub fn from_fn(grid: TimeGrid, d1: usize, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let samples = (0..d1).map(|k| (0..grid.n_points()).map(|j| f(k, grid.t(j))).collect()).collect();
        Self::from_samples(grid, PathKind::Deterministic, samples)
    }

    pub fn zeros(grid: TimeGrid, d1: usize, kind: PathKind) -> Result<Self> {
        Self::from_samples(grid, kind, vec![vec![0.0; grid.n_points()]; d1])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn d1(&self) -> usize {
        self.samples.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Piecewise-linear interpolation of component `k`, zero for `t < 0`.
    pub fn value_at(&self, k: usize, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let row = &self.samples[k];
        let s = t / self.grid.dt();
        let i = s.floor() as usize;
        if i >= self.grid.n_fine() {
            return row[self.grid.n_fine()];
        }
        let r = s - i as f64;
        row[i] + r * (row[i + 1] - row[i])
    }

    /// The same path multiplied by `c`.
    pub fn scaled(&self, c: f64) -> MultiPath {
        MultiPath {
            grid: self.grid,
            kind: self.kind,
            samples: self.samples.iter().map(|row| row.iter().map(|v| c * v).collect()).collect(),
        }
    }

    /// Keeps every `factor`-th sample.
    pub fn subsample(&self, factor: usize) -> Result<MultiPath> {
        let grid = self.grid.coarsen(factor)?;
        let samples = self.samples.iter().map(|row| row.iter().step_by(factor).copied().collect()).collect();
        MultiPath::from_samples(grid, self.kind, samples)
    }

    pub(crate) fn check_compatible(&self, other: &MultiPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Mismatch(format!("time grids differ: {:?} vs {:?}", self.grid, other.grid)));
        }
        if self.d1() != other.d1() {
            return Err(Error::Mismatch(format!("driver counts differ: {} vs {}", self.d1(), other.d1())));
        }
        Ok(())
    }
}

/// Stream seed for one replica, independent of scheduling order.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    splitmix64(seed ^ splitmix64(replica.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples a `d1`-dimensional standard Wiener process on `grid`.
///
/// Components are drawn one after another from a ChaCha8 stream keyed by
/// `seed`, so the result is bitwise reproducible.
pub fn sample_wiener(seed: u64, d1: usize, grid: TimeGrid) -> Result<MultiPath> {
    if d1 == 0 {
        return Err(Error::InvalidArgument("d1 must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = grid.dt().sqrt();
    let samples = (0..d1)
        .map(|_| {
            let mut row = Vec::with_capacity(grid.n_points());
            let mut w = 0.0;
            row.push(w);
            for _ in 0..grid.n_fine() {
                let z: f64 = StandardNormal.sample(&mut rng);
                w += sd * z;
                row.push(w);
            }
            row
        })
        .collect();
    MultiPath::from_samples(grid, PathKind::Wiener, samples)
}

/// Max over grid points and components of `|a - b|`.
pub fn sup_distance(a: &MultiPath, b: &MultiPath) -> Result<f64> {
    a.check_compatible(b)?;
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max))
}
