//! Periodic spatial grid, spectral differentiation and discrete Sobolev norms.
//!
//! A [`GridFunction`] is a real field sampled at `x_j = j Λ / n_x`. Its
//! discrete Fourier transform is computed lazily and cached. Mode `k` carries
//! the wavenumber `ξ_k = 2π m_k / Λ` with `m_k = k` for `k < n_x/2` and
//! `m_k = k - n_x` above; the unpaired Nyquist mode is dropped by odd-order
//! derivatives so that real fields stay real.
//!
//! Sobolev norms follow the derivative-sum definition
//!
//! ```text
//! |u|_m^2 = Σ_{α ≤ m} ∫ |D^α u|^2 dx
//! ```
//!
//! evaluated through Parseval as `(Λ / n_x^2) Σ_k w_k(m) |û_k|^2` with
//! `w_k(m) = Σ_{α ≤ m} |(iξ_k)^α|^2`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, Λ)` with a power-of-two number of points.
#[derive(Clone)]
pub struct SpatialGrid {
    n_x: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid").field("n_x", &self.n_x).field("length", &self.length).finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_x == other.n_x && self.length == other.length
    }
}

impl SpatialGrid {
    pub fn new(n_x: usize, length: f64) -> Result<Self> {
        if n_x < 8 || !n_x.is_power_of_two() {
            return Err(Error::InvalidSpatialGrid(format!("n_x must be a power of two >= 8, got {n_x}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidSpatialGrid(format!("domain length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self { n_x, length, forward: planner.plan_fft_forward(n_x), inverse: planner.plan_fft_inverse(n_x) })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_x).map(move |j| self.x(j))
    }

    /// Signed integer mode number of FFT bin `k`; the Nyquist bin reports `n_x/2`.
    pub fn mode(&self, k: usize) -> i64 {
        let n = self.n_x as i64;
        let k = k as i64;
        if k <= n / 2 {
            k
        } else {
            k - n
        }
    }

    pub fn is_nyquist(&self, k: usize) -> bool {
        k == self.n_x / 2
    }

    /// Angular wavenumber `2π m / Λ` of bin `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode(k) as f64 / self.length
    }

    /// Largest resolved wavenumber magnitude.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.n_x as f64 / self.length
    }

    /// Spectral multiplier of `D^order` for bin `k`.
    pub fn derivative_multiplier(&self, k: usize, order: u32) -> Complex64 {
        if order == 0 {
            return Complex64::new(1.0, 0.0);
        }
        if order % 2 == 1 && self.is_nyquist(k) {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, self.wavenumber(k)).powu(order)
    }

    /// Parseval weight `Σ_{α ≤ m} |(iξ_k)^α|^2` for bin `k`.
    pub fn sobolev_weight(&self, k: usize, m: u32) -> f64 {
        let xi2 = self.wavenumber(k).powi(2);
        let nyquist = self.is_nyquist(k);
        let mut w = 0.0;
        let mut p = 1.0;
        for alpha in 0..=m {
            if !(nyquist && alpha % 2 == 1) {
                w += p;
            }
            p *= xi2;
        }
        w
    }

    /// Unnormalised forward DFT of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT (normalised by `1/n_x`), keeping the real part.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n_x as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// In-place forward transform of a complex buffer.
    pub fn fft_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// In-place unnormalised inverse transform of a complex buffer.
    pub fn ifft_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    pub fn scratch_len(&self) -> usize {
        self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())
    }

    fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self != other {
            return Err(Error::Mismatch(format!(
                "spatial grids differ: ({}, {}) vs ({}, {})",
                self.n_x, self.length, other.n_x, other.length
            )));
        }
        Ok(())
    }
}

/// A real field on a [`SpatialGrid`] with a write-once spectrum cache.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: SpatialGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl GridFunction {
    pub fn new(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_x() {
            return Err(Error::Mismatch(format!("{} samples for a grid of {} points", values.len(), grid.n_x())));
        }
        Ok(Self { grid: grid.clone(), values, spectrum: OnceLock::new() })
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid: grid.clone(), values, spectrum: OnceLock::new() }
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &SpatialGrid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Builds a field from a (Hermitian) spectrum; any anti-Hermitian part is discarded.
    pub fn from_spectrum(grid: &SpatialGrid, spectrum: &[Complex64]) -> Result<Self> {
        if spectrum.len() != grid.n_x() {
            return Err(Error::Mismatch(format!(
                "spectrum of length {} for a grid of {} points",
                spectrum.len(),
                grid.n_x()
            )));
        }
        Self::new(grid, grid.inverse_real(spectrum))
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Spectral derivative `D^order u`.
    pub fn derivative(&self, order: u32) -> GridFunction {
        if order == 0 {
            return self.clone();
        }
        let spec: Vec<Complex64> =
            self.spectrum().iter().enumerate().map(|(k, c)| c * self.grid.derivative_multiplier(k, order)).collect();
        GridFunction::from_spectrum(&self.grid, &spec).expect("same grid")
    }

    /// `|u|_m^2` via Parseval.
    pub fn sobolev_norm_sq(&self, m: u32) -> f64 {
        let n = self.grid.n_x() as f64;
        let scale = self.grid.length() / (n * n);
        self.spectrum().iter().enumerate().map(|(k, c)| self.grid.sobolev_weight(k, m) * c.norm_sqr()).sum::<f64>()
            * scale
    }

    pub fn sobolev_norm(&self, m: u32) -> f64 {
        self.sobolev_norm_sq(m).sqrt()
    }

    /// `|u|_m^2` from grid sums of spectral derivatives; the slow route kept for cross-checks.
    pub fn sobolev_norm_sq_grid(&self, m: u32) -> f64 {
        let dx = self.grid.dx();
        (0..=m).map(|alpha| self.derivative(alpha).values.iter().map(|v| v * v).sum::<f64>() * dx).sum()
    }

    /// The `H^m` inner product `(u, v)_m`.
    pub fn inner(&self, other: &GridFunction, m: u32) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let n = self.grid.n_x() as f64;
        let scale = self.grid.length() / (n * n);
        Ok(self
            .spectrum()
            .iter()
            .zip(other.spectrum())
            .enumerate()
            .map(|(k, (a, b))| self.grid.sobolev_weight(k, m) * (a * b.conj()).re)
            .sum::<f64>()
            * scale)
    }

    /// `L^2` inner product by plain grid quadrature.
    pub fn inner_grid(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.dx())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridFunction::new(&self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    /// Spectral translation `x ↦ u(x + shift)`.
    pub fn translate(&self, shift: f64) -> GridFunction {
        let spec: Vec<Complex64> = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if self.grid.is_nyquist(k) {
                    // The unpaired mode cannot be shifted and stay real.
                    c * (self.grid.wavenumber(k) * shift).cos()
                } else {
                    c * Complex64::from_polar(1.0, self.grid.wavenumber(k) * shift)
                }
            })
            .collect();
        GridFunction::from_spectrum(&self.grid, &spec).expect("same grid")
    }

    /// Spectral interpolation onto another grid of the same length (zero padding or truncation).
    pub fn resample(&self, target: &SpatialGrid) -> Result<GridFunction> {
        if target.length() != self.grid.length() {
            return Err(Error::Mismatch(format!(
                "cannot resample between domain lengths {} and {}",
                self.grid.length(),
                target.length()
            )));
        }
        if target == &self.grid {
            return Ok(self.clone());
        }
        let spec = transfer_spectrum(&self.grid, self.spectrum(), target);
        GridFunction::from_spectrum(target, &spec)
    }

    /// Writes `x,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.x(j), v)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `mode,re,im` rows of the unnormalised spectrum.
    pub fn write_spectrum_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "mode,re,im")?;
        for (k, c) in self.spectrum().iter().enumerate() {
            writeln!(out, "{},{},{}", self.grid.mode(k), c.re, c.im)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Moves an unnormalised spectrum between grids of equal length, rescaling for the size change.
pub(crate) fn transfer_spectrum(from: &SpatialGrid, spectrum: &[Complex64], to: &SpatialGrid) -> Vec<Complex64> {
    let (n_from, n_to) = (from.n_x(), to.n_x());
    let ratio = n_to as f64 / n_from as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n_to];
    let half = n_from.min(n_to) / 2;
    for k in 0..n_from {
        let m = from.mode(k);
        if m.unsigned_abs() as usize >= half {
            continue;
        }
        let idx = if m >= 0 { m as usize } else { (n_to as i64 + m) as usize };
        out[idx] = spectrum[k] * ratio;
    }
    // The shared Nyquist content, split evenly when refining.
    let nyq = spectrum[n_from / 2];
    if n_to > n_from {
        let v = nyq * ratio * 0.5;
        out[n_from / 2] += v;
        out[n_to - n_from / 2] += v;
    } else if n_to == n_from {
        out[n_to / 2] = nyq;
    }
    out
}

/// Periodic Gaussian profile `amplitude · exp(-d(x, center)^2 / (2 width^2))`,
/// with `d` the distance on the circle of circumference `Λ`.
pub fn gaussian_bump(grid: &SpatialGrid, center: f64, width: f64, amplitude: f64) -> Result<GridFunction> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidArgument(format!("bump width must be positive, got {width}")));
    }
    let l = grid.length();
    Ok(GridFunction::from_fn(grid, |x| {
        let d = periodic_distance(x, center, l);
        amplitude * (-d * d / (2.0 * width * width)).exp()
    }))
}

/// Signed representative of `x - c` in `[-Λ/2, Λ/2)`.
pub fn periodic_distance(x: f64, c: f64, length: f64) -> f64 {
    let d = (x - c).rem_euclid(length);
    if d >= 0.5 * length {
        d - length
    } else {
        d
    }
}
