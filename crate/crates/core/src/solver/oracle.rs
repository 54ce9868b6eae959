//! Closed-form solutions for constant coefficients with one driver.
//!
//! With `L = a D² + a1 D + a0` and `M = b D + b0` constant, the operators
//! commute and act on Fourier mode `k` as multipliers `λ_k` and `μ_k`. The
//! classical solution along a finite-variation path `P` and the Stratonovich
//! solution along a Wiener path are both
//! `û_k(t) = û0_k exp(t λ_k + P(t) μ_k)`: heat flow, damping, and a
//! translation of `u0` by `b P(t)` with the factor `exp(b0 P(t))`.

use num_complex::Complex64;

use super::{CoupledError, Trajectory};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::noise::MultiPath;
use crate::problem::ProblemSpec;

pub(crate) struct ConstantModel {
    lambda: Vec<Complex64>,
    mu: Vec<Complex64>,
    u0: Vec<Complex64>,
}

impl ConstantModel {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        if spec.d1() != 1 {
            return Err(Error::OracleNotApplicable(format!("d1 = {} (needs 1)", spec.d1())));
        }
        let [a, a1, a0, b, b0] = spec
            .constant_coefficients()
            .ok_or_else(|| Error::OracleNotApplicable("coefficients are not all constant".into()))?;
        if spec.f().max_abs() > 0.0 || spec.g(0).max_abs() > 0.0 {
            return Err(Error::OracleNotApplicable("f and g must vanish".into()));
        }
        if a < 0.0 {
            return Err(Error::OracleNotApplicable(format!("a = {a} is negative")));
        }
        let grid = spec.grid();
        let n = grid.n_x();
        let lambda =
            (0..n).map(|k| a * grid.derivative_multiplier(k, 2) + a1 * grid.derivative_multiplier(k, 1) + a0).collect();
        let mu = (0..n).map(|k| b * grid.derivative_multiplier(k, 1) + b0).collect();
        Ok(Self { lambda, mu, u0: spec.u0().spectrum().to_vec() })
    }

    /// Mode-wise spectrum at time `t` with path value `p`.
    fn spectrum_into(&self, t: f64, p: f64, out: &mut [Complex64]) {
        for k in 0..out.len() {
            out[k] = self.u0[k] * (t * self.lambda[k] + p * self.mu[k]).exp();
        }
    }
}

/// Sobolev weights scaled so that `Σ_k w_k |v̂_k|²` is `|v|_m²`.
fn norm_weights(spec: &ProblemSpec, m: u32) -> Vec<f64> {
    let grid = spec.grid();
    let n = grid.n_x() as f64;
    let scale = grid.length() / (n * n);
    (0..grid.n_x()).map(|k| scale * grid.sobolev_weight(k, m)).collect()
}

fn weighted_sq(weights: &[f64], v: &[Complex64]) -> f64 {
    weights.iter().zip(v).map(|(w, c)| w * c.norm_sqr()).sum()
}

fn record_indices(path: &MultiPath, record_every: usize) -> Result<Vec<usize>> {
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be positive".into()));
    }
    let n_fine = path.grid().n_fine();
    let mut idx: Vec<usize> = (0..=n_fine).step_by(record_every).collect();
    if *idx.last().expect("nonempty") != n_fine {
        idx.push(n_fine);
    }
    Ok(idx)
}

/// The closed-form solution along `path`, recorded every `record_every` fine steps.
pub fn oracle_constant(
    spec: &ProblemSpec,
    path: &MultiPath,
    record_every: usize,
    sobolev_m: u32,
) -> Result<Trajectory> {
    let model = ConstantModel::new(spec)?;
    if path.d1() != 1 {
        return Err(Error::OracleNotApplicable(format!("path has {} components", path.d1())));
    }
    let grid = spec.grid();
    let mut traj = Trajectory::new(sobolev_m);
    let mut spec_buf = vec![Complex64::default(); grid.n_x()];
    for j in record_indices(path, record_every)? {
        let t = path.grid().t(j);
        if j == 0 {
            traj.record(0, 0.0, spec.u0().clone(), true);
            continue;
        }
        model.spectrum_into(t, path.component(0)[j], &mut spec_buf);
        traj.record(j, t, GridFunction::from_spectrum(grid, &spec_buf)?, true);
    }
    Ok(traj)
}

/// Coupled errors between the closed-form solutions along `w` and `wn`,
/// evaluated directly on the spectra, one entry per Sobolev index in `ms`.
///
/// `z_n = M u_n (W - W_n)` has spectrum `μ_k û_n,k (W - W_n)`.
pub fn oracle_coupled(
    spec: &ProblemSpec,
    w: &MultiPath,
    wn: &MultiPath,
    ms: &[u32],
    record_every: usize,
) -> Result<Vec<CoupledError>> {
    let model = ConstantModel::new(spec)?;
    w.check_compatible(wn)?;
    if w.d1() != 1 {
        return Err(Error::OracleNotApplicable(format!("path has {} components", w.d1())));
    }
    let wm: Vec<Vec<f64>> = ms.iter().map(|&m| norm_weights(spec, m)).collect();
    let wm1: Vec<Vec<f64>> = ms.iter().map(|&m| norm_weights(spec, m + 1)).collect();
    let n = spec.grid().n_x();
    let mut diff = vec![Complex64::default(); n];
    let mut zn = vec![Complex64::default(); n];
    let (pw, pn) = (w.component(0), wn.component(0));
    let mut out = vec![CoupledError::default(); ms.len()];
    let mut prev: Vec<Option<(f64, f64)>> = vec![None; ms.len()];
    for j in record_indices(w, record_every)? {
        let t = w.grid().t(j);
        let gap = pw[j] - pn[j];
        for k in 0..n {
            let common = model.u0[k] * (t * model.lambda[k] + pn[j] * model.mu[k]).exp();
            diff[k] = common * ((gap * model.mu[k]).exp() - 1.0);
            zn[k] = model.mu[k] * common * gap;
        }
        for i in 0..ms.len() {
            let e = &mut out[i];
            e.sup_err = e.sup_err.max(weighted_sq(&wm[i], &diff).sqrt());
            e.z_n_sup = e.z_n_sup.max(weighted_sq(&wm[i], &zn).sqrt());
            let integrand = weighted_sq(&wm1[i], &diff);
            if let Some((tp, ip)) = prev[i] {
                e.integral_err += 0.5 * (t - tp) * (ip + integrand);
            }
            prev[i] = Some((t, integrand));
        }
    }
    Ok(out)
}
