//! Pathwise comparison of the approximating and limit solutions on one realization.

use serde::Serialize;

use super::{oracle_coupled, solve_approximating, SolveRequest, Target, Trajectory};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::noise::{MultiPath, NoiseBundle};
use crate::problem::{apply_m, ProblemSpec};

/// Refinement used by [`reference_limit`]: factor on modes and on substeps.
pub const REFERENCE_MODE_FACTOR: usize = 2;
pub const REFERENCE_SUBSTEP_FACTOR: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CoupledError {
    /// `max_t |u_n(t) - u(t)|_m` over the records.
    pub sup_err: f64,
    /// Trapezoidal `∫ |u_n - u|²_{m+1} dt` over the records.
    pub integral_err: f64,
    /// `max_t |Σ_k (M^k u_n + g^k)(W^k - W_n^k)|_m` over the records.
    pub z_n_sup: f64,
}

/// How the limit solution is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitSide {
    /// Closed form when admissible, otherwise [`LimitSide::Solver`].
    Auto,
    Oracle,
    /// [`limit_trajectory`] at the requested resolution.
    Solver,
    /// [`reference_limit`].
    Reference,
}

/// Limit solution along `w` with states kept.
///
/// For a Wiener `w` this is the Itô-form scheme. For a finite-variation `w`
/// the Stratonovich equation is an ordinary random PDE and is solved classically.
pub fn limit_trajectory(
    spec: &ProblemSpec,
    w: &MultiPath,
    substeps: usize,
    record_every: usize,
    sobolev_m: u32,
) -> Result<Trajectory> {
    let target = if w.kind().is_finite_variation() { Target::Approximating } else { Target::Limit };
    let mut req = SolveRequest::new(spec, w, target);
    req.substeps = substeps;
    req.record_every = record_every;
    req.sobolev_m = sobolev_m;
    req.run()
}

/// [`limit_trajectory`] with twice the modes and eight times the substeps.
pub fn reference_limit(
    spec: &ProblemSpec,
    w: &MultiPath,
    substeps: usize,
    record_every: usize,
    sobolev_m: u32,
) -> Result<Trajectory> {
    let fine = spec.refined(REFERENCE_MODE_FACTOR)?;
    limit_trajectory(&fine, w, substeps * REFERENCE_SUBSTEP_FACTOR, record_every, sobolev_m)
}

/// Errors between two trajectories with kept states on the same records,
/// one entry per Sobolev index in `ms`.
///
/// A limit trajectory on a finer spatial grid is projected onto the modes of `approx`.
pub fn compare_trajectories(
    spec: &ProblemSpec,
    approx: &Trajectory,
    limit: &Trajectory,
    w: &MultiPath,
    wn: &MultiPath,
    ms: &[u32],
) -> Result<Vec<CoupledError>> {
    if approx.indices != limit.indices {
        return Err(Error::Mismatch("trajectories are recorded at different times".into()));
    }
    if approx.states.len() != approx.len() || limit.states.len() != limit.len() {
        return Err(Error::InvalidArgument("comparison needs kept states".into()));
    }
    w.check_compatible(wn)?;
    let grid = spec.grid();
    let mut out = vec![CoupledError::default(); ms.len()];
    let mut prev: Vec<Option<(f64, f64)>> = vec![None; ms.len()];
    for i in 0..approx.len() {
        let un = &approx.states[i];
        let u = &limit.states[i];
        let u = if u.grid() == grid { u.clone() } else { u.resample(grid)? };
        let diff = un.sub(&u)?;
        let t = approx.times[i];

        let j = approx.indices[i];
        let mut z = GridFunction::zeros(grid);
        for k in 0..spec.d1() {
            let gap = w.component(k)[j] - wn.component(k)[j];
            if gap != 0.0 {
                let term = apply_m(spec, k, un)?.add(spec.g(k))?;
                z = z.add(&term.scale(gap))?;
            }
        }
        for ((&m, e), p) in ms.iter().zip(out.iter_mut()).zip(prev.iter_mut()) {
            e.sup_err = e.sup_err.max(diff.sobolev_norm(m));
            e.z_n_sup = e.z_n_sup.max(z.sobolev_norm(m));
            let integrand = diff.sobolev_norm_sq(m + 1);
            if let Some((tp, ip)) = *p {
                e.integral_err += 0.5 * (t - tp) * (ip + integrand);
            }
            *p = Some((t, integrand));
        }
    }
    Ok(out)
}

/// Coupled errors for one bundle: `u_n` along `W_n` against `u` along `W`.
pub fn coupled_error(
    spec: &ProblemSpec,
    bundle: &NoiseBundle,
    sobolev_m: u32,
    substeps: usize,
    record_every: usize,
    side: LimitSide,
) -> Result<CoupledError> {
    let use_oracle = match side {
        LimitSide::Oracle => true,
        LimitSide::Auto => oracle_admissible(spec),
        LimitSide::Solver | LimitSide::Reference => false,
    };
    if use_oracle {
        return Ok(oracle_coupled(spec, &bundle.w, &bundle.wn, &[sobolev_m], record_every)?[0]);
    }
    let limit = match side {
        LimitSide::Reference => reference_limit(spec, &bundle.w, substeps, record_every, sobolev_m)?,
        _ => limit_trajectory(spec, &bundle.w, substeps, record_every, sobolev_m)?,
    };
    Ok(coupled_error_against(spec, bundle, &limit, substeps, &[sobolev_m])?[0])
}

/// Coupled errors for one bundle against a precomputed limit trajectory,
/// so that one limit solve serves a whole sweep over `n`.
pub fn coupled_error_against(
    spec: &ProblemSpec,
    bundle: &NoiseBundle,
    limit: &Trajectory,
    substeps: usize,
    ms: &[u32],
) -> Result<Vec<CoupledError>> {
    let record_every = limit.indices.get(1).copied().unwrap_or(1).max(1);
    let mut req = SolveRequest::new(spec, &bundle.wn, Target::Approximating);
    req.source = Some(&bundle.w);
    req.substeps = substeps;
    req.record_every = record_every;
    req.sobolev_m = limit.sobolev_m;
    let approx = solve_approximating(&req)?;
    compare_trajectories(spec, &approx, limit, &bundle.w, &bundle.wn, ms)
}

/// Whether [`oracle_constant`](super::oracle_constant) applies to `spec`.
pub fn oracle_admissible(spec: &ProblemSpec) -> bool {
    spec.d1() == 1
        && spec.constant_coefficients().is_some_and(|c| c[0] >= 0.0)
        && spec.f().max_abs() == 0.0
        && spec.g(0).max_abs() == 0.0
}
