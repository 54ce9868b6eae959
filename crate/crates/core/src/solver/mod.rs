//! Time integration of the approximating random PDE and of the Itô-form
//! limit equation, closed-form solutions for constant coefficients, and the
//! coupled error between the two.
//!
//! Both solvers step over the fine grid of the driving path. The random PDE
//! takes `n_substeps` Lawson RK4 steps per fine step with the exact velocity
//! of the approximant. The limit equation advances its deterministic Itô
//! drift in the same way and then adds the Maruyama increment
//! `Σ_k (M^k u + g^k) ΔW^k` of the fine step.

mod coupled;
mod integrator;
mod oracle;

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::noise::{MultiPath, PathKind, Velocity};
use crate::problem::{check_ellipticity, check_parabolicity, ProblemSpec};

use integrator::{fill_rates, state_function, Stages, Workspace};

pub use coupled::{
    compare_trajectories, coupled_error, coupled_error_against, limit_trajectory, oracle_admissible, reference_limit,
    CoupledError, LimitSide, REFERENCE_MODE_FACTOR, REFERENCE_SUBSTEP_FACTOR,
};
pub use oracle::{oracle_constant, oracle_coupled};

/// Blowup sentinel relative to the size of the data.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Which equation a request integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Random PDE driven by the velocity of a finite-variation path.
    Approximating,
    /// Itô form of the Stratonovich limit, driven by the increments of a Wiener path.
    Limit,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveRequest<'a> {
    pub spec: &'a ProblemSpec,
    pub driver: &'a MultiPath,
    /// Wiener path behind a smoothed driver; its velocity is differenced from it.
    pub source: Option<&'a MultiPath>,
    pub target: Target,
    /// Integrator steps per fine step of the driver grid.
    pub substeps: usize,
    /// Record every this many fine steps; the terminal time is always recorded.
    pub record_every: usize,
    pub sobolev_m: u32,
    /// Keep the recorded states, not just their norms.
    pub keep_states: bool,
}

impl<'a> SolveRequest<'a> {
    pub fn new(spec: &'a ProblemSpec, driver: &'a MultiPath, target: Target) -> Self {
        Self { spec, driver, source: None, target, substeps: 1, record_every: 1, sobolev_m: 0, keep_states: true }
    }

    fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("n_substeps must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        if self.driver.d1() != self.spec.d1() {
            return Err(Error::Mismatch(format!(
                "driver has {} components, problem has d1 = {}",
                self.driver.d1(),
                self.spec.d1()
            )));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Trajectory> {
        match self.target {
            Target::Approximating => solve_approximating(self),
            Target::Limit => solve_limit(self),
        }
    }
}

/// Solution records at a subset of fine grid times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Fine grid indices of the records.
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    /// Empty unless states were requested.
    pub states: Vec<GridFunction>,
    /// `|u(t)|_m`.
    pub norms: Vec<f64>,
    /// `|u(t)|_{m+1}`.
    pub norms_next: Vec<f64>,
    /// `max_x |u(t)|`.
    pub max_abs: Vec<f64>,
    pub sobolev_m: u32,
}

impl Trajectory {
    pub const CSV_HEADER: &'static str = "t,norm_m,norm_mp1,max_abs";

    fn new(sobolev_m: u32) -> Self {
        Self {
            indices: Vec::new(),
            times: Vec::new(),
            states: Vec::new(),
            norms: Vec::new(),
            norms_next: Vec::new(),
            max_abs: Vec::new(),
            sobolev_m,
        }
    }

    fn record(&mut self, index: usize, t: f64, state: GridFunction, keep: bool) {
        self.indices.push(index);
        self.times.push(t);
        self.norms.push(state.sobolev_norm(self.sobolev_m));
        self.norms_next.push(state.sobolev_norm(self.sobolev_m + 1));
        self.max_abs.push(state.max_abs());
        if keep {
            self.states.push(state);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> Option<&GridFunction> {
        self.states.last()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for i in 0..self.len() {
            writeln!(out, "{},{},{},{}", self.times[i], self.norms[i], self.norms_next[i], self.max_abs[i])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn blowup_threshold(spec: &ProblemSpec) -> f64 {
    let scale = (0..spec.d1()).map(|k| spec.g(k).max_abs()).fold(spec.u0().max_abs().max(spec.f().max_abs()), f64::max);
    BLOWUP_FACTOR * if scale > 0.0 { scale } else { 1.0 }
}

fn check_blowup(t: f64, max_abs: f64, threshold: f64) -> Result<()> {
    // Written so that NaN also trips the sentinel.
    if !(max_abs <= threshold) {
        return Err(Error::Blowup { t, max_abs, threshold });
    }
    Ok(())
}

fn is_record(j: usize, req: &SolveRequest<'_>) -> bool {
    j.is_multiple_of(req.record_every) || j == req.driver.grid().n_fine()
}

/// Integrates `u̇ = L u + f + Σ_k (M^k u + g^k) Ẇ_n^k` along a finite-variation driver.
pub fn solve_approximating(req: &SolveRequest<'_>) -> Result<Trajectory> {
    req.validate()?;
    let spec = req.spec;
    if req.driver.kind() == PathKind::Wiener {
        return Err(Error::InvalidArgument("the approximating equation needs a finite-variation driver".into()));
    }
    let ell = check_ellipticity(spec);
    if !ell.pass {
        return Err(Error::InvalidArgument(format!("ellipticity fails: min a = {}", ell.lambda_hat)));
    }
    let velocity = Velocity::new(req.driver, req.source)?;
    let grid = *req.driver.grid();
    let d1 = spec.d1();
    let mut ws = Workspace::new(spec, spec.drift_coefficients(), true);
    let bounds: Vec<f64> = (0..d1).map(|k| velocity.max_abs(k)).collect();
    ws.check_stability(grid.dt(), req.substeps, &bounds)?;

    let threshold = blowup_threshold(spec);
    let n = spec.grid().n_x();
    let mut state: Vec<Complex64> = spec.u0().spectrum().to_vec();
    let mut stages = Stages::new(n, d1);
    let mut traj = Trajectory::new(req.sobolev_m);
    traj.record(0, 0.0, spec.u0().clone(), req.keep_states);
    let h = grid.dt() / req.substeps as f64;
    for j in 0..grid.n_fine() {
        let t0 = grid.t(j);
        for s in 0..req.substeps {
            let t = t0 + s as f64 * h;
            let mid = t + 0.5 * h;
            ws.lawson_step(&mut state, t, h, &mut stages, &mut |tt, w| fill_rates(&velocity, tt, mid, w));
            check_blowup(t, ws.last_max_abs, threshold)?;
        }
        if is_record(j + 1, req) {
            let u = state_function(spec.grid(), &state);
            check_blowup(grid.t(j + 1), u.max_abs(), threshold)?;
            traj.record(j + 1, grid.t(j + 1), u, req.keep_states);
        }
    }
    Ok(traj)
}

/// Integrates the Itô form of the limit equation by exponential Euler-Maruyama.
pub fn solve_limit(req: &SolveRequest<'_>) -> Result<Trajectory> {
    req.validate()?;
    let spec = req.spec;
    if req.driver.kind() != PathKind::Wiener {
        return Err(Error::InvalidArgument("the Itô-form limit equation needs a Wiener driver".into()));
    }
    let par = check_parabolicity(spec);
    if !par.pass {
        return Err(Error::InvalidArgument(format!("stochastic parabolicity fails: margin = {}", par.margin)));
    }
    let grid = *req.driver.grid();
    let d1 = spec.d1();
    let mut ws = Workspace::new(spec, spec.ito_drift_coefficients(), true);
    let zero_rates = vec![0.0; d1];
    ws.check_stability(grid.dt(), req.substeps, &zero_rates)?;

    let threshold = blowup_threshold(spec);
    let n = spec.grid().n_x();
    let mut state: Vec<Complex64> = spec.u0().spectrum().to_vec();
    let mut incr = vec![Complex64::default(); n];
    let mut dw = vec![0.0; d1];
    let mut stages = Stages::new(n, d1);
    let mut traj = Trajectory::new(req.sobolev_m);
    traj.record(0, 0.0, spec.u0().clone(), req.keep_states);
    let h = grid.dt() / req.substeps as f64;
    let has_noise = spec.has_noise();
    for j in 0..grid.n_fine() {
        let t0 = grid.t(j);
        if has_noise {
            for (k, x) in dw.iter_mut().enumerate() {
                let row = req.driver.component(k);
                *x = row[j + 1] - row[j];
            }
            ws.noise_increment(&state, &dw, &mut incr);
            check_blowup(t0, ws.last_max_abs, threshold)?;
            for (s, d) in state.iter_mut().zip(&incr) {
                *s += d;
            }
        }
        for s in 0..req.substeps {
            let t = t0 + s as f64 * h;
            ws.lawson_step(&mut state, t, h, &mut stages, &mut |_, w| w.fill(0.0));
            check_blowup(t, ws.last_max_abs, threshold)?;
        }
        if is_record(j + 1, req) {
            let u = state_function(spec.grid(), &state);
            check_blowup(grid.t(j + 1), u.max_abs(), threshold)?;
            traj.record(j + 1, grid.t(j + 1), u, req.keep_states);
        }
    }
    Ok(traj)
}
