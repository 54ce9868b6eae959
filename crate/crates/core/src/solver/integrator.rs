//! Pseudo-spectral method-of-lines machinery shared by both solvers.
//!
//! The state is kept as an unnormalised spectrum. Right-hand sides are
//! assembled in physical space from `u`, `Du` and `D²u` and transformed back.
//! The constant part `c D²` of the diffusion (with `c = min_x` of the
//! diffusion coefficient) is integrated exactly through an integrating factor;
//! everything else goes through the classical four-stage scheme in Lawson form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid};
use crate::noise::Velocity;
use crate::problem::{ProblemSpec, SecondOrderCoefficients};

/// Largest `h ρ` accepted for the explicit stages, below the RK4 stability
/// limits on the real (≈2.785) and imaginary (≈2.828) axes.
pub(crate) const STABILITY_LIMIT: f64 = 2.5;

/// Noise operator `b_k D + b0_k` and free term `g_k` in physical space.
pub(crate) struct NoiseTerm {
    pub b: Vec<f64>,
    pub b0: Vec<f64>,
    pub g: Vec<f64>,
}

impl NoiseTerm {
    pub fn of(spec: &ProblemSpec) -> Vec<NoiseTerm> {
        (0..spec.d1())
            .map(|k| NoiseTerm {
                b: spec.b(k).values().to_vec(),
                b0: spec.b0(k).values().to_vec(),
                g: spec.g(k).values().to_vec(),
            })
            .collect()
    }

    fn bound(&self, xi_max: f64) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        m(&self.b) * xi_max + m(&self.b0)
    }
}

pub(crate) struct Workspace {
    grid: SpatialGrid,
    /// `ik` multipliers (Nyquist zeroed) and `-k²`.
    d1: Vec<Complex64>,
    d2: Vec<f64>,
    /// Integrating-factor diffusivity.
    c_if: f64,
    second: Vec<f64>,
    first: Vec<f64>,
    zeroth: Vec<f64>,
    source: Vec<f64>,
    explicit_second: bool,
    pub noise: Vec<NoiseTerm>,
    buf: Vec<Complex64>,
    buf2: Vec<Complex64>,
    u: Vec<f64>,
    du: Vec<f64>,
    scratch: Vec<Complex64>,
    /// `max |u|` seen at the first stage of the most recent right-hand side evaluation.
    pub last_max_abs: f64,
}

impl Workspace {
    pub fn new(spec: &ProblemSpec, coeffs: SecondOrderCoefficients, with_noise: bool) -> Self {
        let grid = spec.grid().clone();
        let n = grid.n_x();
        let d1 = (0..n).map(|k| grid.derivative_multiplier(k, 1)).collect();
        let d2 = (0..n).map(|k| grid.derivative_multiplier(k, 2).re).collect();
        let c_if = coeffs.second.min().max(0.0);
        let second: Vec<f64> = coeffs.second.values().iter().map(|a| a - c_if).collect();
        let explicit_second = second.iter().any(|&a| a != 0.0);
        Self {
            d1,
            d2,
            c_if,
            second,
            first: coeffs.first.values().to_vec(),
            zeroth: coeffs.zeroth.values().to_vec(),
            source: coeffs.source.values().to_vec(),
            explicit_second,
            noise: if with_noise { NoiseTerm::of(spec) } else { Vec::new() },
            buf: vec![Complex64::default(); n],
            buf2: vec![Complex64::default(); n],
            u: vec![0.0; n],
            du: vec![0.0; n],
            scratch: vec![Complex64::default(); grid.scratch_len()],
            last_max_abs: 0.0,
            grid,
        }
    }

    /// Spectral radius bound of the explicit part given noise-rate magnitudes.
    pub fn explicit_rate_bound(&self, rates: &[f64]) -> f64 {
        let xi = self.grid.max_wavenumber();
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut rho = m(&self.second) * xi * xi + m(&self.first) * xi + m(&self.zeroth);
        for (term, r) in self.noise.iter().zip(rates) {
            rho += r.abs() * term.bound(xi);
        }
        rho
    }

    pub fn check_stability(&self, dt: f64, substeps: usize, rates: &[f64]) -> Result<()> {
        let rho = self.explicit_rate_bound(rates);
        let required = ((dt * rho) / STABILITY_LIMIT).ceil().max(1.0) as usize;
        if substeps < required {
            return Err(Error::StabilityBound { required, given: substeps });
        }
        Ok(())
    }

    /// Integrating factor `exp(-c k² h)` applied in place.
    fn apply_if(&self, v: &mut [Complex64], h: f64) {
        if self.c_if == 0.0 {
            return;
        }
        for (x, d2) in v.iter_mut().zip(&self.d2) {
            *x *= (self.c_if * d2 * h).exp();
        }
    }

    /// Physical `u` and `Du` from a spectrum, plus `max |u|`.
    fn physical_u_du(&mut self, state: &[Complex64]) {
        let n = state.len();
        for k in 0..n {
            // û + i·(ik û): both inverse transforms are real, so they share one complex transform.
            self.buf[k] = state[k] + Complex64::new(0.0, 1.0) * (self.d1[k] * state[k]);
        }
        self.grid.ifft_in_place(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / n as f64;
        let mut max_abs: f64 = 0.0;
        for j in 0..n {
            self.u[j] = self.buf[j].re * scale;
            self.du[j] = self.buf[j].im * scale;
            max_abs = max_abs.max(self.u[j].abs());
        }
        self.last_max_abs = max_abs;
    }

    /// `out = FFT[ second D²u + first Du + zeroth u + source + Σ_k rate_k (b_k Du + b0_k u + g_k) ]`.
    pub fn rhs(&mut self, state: &[Complex64], rates: &[f64], out: &mut [Complex64]) {
        let n = state.len();
        self.physical_u_du(state);
        if self.explicit_second {
            for k in 0..n {
                self.buf2[k] = state[k] * self.d2[k];
            }
            self.grid.ifft_in_place(&mut self.buf2, &mut self.scratch);
        }
        let scale = 1.0 / n as f64;
        let (u, du) = (&self.u, &self.du);
        for j in 0..n {
            let mut r = self.first[j] * du[j] + self.zeroth[j] * u[j] + self.source[j];
            if self.explicit_second {
                r += self.second[j] * self.buf2[j].re * scale;
            }
            for (term, &w) in self.noise.iter().zip(rates) {
                if w != 0.0 {
                    r += w * (term.b[j] * du[j] + term.b0[j] * u[j] + term.g[j]);
                }
            }
            out[j] = Complex64::new(r, 0.0);
        }
        self.grid.fft_in_place(out, &mut self.scratch);
    }

    /// `FFT[ Σ_k (b_k Du + b0_k u + g_k) ΔW^k ]`, the Maruyama increment.
    pub fn noise_increment(&mut self, state: &[Complex64], dw: &[f64], out: &mut [Complex64]) {
        let n = state.len();
        self.physical_u_du(state);
        let (u, du) = (&self.u, &self.du);
        for j in 0..n {
            let mut r = 0.0;
            for (term, &w) in self.noise.iter().zip(dw) {
                r += w * (term.b[j] * du[j] + term.b0[j] * u[j] + term.g[j]);
            }
            out[j] = Complex64::new(r, 0.0);
        }
        self.grid.fft_in_place(out, &mut self.scratch);
    }

    /// One Lawson RK4 step of length `h` from `t`; `rates(t, w)` supplies the noise rates.
    pub fn lawson_step(
        &mut self,
        state: &mut [Complex64],
        t: f64,
        h: f64,
        stages: &mut Stages,
        rates: &mut dyn FnMut(f64, &mut [f64]),
    ) {
        let n = state.len();
        let Stages { k1, k2, k3, k4, tmp, eu, w } = stages;
        rates(t, w);
        self.rhs(state, w, k1);
        let start_max = self.last_max_abs;

        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        self.apply_if(tmp, 0.5 * h);
        rates(t + 0.5 * h, w);
        self.rhs(tmp, w, k2);

        // eu = E(h/2) u
        eu.copy_from_slice(state);
        self.apply_if(eu, 0.5 * h);
        for i in 0..n {
            tmp[i] = eu[i] + 0.5 * h * k2[i];
        }
        self.rhs(tmp, w, k3);

        // E(h) u + h E(h/2) k3, with eu advanced to E(h) u
        self.apply_if(eu, 0.5 * h);
        self.apply_if(k3, 0.5 * h);
        for i in 0..n {
            tmp[i] = eu[i] + h * k3[i];
        }
        rates(t + h, w);
        self.rhs(tmp, w, k4);

        // E(h)u + h/6 (E(h) k1 + 2 E(h/2) k2 + 2 E(h/2) k3 + k4); k3 already carries E(h/2).
        self.apply_if(k1, h);
        self.apply_if(k2, 0.5 * h);
        for i in 0..n {
            state[i] = eu[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        self.last_max_abs = start_max;
    }
}

pub(crate) struct Stages {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
    eu: Vec<Complex64>,
    w: Vec<f64>,
}

impl Stages {
    pub fn new(n: usize, d1: usize) -> Self {
        let z = vec![Complex64::default(); n];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z.clone(), eu: z, w: vec![0.0; d1] }
    }
}

/// Noise rates `dW_n^k/dt` at `t`, on the piece containing `reference`.
pub(crate) fn fill_rates(velocity: &Velocity<'_>, t: f64, reference: f64, out: &mut [f64]) {
    for (k, w) in out.iter_mut().enumerate() {
        *w = velocity.rate(k, t, reference);
    }
}

pub(crate) fn state_function(grid: &SpatialGrid, state: &[Complex64]) -> GridFunction {
    GridFunction::from_spectrum(grid, state).expect("grid-sized spectrum")
}
