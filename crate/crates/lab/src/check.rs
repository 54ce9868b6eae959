//! The invariant suite: noise identities, operator identities, Sobolev norms
//! and solver/oracle agreements, each with a one-line verdict.

use wz_core::grid::{gaussian_bump, GridFunction, SpatialGrid};
use wz_core::noise::{
    polygonal_approx, replica_seed, sample_wiener, smoothed_approx, sn_identity_residual, sup_distance, MultiPath,
    NoiseBundle, PathKind, Scheme, TimeGrid,
};
use wz_core::problem::{apply_m, stratonovich_drift, CoefficientField, ProblemSpec};
use wz_core::solver::{compare_trajectories, oracle_constant, oracle_coupled, SolveRequest, Target};

use crate::config::{ExperimentConfig, ProblemConfig};
use crate::error::LabError;

pub const CHECKS: [&str; 15] = [
    "antisymmetry",
    "knot-property",
    "adaptedness",
    "scaling",
    "sn-identity",
    "parseval",
    "norm-monotonicity",
    "sobolev-examples",
    "integration-by-parts",
    "commutator",
    "ito-drift",
    "factorization",
    "transport-isometry",
    "oracle-agreement",
    "coupling-nullity",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Checks selected by `cfg`, in suite order.
pub fn selected(cfg: &ExperimentConfig) -> Result<Vec<&'static str>, LabError> {
    let Some(names) = &cfg.checks else {
        return Ok(CHECKS.to_vec());
    };
    if names.is_empty() {
        return Err(LabError::Config("no checks selected".into()));
    }
    for n in names {
        if !CHECKS.contains(&n.as_str()) {
            return Err(LabError::Config(format!("unknown check {n:?} (known: {})", CHECKS.join(", "))));
        }
    }
    Ok(CHECKS.iter().copied().filter(|c| names.iter().any(|n| n == c)).collect())
}

/// Runs every selected check. A check that errors counts as failed.
pub fn run_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>, LabError> {
    if let Some(f) = &cfg.fault {
        if !CHECKS.contains(&f.as_str()) {
            return Err(LabError::Config(format!("fault names unknown check {f:?}")));
        }
    }
    let names = selected(cfg)?;
    Ok(names
        .into_iter()
        .map(|name| {
            let faulty = cfg.fault.as_deref() == Some(name);
            let (pass, detail) = match run_one(name, cfg.seed, faulty) {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome { name: name.to_string(), pass, detail }
        })
        .collect())
}

type Verdict = Result<(bool, String), LabError>;

fn run_one(name: &str, seed: u64, faulty: bool) -> Verdict {
    // The fault hook perturbs the quantity under test by this much.
    let fault = if faulty { 1e-3 } else { 0.0 };
    match name {
        "antisymmetry" => antisymmetry(seed, fault),
        "knot-property" => knot_property(seed, fault),
        "adaptedness" => adaptedness(seed, fault),
        "scaling" => scaling(seed, fault),
        "sn-identity" => sn_identity(seed, fault),
        "parseval" => parseval(fault),
        "norm-monotonicity" => norm_monotonicity(fault),
        "sobolev-examples" => sobolev_examples(fault),
        "integration-by-parts" => integration_by_parts(fault),
        "commutator" => commutator(fault),
        "ito-drift" => ito_drift(fault),
        "factorization" => factorization(fault),
        "transport-isometry" => transport_isometry(seed, fault),
        "oracle-agreement" => oracle_agreement(seed, fault),
        "coupling-nullity" => coupling_nullity(seed, fault),
        _ => unreachable!("selection is validated"),
    }
}

fn verdict(defect: f64, tol: f64, what: &str) -> Verdict {
    Ok((defect <= tol, format!("{what} {defect:.3e} (tolerance {tol:.0e})")))
}

fn trig(terms: &[(u32, f64, f64)]) -> CoefficientField {
    CoefficientField::trig(terms)
}

fn antisymmetry(seed: u64, fault: f64) -> Verdict {
    let grid = TimeGrid::new(1.0, 1024)?;
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        let w = sample_wiener(replica_seed(seed, r), 3, grid)?;
        for scheme in [Scheme::Polygonal, Scheme::Smoothed] {
            let b = NoiseBundle::build(w.clone(), scheme, 16)?;
            for a in [&b.area, &b.area_n] {
                for m in 0..a.n_points() {
                    for i in 0..3 {
                        worst = worst.max(a.get(i, i, m).abs());
                        for j in 0..i {
                            let aji = a.get(j, i, m) + if i == 2 && j == 0 { fault } else { 0.0 };
                            worst = worst.max((a.get(i, j, m) + aji).abs());
                        }
                    }
                }
            }
        }
    }
    verdict(worst, 0.0, "max |A^ij + A^ji|")
}

fn knot_property(seed: u64, fault: f64) -> Verdict {
    let grid = TimeGrid::new(2.0, 2048)?;
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        let w = sample_wiener(replica_seed(seed, r), 2, grid)?;
        for n in [4usize, 16, 64] {
            let wn = polygonal_approx(&w, n)?;
            let stride = grid.n_fine() / n;
            for k in 0..2 {
                for i in 0..n {
                    let d = wn.component(k)[(i + 1) * stride] - w.component(k)[i * stride] + fault;
                    worst = worst.max(d.abs());
                }
                worst = worst.max(wn.component(k)[0].abs()).max(wn.component(k)[stride].abs());
            }
        }
    }
    verdict(worst, 0.0, "max |W_n(t_{k+1}) - W(t_k)|")
}

/// Perturbing `W` after a time `s` must leave the approximant unchanged up to
/// `s` (smoothed) or up to the next knot (polygonal).
fn adaptedness(seed: u64, fault: f64) -> Verdict {
    let grid = TimeGrid::new(1.0, 512)?;
    let n = 8;
    let stride = 512 / n;
    let w = sample_wiener(replica_seed(seed, 0), 1, grid)?;
    let mut worst: f64 = 0.0;
    for cut in [1usize, 63, 64, 200, 300, 511] {
        let mut row = w.component(0).to_vec();
        for v in row.iter_mut().skip(cut + 1) {
            *v += 0.7;
        }
        let moved = MultiPath::from_samples(grid, PathKind::Wiener, vec![row])?;
        let (p0, p1) = (polygonal_approx(&w, n)?, polygonal_approx(&moved, n)?);
        let end = ((cut / stride + 1) * stride).min(512);
        for j in 0..=end {
            worst = worst.max((p0.component(0)[j] - p1.component(0)[j]).abs());
        }
        let (s0, s1) = (smoothed_approx(&w, n)?, smoothed_approx(&moved, n)?);
        for j in 0..=cut {
            worst = worst.max((s0.component(0)[j] - s1.component(0)[j] + fault).abs());
        }
    }
    verdict(worst, 0.0, "max change before the perturbation")
}

fn scaling(seed: u64, fault: f64) -> Verdict {
    let grid = TimeGrid::new(1.0, 1024)?;
    let w = sample_wiener(replica_seed(seed, 1), 2, grid)?;
    let mut worst: f64 = 0.0;
    for c in [-2.5, 0.3, 4.0] {
        let cw = w.scaled(c);
        for scheme in [Scheme::Polygonal, Scheme::Smoothed] {
            let b = NoiseBundle::build(w.clone(), scheme, 16)?;
            let cb = NoiseBundle::build(cw.clone(), scheme, 16)?;
            let dw = (cb.sup_w_err - c.abs() * b.sup_w_err).abs() / (1.0 + cb.sup_w_err);
            let da = (cb.sup_a_err - c * c * b.sup_a_err + fault).abs() / (1.0 + cb.sup_a_err);
            worst = worst.max(dw).max(da);
        }
    }
    verdict(worst, 1e-12, "relative scaling defect")
}

/// The discrete residual of the S_n identity is a quadratic-variation
/// error of order `dt^{1/2}`: a fourfold refinement of matched paths must at
/// least nearly halve it.
fn sn_identity(seed: u64, fault: f64) -> Verdict {
    let (mut coarse, mut fine) = (0.0, 0.0);
    for r in 0..8 {
        let w = sample_wiener(replica_seed(seed, 100 + r), 2, TimeGrid::new(1.0, 1 << 16)?)?;
        let wc = w.subsample(4)?;
        let max = |b: &NoiseBundle| sn_identity_residual(b).into_iter().fold(0.0, f64::max);
        fine += max(&NoiseBundle::build(w, Scheme::Polygonal, 16)?);
        coarse += max(&NoiseBundle::build(wc, Scheme::Polygonal, 16)?);
    }
    let ratio = fine / coarse + fault * 1e3;
    Ok((ratio <= 0.6, format!("residual ratio 2^16 vs 2^14 {ratio:.3} (bound 0.6)")))
}

fn test_functions(g: &SpatialGrid) -> Result<Vec<GridFunction>, LabError> {
    Ok(vec![
        gaussian_bump(g, 0.4 * g.length(), 0.05 * g.length(), 1.3)?,
        trig(&[(0, 0.2, 0.0), (1, 0.5, -0.3), (3, 0.1, 0.7)]).evaluate(g)?,
        GridFunction::from_fn(g, |x| (2.0 * std::f64::consts::PI * x / g.length()).sin().exp()),
    ])
}

fn parseval(fault: f64) -> Verdict {
    let mut worst: f64 = 0.0;
    for (n, len) in [(32usize, 2.0 * std::f64::consts::PI), (64, 20.0), (128, 3.5)] {
        let g = SpatialGrid::new(n, len)?;
        for u in test_functions(&g)? {
            for m in 0..4 {
                let s = u.sobolev_norm_sq(m);
                let q = u.sobolev_norm_sq_grid(m) * (1.0 + fault);
                worst = worst.max((s - q).abs() / s.max(1e-300));
            }
            let back = GridFunction::from_spectrum(&g, u.spectrum())?;
            worst = worst.max(back.sub(&u)?.max_abs() / u.max_abs());
        }
    }
    verdict(worst, 1e-12, "relative Parseval defect")
}

fn norm_monotonicity(fault: f64) -> Verdict {
    let g = SpatialGrid::new(64, 20.0)?;
    let mut worst: f64 = f64::INFINITY;
    for u in test_functions(&g)? {
        for m in 0..4 {
            // |u|_{m+1}² - |u|_m² = |D^{m+1} u|_0² ≥ 0
            let gap = u.sobolev_norm_sq(m + 1) - u.sobolev_norm_sq(m) - fault;
            let top = u.derivative(m + 1).sobolev_norm_sq(0);
            worst = worst.min(gap);
            if (gap - top).abs() > 1e-10 * (1.0 + top) {
                return Ok((false, format!("|u|_{}² - |u|_{m}² = {gap:e} but |D^{} u|² = {top:e}", m + 1, m + 1)));
            }
        }
    }
    Ok((worst >= 0.0, format!("min |u|_(m+1)² - |u|_m² = {worst:.3e}")))
}

fn sobolev_examples(fault: f64) -> Verdict {
    use std::f64::consts::PI;
    let g = SpatialGrid::new(32, 2.0 * PI)?;
    let c = GridFunction::constant(&g, 1.7);
    let s = GridFunction::from_fn(&g, f64::sin);
    let s2 = GridFunction::from_fn(&g, |x| (2.0 * x).sin());
    let z = GridFunction::zeros(&g);
    let cases = [
        (c.sobolev_norm_sq(0), 1.7 * 1.7 * 2.0 * PI),
        (c.sobolev_norm_sq(3), 1.7 * 1.7 * 2.0 * PI),
        (s.sobolev_norm_sq(1), 2.0 * PI + fault),
        (s.sobolev_norm_sq(0), PI),
        (z.sobolev_norm_sq(2), 0.0),
        (s.inner(&s2, 0)?, 0.0),
        (s.inner(&s, 2)?, s.sobolev_norm_sq(2)),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs() / (1.0 + b.abs())).fold(0.0, f64::max);
    verdict(worst, 1e-13, "max relative deviation from the closed forms")
}

fn noisy_spec(g: &SpatialGrid) -> Result<ProblemSpec, LabError> {
    Ok(ProblemSpec::builder(g, 2)
        .a(trig(&[(0, 1.0, 0.0), (2, 0.2, 0.1)]))
        .a1(trig(&[(1, 0.0, 0.3)]))
        .a0(CoefficientField::Constant(-0.1))
        .b(vec![trig(&[(0, 0.5, 0.0), (1, 0.3, 0.0)]), trig(&[(0, 0.4, 0.0), (1, 0.0, 0.3)])])
        .b0(vec![trig(&[(1, 0.2, 0.0)]), CoefficientField::Constant(0.1)])
        .f(trig(&[(2, 1.0, 0.0)]).evaluate(g)?)
        .g(vec![trig(&[(1, 0.0, 1.0)]).evaluate(g)?, trig(&[(3, 1.0, 0.0)]).evaluate(g)?])
        .build()?)
}

/// `(M^k u, v) + (u, M^k v) = (m̄_k u, v)` with `m̄_k = 2 b0_k - D b_k`.
fn integration_by_parts(fault: f64) -> Verdict {
    let g = SpatialGrid::new(64, 6.0)?;
    let spec = noisy_spec(&g)?;
    let fs = test_functions(&g)?;
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let mbar = spec.mbar(k)?;
        for u in &fs {
            for v in &fs {
                let lhs = apply_m(&spec, k, u)?.inner_grid(v)? + u.inner_grid(&apply_m(&spec, k, v)?)?;
                let rhs = mbar.mul(u)?.inner_grid(v)? + fault;
                let scale = 1.0 + u.sobolev_norm(1) * v.sobolev_norm(1);
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    verdict(worst, 1e-11, "relative defect")
}

/// Constant fields commute; the two-driver preset does not.
fn commutator(fault: f64) -> Verdict {
    let g = SpatialGrid::new(64, 20.0)?;
    let u = gaussian_bump(&g, 10.0, 1.0, 1.0)?;
    let comm = |spec: &ProblemSpec| -> Result<f64, LabError> {
        let ab = apply_m(spec, 0, &apply_m(spec, 1, &u)?)?;
        let ba = apply_m(spec, 1, &apply_m(spec, 0, &u)?)?;
        Ok(ab.sub(&ba)?.max_abs())
    };
    let flat = ProblemSpec::builder(&g, 2)
        .a(CoefficientField::Constant(1.0))
        .b(vec![CoefficientField::Constant(0.7), CoefficientField::Constant(-1.3)])
        .b0(vec![CoefficientField::Constant(0.2), CoefficientField::Constant(0.5)])
        .u0(u.clone())
        .build()?;
    let twisted =
        ProblemConfig { preset: Some("two-driver-noncommuting".into()), ..ProblemConfig::default() }.build(&g)?;
    let (c0, c1) = (comm(&flat)? + fault, comm(&twisted)?);
    Ok((
        c0 <= 1e-12 && c1 > 1e-3,
        format!("|[M1, M2] u| = {c0:.3e} for constant fields, {c1:.3e} for the two-driver preset"),
    ))
}

/// The expanded Itô-form coefficients reproduce `L u + f + ½ Σ (M M u + M g)`.
fn ito_drift(fault: f64) -> Verdict {
    let g = SpatialGrid::new(64, 2.0 * std::f64::consts::PI)?;
    let spec = noisy_spec(&g)?;
    let c = spec.ito_drift_coefficients();
    let mut worst: f64 = 0.0;
    for u in test_functions(&g)? {
        let (d1, d2) = (u.derivative(1), u.derivative(2));
        let expanded: Vec<f64> = (0..g.n_x())
            .map(|j| {
                c.second.values()[j] * d2.values()[j]
                    + c.first.values()[j] * d1.values()[j]
                    + c.zeroth.values()[j] * u.values()[j]
                    + c.source.values()[j]
            })
            .collect();
        let direct = stratonovich_drift(&spec, &u)?;
        let scale = 1.0 + direct.max_abs();
        for (a, b) in expanded.iter().zip(direct.values()) {
            worst = worst.max((a - b + fault).abs() / scale);
        }
    }
    verdict(worst, 1e-10, "relative defect")
}

fn factorization(fault: f64) -> Verdict {
    let g = SpatialGrid::new(64, 20.0)?;
    let spec = ProblemSpec::builder(&g, 1)
        .sigma(vec![trig(&[(0, 0.6, 0.0), (1, 0.2, 0.1)]), CoefficientField::Constant(0.3)])
        .b(vec![CoefficientField::Constant(0.5)])
        .build()?;
    let res = spec.factorization_residual().unwrap_or(f64::INFINITY) + fault;
    verdict(res, 1e-14, "max |a - Σ σ²|")
}

fn transport_spec(g: &SpatialGrid, b: f64) -> Result<ProblemSpec, LabError> {
    Ok(ProblemSpec::builder(g, 1)
        .sigma(vec![CoefficientField::Constant(0.0)])
        .b(vec![CoefficientField::Constant(b)])
        .u0(gaussian_bump(g, 10.0, 1.0, 1.0)?)
        .build()?)
}

fn transport_isometry(seed: u64, fault: f64) -> Verdict {
    let g = SpatialGrid::new(128, 20.0)?;
    let spec = transport_spec(&g, 1.0)?;
    let w = sample_wiener(replica_seed(seed, 7), 1, TimeGrid::new(1.0, 512)?)?;
    let mut worst: f64 = 0.0;
    for scheme in [Scheme::Polygonal, Scheme::Smoothed] {
        let wn = wz_core::noise::approximate(&w, scheme, 16)?;
        for m in 0..3 {
            let mut req = SolveRequest::new(&spec, &wn, Target::Approximating);
            req.source = Some(&w);
            req.substeps = 4;
            req.record_every = 16;
            req.sobolev_m = m;
            req.keep_states = false;
            let tr = req.run()?;
            let n0 = spec.u0().sobolev_norm(m);
            for &nm in &tr.norms {
                worst = worst.max((nm * (1.0 + fault) - n0).abs() / n0);
            }
        }
    }
    verdict(worst, 1e-9, "max relative norm drift")
}

/// Solver along a frozen `W_n` against the closed form along the same path.
fn oracle_agreement(seed: u64, fault: f64) -> Verdict {
    let g = SpatialGrid::new(128, 20.0)?;
    let spec = ProblemConfig { preset: Some("ou-transport".into()), ..ProblemConfig::default() }.build(&g)?;
    let w = sample_wiener(replica_seed(seed, 11), 1, TimeGrid::new(1.0, 1024)?)?;
    let wn = polygonal_approx(&w, 32)?;
    let mut req = SolveRequest::new(&spec, &wn, Target::Approximating);
    req.source = Some(&w);
    req.substeps = 2;
    req.record_every = 64;
    let solved = req.run()?;
    let exact = oracle_constant(&spec, &wn, 64, 0)?;
    let mut worst: f64 = 0.0;
    for (a, b) in solved.states.iter().zip(&exact.states) {
        worst = worst.max(a.sub(b)?.sobolev_norm(0) + fault);
    }
    verdict(worst, 1e-6, "max H^0 error")
}

/// Coupled errors vanish when the approximant is the path itself.
fn coupling_nullity(seed: u64, fault: f64) -> Verdict {
    let g = SpatialGrid::new(64, 20.0)?;
    let spec = ProblemConfig { preset: Some("heat-multiplicative".into()), ..ProblemConfig::default() }.build(&g)?;
    let w = sample_wiener(replica_seed(seed, 13), 1, TimeGrid::new(1.0, 256)?)?;
    let smooth = MultiPath::from_fn(*w.grid(), 1, |_, t| (3.0 * t).sin())?;
    let mut worst: f64 = 0.0;
    for e in oracle_coupled(&spec, &w, &w, &[0, 1], 8)? {
        worst = worst.max(e.sup_err).max(e.integral_err).max(e.z_n_sup);
    }
    let mut req = SolveRequest::new(&spec, &smooth, Target::Approximating);
    req.record_every = 8;
    let tr = req.run()?;
    for e in compare_trajectories(&spec, &tr, &tr, &smooth, &smooth, &[0, 1])? {
        worst = worst.max(e.sup_err).max(e.integral_err).max(e.z_n_sup);
    }
    worst = worst.max(sup_distance(&w, &w)?) + fault;
    verdict(worst, 0.0, "max coupled error")
}
