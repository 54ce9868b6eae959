//! One linear SPDE instance on the periodic line and its operators
//!
//! ```text
//! L   = a D² + a1 D + a0
//! M^k = b_k D + b0_k
//! ```
//!
//! together with the free terms `f`, `g^k` and the initial datum `u0`. All
//! coefficients are time independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid};

/// `(mode, cos amplitude, sin amplitude)` of `c cos(2π m x / Λ) + s sin(2π m x / Λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub mode: u32,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientField {
    Constant(f64),
    Tabulated(Vec<f64>),
    Trig(Vec<TrigTerm>),
}

impl CoefficientField {
    pub fn zero() -> Self {
        CoefficientField::Constant(0.0)
    }

    pub fn trig(terms: &[(u32, f64, f64)]) -> Self {
        CoefficientField::Trig(terms.iter().map(|&(mode, cos, sin)| TrigTerm { mode, cos, sin }).collect())
    }

    pub fn evaluate(&self, grid: &SpatialGrid) -> Result<GridFunction> {
        match self {
            CoefficientField::Constant(c) => Ok(GridFunction::constant(grid, *c)),
            CoefficientField::Tabulated(v) => {
                if v.len() != grid.n_x() {
                    return Err(Error::Mismatch(format!(
                        "tabulated coefficient has {} values, grid has {} points",
                        v.len(),
                        grid.n_x()
                    )));
                }
                GridFunction::new(grid, v.clone())
            }
            CoefficientField::Trig(terms) => {
                let base = 2.0 * std::f64::consts::PI / grid.length();
                Ok(GridFunction::from_fn(grid, |x| {
                    terms
                        .iter()
                        .map(|t| {
                            let th = base * t.mode as f64 * x;
                            t.cos * th.cos() + t.sin * th.sin()
                        })
                        .sum()
                }))
            }
        }
    }

    /// The constant value, if the field does not depend on `x`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            CoefficientField::Constant(c) => Some(*c),
            CoefficientField::Tabulated(v) => {
                let first = *v.first()?;
                v.iter().all(|&x| x == first).then_some(first)
            }
            CoefficientField::Trig(terms) => {
                let varying = terms.iter().any(|t| t.mode != 0 && (t.cos != 0.0 || t.sin != 0.0));
                (!varying).then(|| terms.iter().filter(|t| t.mode == 0).map(|t| t.cos).sum())
            }
        }
    }

    fn refine(&self, from: &SpatialGrid, to: &SpatialGrid) -> Result<CoefficientField> {
        match self {
            CoefficientField::Tabulated(v) => {
                let u = GridFunction::new(from, v.clone())?.resample(to)?;
                Ok(CoefficientField::Tabulated(u.into_values()))
            }
            other => Ok(other.clone()),
        }
    }
}

/// Coefficient sources plus their values on the grid.
#[derive(Clone, Debug)]
struct Coefficient {
    field: CoefficientField,
    values: GridFunction,
    derivative: GridFunction,
}

impl Coefficient {
    fn new(field: CoefficientField, grid: &SpatialGrid) -> Result<Self> {
        let values = field.evaluate(grid)?;
        let derivative = values.derivative(1);
        Ok(Self { field, values, derivative })
    }
}

/// Builder for [`ProblemSpec`]; unset coefficients and data are zero.
#[derive(Clone, Debug)]
pub struct ProblemBuilder {
    grid: SpatialGrid,
    d1: usize,
    a: Option<CoefficientField>,
    a1: CoefficientField,
    a0: CoefficientField,
    b: Option<Vec<CoefficientField>>,
    b0: Option<Vec<CoefficientField>>,
    sigma: Option<Vec<CoefficientField>>,
    f: Option<GridFunction>,
    g: Option<Vec<GridFunction>>,
    u0: Option<GridFunction>,
}

impl ProblemBuilder {
    pub fn a(mut self, field: CoefficientField) -> Self {
        self.a = Some(field);
        self
    }

    pub fn a1(mut self, field: CoefficientField) -> Self {
        self.a1 = field;
        self
    }

    pub fn a0(mut self, field: CoefficientField) -> Self {
        self.a0 = field;
        self
    }

    pub fn b(mut self, fields: Vec<CoefficientField>) -> Self {
        self.b = Some(fields);
        self
    }

    pub fn b0(mut self, fields: Vec<CoefficientField>) -> Self {
        self.b0 = Some(fields);
        self
    }

    /// Degenerate factorisation `a = Σ_r (σ^r)²`. When `a` is not given it is reconstructed from `σ`.
    pub fn sigma(mut self, fields: Vec<CoefficientField>) -> Self {
        self.sigma = Some(fields);
        self
    }

    pub fn f(mut self, f: GridFunction) -> Self {
        self.f = Some(f);
        self
    }

    pub fn g(mut self, g: Vec<GridFunction>) -> Self {
        self.g = Some(g);
        self
    }

    pub fn u0(mut self, u0: GridFunction) -> Self {
        self.u0 = Some(u0);
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let grid = self.grid;
        let d1 = self.d1;
        if d1 == 0 {
            return Err(Error::InvalidArgument("d1 must be at least 1".into()));
        }
        let per_driver = |v: Option<Vec<CoefficientField>>, name: &str| -> Result<Vec<Coefficient>> {
            let v = v.unwrap_or_else(|| vec![CoefficientField::zero(); d1]);
            if v.len() != d1 {
                return Err(Error::Mismatch(format!("{name} has {} entries for d1 = {d1}", v.len())));
            }
            v.into_iter().map(|f| Coefficient::new(f, &grid)).collect()
        };
        let b = per_driver(self.b, "b")?;
        let b0 = per_driver(self.b0, "b0")?;
        let sigma = match self.sigma {
            Some(s) if s.is_empty() => return Err(Error::InvalidArgument("sigma needs at least one column".into())),
            Some(s) => Some(s.into_iter().map(|f| Coefficient::new(f, &grid)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        let a = match (self.a, &sigma) {
            (Some(field), _) => Coefficient::new(field, &grid)?,
            (None, Some(s)) => {
                let values: Vec<f64> =
                    (0..grid.n_x()).map(|j| s.iter().map(|c| c.values.values()[j].powi(2)).sum()).collect();
                Coefficient::new(CoefficientField::Tabulated(values), &grid)?
            }
            (None, None) => Coefficient::new(CoefficientField::zero(), &grid)?,
        };
        let a1 = Coefficient::new(self.a1, &grid)?;
        let a0 = Coefficient::new(self.a0, &grid)?;
        let check = |u: &GridFunction, name: &str| -> Result<()> {
            if u.grid() != &grid {
                return Err(Error::Mismatch(format!("{name} lives on a different grid")));
            }
            Ok(())
        };
        let f = self.f.unwrap_or_else(|| GridFunction::zeros(&grid));
        check(&f, "f")?;
        let g = self.g.unwrap_or_else(|| vec![GridFunction::zeros(&grid); d1]);
        if g.len() != d1 {
            return Err(Error::Mismatch(format!("g has {} entries for d1 = {d1}", g.len())));
        }
        for gk in &g {
            check(gk, "g")?;
        }
        let u0 = self.u0.unwrap_or_else(|| GridFunction::zeros(&grid));
        check(&u0, "u0")?;
        let spec = ProblemSpec { grid, d1, a, a1, a0, b, b0, sigma, f, g, u0 };
        if let Some(r) = spec.factorization_residual() {
            if r > 1e-12 * (1.0 + spec.a.values.max_abs()) {
                return Err(Error::InvalidArgument(format!(
                    "a does not match the sigma factorisation (max deviation {r:e})"
                )));
            }
        }
        Ok(spec)
    }
}

/// Coefficients, free terms and initial datum of one SPDE instance.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    grid: SpatialGrid,
    d1: usize,
    a: Coefficient,
    a1: Coefficient,
    a0: Coefficient,
    b: Vec<Coefficient>,
    b0: Vec<Coefficient>,
    sigma: Option<Vec<Coefficient>>,
    f: GridFunction,
    g: Vec<GridFunction>,
    u0: GridFunction,
}

/// Coefficients of a second-order operator `second D² + first D + zeroth` plus a source.
#[derive(Clone, Debug)]
pub struct SecondOrderCoefficients {
    pub second: GridFunction,
    pub first: GridFunction,
    pub zeroth: GridFunction,
    pub source: GridFunction,
}

impl ProblemSpec {
    pub fn builder(grid: &SpatialGrid, d1: usize) -> ProblemBuilder {
        ProblemBuilder {
            grid: grid.clone(),
            d1,
            a: None,
            a1: CoefficientField::zero(),
            a0: CoefficientField::zero(),
            b: None,
            b0: None,
            sigma: None,
            f: None,
            g: None,
            u0: None,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn a(&self) -> &GridFunction {
        &self.a.values
    }

    pub fn a1(&self) -> &GridFunction {
        &self.a1.values
    }

    pub fn a0(&self) -> &GridFunction {
        &self.a0.values
    }

    pub fn b(&self, k: usize) -> &GridFunction {
        &self.b[k].values
    }

    pub fn b0(&self, k: usize) -> &GridFunction {
        &self.b0[k].values
    }

    pub fn f(&self) -> &GridFunction {
        &self.f
    }

    pub fn g(&self, k: usize) -> &GridFunction {
        &self.g[k]
    }

    pub fn u0(&self) -> &GridFunction {
        &self.u0
    }

    pub fn has_sigma(&self) -> bool {
        self.sigma.is_some()
    }

    pub fn a_field(&self) -> &CoefficientField {
        &self.a.field
    }

    pub fn b_field(&self, k: usize) -> &CoefficientField {
        &self.b[k].field
    }

    pub fn b0_field(&self, k: usize) -> &CoefficientField {
        &self.b0[k].field
    }

    /// Max deviation of `a` from `Σ_r (σ^r)²`, when a factorisation is present.
    pub fn factorization_residual(&self) -> Option<f64> {
        let sigma = self.sigma.as_ref()?;
        Some(
            (0..self.grid.n_x())
                .map(|j| {
                    let s: f64 = sigma.iter().map(|c| c.values.values()[j].powi(2)).sum();
                    (s - self.a.values.values()[j]).abs()
                })
                .fold(0.0, f64::max),
        )
    }

    /// Whether any noise coefficient or noise free term is nonzero.
    pub fn has_noise(&self) -> bool {
        self.b.iter().chain(&self.b0).any(|c| c.values.max_abs() > 0.0) || self.g.iter().any(|g| g.max_abs() > 0.0)
    }

    /// Constant `(a, a1, a0, b, b0)` when every coefficient is constant and `d1 = 1`.
    pub fn constant_coefficients(&self) -> Option<[f64; 5]> {
        if self.d1 != 1 {
            return None;
        }
        Some([
            self.a.field.as_constant()?,
            self.a1.field.as_constant()?,
            self.a0.field.as_constant()?,
            self.b[0].field.as_constant()?,
            self.b0[0].field.as_constant()?,
        ])
    }

    fn check_driver(&self, k: usize) -> Result<()> {
        if k >= self.d1 {
            return Err(Error::DriverIndex { k, d1: self.d1 });
        }
        Ok(())
    }

    fn check_grid(&self, u: &GridFunction) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::Mismatch("field and problem grids differ".into()));
        }
        Ok(())
    }

    /// Coefficients of `L` with source `f`.
    pub fn drift_coefficients(&self) -> SecondOrderCoefficients {
        SecondOrderCoefficients {
            second: self.a.values.clone(),
            first: self.a1.values.clone(),
            zeroth: self.a0.values.clone(),
            source: self.f.clone(),
        }
    }

    /// Coefficients of the Itô-form drift `L u + f + ½ Σ_k (M^k M^k u + M^k g^k)`,
    /// expanded by the product rule.
    pub fn ito_drift_coefficients(&self) -> SecondOrderCoefficients {
        let n = self.grid.n_x();
        let mut second = self.a.values.values().to_vec();
        let mut first = self.a1.values.values().to_vec();
        let mut zeroth = self.a0.values.values().to_vec();
        let mut source = self.f.values().to_vec();
        for k in 0..self.d1 {
            let b = self.b[k].values.values();
            let db = self.b[k].derivative.values();
            let c = self.b0[k].values.values();
            let dc = self.b0[k].derivative.values();
            let g = self.g[k].values();
            let dg = self.g[k].derivative(1);
            let dg = dg.values();
            for j in 0..n {
                second[j] += 0.5 * b[j] * b[j];
                first[j] += 0.5 * (b[j] * db[j] + 2.0 * b[j] * c[j]);
                zeroth[j] += 0.5 * (b[j] * dc[j] + c[j] * c[j]);
                source[j] += 0.5 * (b[j] * dg[j] + c[j] * g[j]);
            }
        }
        let wrap = |v: Vec<f64>| GridFunction::new(&self.grid, v).expect("grid-sized");
        SecondOrderCoefficients { second: wrap(second), first: wrap(first), zeroth: wrap(zeroth), source: wrap(source) }
    }

    /// The same problem on a grid with `factor` times as many points.
    pub fn refined(&self, factor: usize) -> Result<ProblemSpec> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("refinement factor {factor} must be a power of two")));
        }
        let fine = SpatialGrid::new(self.grid.n_x() * factor, self.grid.length())?;
        let r = |c: &Coefficient| c.field.refine(&self.grid, &fine);
        let rs = |v: &[Coefficient]| v.iter().map(r).collect::<Result<Vec<_>>>();
        let mut builder = ProblemSpec::builder(&fine, self.d1)
            .a1(r(&self.a1)?)
            .a0(r(&self.a0)?)
            .b(rs(&self.b)?)
            .b0(rs(&self.b0)?)
            .f(self.f.resample(&fine)?)
            .g(self.g.iter().map(|g| g.resample(&fine)).collect::<Result<Vec<_>>>()?)
            .u0(self.u0.resample(&fine)?);
        if let Some(s) = &self.sigma {
            builder = builder.sigma(rs(s)?);
        }
        // `a` derived from sigma is tabulated; rebuild it from sigma on the fine grid instead.
        let derived = self.sigma.is_some() && matches!(self.a.field, CoefficientField::Tabulated(_));
        if !derived {
            builder = builder.a(r(&self.a)?);
        }
        builder.build()
    }

    /// `m̄_k = 2 b0_k - D b_k`, the multiplier in `(M^k u, v) + (u, M^k v) = (m̄_k u, v)`.
    pub fn mbar(&self, k: usize) -> Result<GridFunction> {
        self.check_driver(k)?;
        self.b0[k].values.zip_with(&self.b[k].derivative, |c, db| 2.0 * c - db)
    }
}

fn combine(terms: &[(&GridFunction, &GridFunction)]) -> Result<GridFunction> {
    let first = terms[0].1;
    let mut out = vec![0.0; first.values().len()];
    for (c, u) in terms {
        for ((o, a), b) in out.iter_mut().zip(c.values()).zip(u.values()) {
            *o += a * b;
        }
    }
    GridFunction::new(first.grid(), out)
}

/// `L u = a D²u + a1 Du + a0 u` with spectral derivatives.
pub fn apply_l(spec: &ProblemSpec, u: &GridFunction) -> Result<GridFunction> {
    spec.check_grid(u)?;
    let du = u.derivative(1);
    let d2u = u.derivative(2);
    combine(&[(spec.a(), &d2u), (spec.a1(), &du), (spec.a0(), u)])
}

/// `M^k u = b_k Du + b0_k u`.
pub fn apply_m(spec: &ProblemSpec, k: usize, u: &GridFunction) -> Result<GridFunction> {
    spec.check_driver(k)?;
    spec.check_grid(u)?;
    let du = u.derivative(1);
    combine(&[(spec.b(k), &du), (spec.b0(k), u)])
}

/// Itô-form drift of the Stratonovich limit: `L u + f + ½ Σ_k (M^k M^k u + M^k g^k)`.
pub fn stratonovich_drift(spec: &ProblemSpec, u: &GridFunction) -> Result<GridFunction> {
    let mut out = apply_l(spec, u)?.add(spec.f())?;
    for k in 0..spec.d1() {
        let mu = apply_m(spec, k, u)?;
        let mmu = apply_m(spec, k, &mu)?;
        let mg = apply_m(spec, k, spec.g(k))?;
        let corr = mmu.add(&mg)?.scale(0.5);
        out = out.add(&corr)?;
    }
    Ok(out)
}

/// Operator selector bound to a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    L,
    M(usize),
    /// `½ Σ_k M^k M^k`.
    MmCorrection,
    /// `L + ½ Σ_k M^k M^k`.
    LStrat,
}

#[derive(Clone, Copy, Debug)]
pub struct OperatorHandle<'a> {
    spec: &'a ProblemSpec,
    selector: Selector,
}

impl<'a> OperatorHandle<'a> {
    pub fn new(spec: &'a ProblemSpec, selector: Selector) -> Result<Self> {
        if let Selector::M(k) = selector {
            spec.check_driver(k)?;
        }
        Ok(Self { spec, selector })
    }

    pub fn selector(&self) -> Selector {
        self.selector
    }

    /// Applies the (homogeneous) operator to `u`.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        let spec = self.spec;
        let correction = |u: &GridFunction| -> Result<GridFunction> {
            let mut out = GridFunction::zeros(spec.grid());
            for k in 0..spec.d1() {
                let mmu = apply_m(spec, k, &apply_m(spec, k, u)?)?;
                out = out.add(&mmu.scale(0.5))?;
            }
            Ok(out)
        };
        match self.selector {
            Selector::L => apply_l(spec, u),
            Selector::M(k) => apply_m(spec, k, u),
            Selector::MmCorrection => correction(u),
            Selector::LStrat => apply_l(spec, u)?.add(&correction(u)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EllipticityReport {
    /// `min_x a(x)`.
    pub lambda_hat: f64,
    pub pass: bool,
    /// True when `λ̂ = 0` is backed by a `σ` factorisation.
    pub degenerate_factorized: bool,
}

/// Ellipticity of `a`: passes iff `min_x a(x) ≥ 0`.
pub fn check_ellipticity(spec: &ProblemSpec) -> EllipticityReport {
    let lambda_hat = spec.a().min();
    EllipticityReport {
        lambda_hat,
        pass: lambda_hat >= 0.0,
        degenerate_factorized: spec.has_sigma() && lambda_hat >= 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParabolicityReport {
    /// `min_x (𝔞 - ½ Σ_k b_k²)` for the Itô form of the limit equation.
    pub margin: f64,
    pub pass: bool,
    /// `min_x a(x)`; the condition for the approximating equation.
    pub approximating_margin: f64,
    pub approximating_pass: bool,
}

/// `min_x (ito_a - ½ Σ_k b_k²)` for an equation given directly in Itô form.
pub fn ito_parabolicity_margin(ito_a: &GridFunction, b: &[&GridFunction]) -> f64 {
    (0..ito_a.values().len())
        .map(|j| ito_a.values()[j] - 0.5 * b.iter().map(|bk| bk.values()[j].powi(2)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Stochastic parabolicity of the Stratonovich limit written in Itô form,
/// where the diffusion is `𝔞 = a + ½ Σ_k b_k²`.
pub fn check_parabolicity(spec: &ProblemSpec) -> ParabolicityReport {
    let b: Vec<&GridFunction> = (0..spec.d1()).map(|k| spec.b(k)).collect();
    let ito_a = spec.ito_drift_coefficients().second;
    let margin = ito_parabolicity_margin(&ito_a, &b);
    // The Itô diffusion reconstructs a up to rounding.
    let margin = if margin.abs() < 1e-14 * (1.0 + ito_a.max_abs()) { 0.0 } else { margin };
    let approximating_margin = spec.a().min();
    ParabolicityReport {
        margin,
        pass: margin >= 0.0,
        approximating_margin,
        approximating_pass: approximating_margin >= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gaussian_bump;
    use std::f64::consts::PI;

    fn grid2pi(n: usize) -> SpatialGrid {
        SpatialGrid::new(n, 2.0 * PI).unwrap()
    }

    fn close(a: &GridFunction, b: &GridFunction, tol: f64) {
        let d = a.sub(b).unwrap().max_abs();
        assert!(d < tol, "max deviation {d:e}");
    }

    #[test]
    fn laplacian_of_first_mode() {
        let l = 7.0;
        let g = SpatialGrid::new(64, l).unwrap();
        let spec = ProblemSpec::builder(&g, 1).a(CoefficientField::Constant(1.0)).build().unwrap();
        let k = 2.0 * PI / l;
        let u = GridFunction::from_fn(&g, |x| (k * x).sin());
        let expected = u.scale(-k * k);
        close(&apply_l(&spec, &u).unwrap(), &expected, 1e-12);
        assert_eq!(apply_l(&spec, &GridFunction::zeros(&g)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn zeroth_order_identity() {
        let g = grid2pi(32);
        let spec = ProblemSpec::builder(&g, 1).a0(CoefficientField::Constant(1.0)).build().unwrap();
        let u = GridFunction::from_fn(&g, |x| x.sin() + 0.2);
        close(&apply_l(&spec, &u).unwrap(), &u, 1e-14);
    }

    #[test]
    fn m_operator_examples() {
        let g = grid2pi(32);
        let spec = ProblemSpec::builder(&g, 2)
            .b(vec![CoefficientField::Constant(1.0), CoefficientField::zero()])
            .b0(vec![CoefficientField::zero(), CoefficientField::Constant(3.0)])
            .build()
            .unwrap();
        let u = GridFunction::from_fn(&g, f64::sin);
        close(&apply_m(&spec, 0, &u).unwrap(), &GridFunction::from_fn(&g, f64::cos), 1e-13);
        close(&apply_m(&spec, 1, &u).unwrap(), &u.scale(3.0), 1e-14);
        assert!(matches!(apply_m(&spec, 2, &u), Err(Error::DriverIndex { k: 2, d1: 2 })));
    }

    #[test]
    fn m_with_varying_coefficient_matches_product_rule() {
        // b = 1 + 0.5 cos x, u = sin 2x  ⇒  M u = (1 + 0.5 cos x) 2 cos 2x
        let g = grid2pi(64);
        let spec = ProblemSpec::builder(&g, 1)
            .b(vec![CoefficientField::trig(&[(0, 1.0, 0.0), (1, 0.5, 0.0)])])
            .build()
            .unwrap();
        let u = GridFunction::from_fn(&g, |x| (2.0 * x).sin());
        let expected = GridFunction::from_fn(&g, |x| (1.0 + 0.5 * x.cos()) * 2.0 * (2.0 * x).cos());
        close(&apply_m(&spec, 0, &u).unwrap(), &expected, 1e-12);
    }

    #[test]
    fn drift_examples() {
        let g = grid2pi(32);
        let u = GridFunction::from_fn(&g, f64::sin);
        // b constant, everything else zero: ½ b² D²u
        let spec = ProblemSpec::builder(&g, 1).b(vec![CoefficientField::Constant(0.8)]).build().unwrap();
        close(&stratonovich_drift(&spec, &u).unwrap(), &u.scale(-0.5 * 0.64), 1e-13);
        // no noise: L u + f
        let f = GridFunction::from_fn(&g, f64::cos);
        let spec = ProblemSpec::builder(&g, 1).a(CoefficientField::Constant(2.0)).f(f.clone()).build().unwrap();
        close(&stratonovich_drift(&spec, &u).unwrap(), &u.scale(-2.0).add(&f).unwrap(), 1e-13);
        // b = b0 = 1: ½ (D + 1)² sin = ½ (-sin + 2 cos + sin) = cos
        let spec = ProblemSpec::builder(&g, 1)
            .b(vec![CoefficientField::Constant(1.0)])
            .b0(vec![CoefficientField::Constant(1.0)])
            .build()
            .unwrap();
        close(&stratonovich_drift(&spec, &u).unwrap(), &GridFunction::from_fn(&g, f64::cos), 1e-13);
    }

    #[test]
    fn expanded_ito_coefficients_match_operator_composition() {
        let g = SpatialGrid::new(128, 2.0 * PI).unwrap();
        let spec = ProblemSpec::builder(&g, 2)
            .a(CoefficientField::trig(&[(0, 1.0, 0.0), (2, 0.2, 0.1)]))
            .a1(CoefficientField::trig(&[(1, 0.0, 0.3)]))
            .a0(CoefficientField::Constant(-0.1))
            .b(vec![
                CoefficientField::trig(&[(0, 0.5, 0.0), (1, 0.3, 0.0)]),
                CoefficientField::trig(&[(0, 0.4, 0.0), (1, 0.0, 0.3)]),
            ])
            .b0(vec![CoefficientField::trig(&[(1, 0.2, 0.0)]), CoefficientField::Constant(0.1)])
            .f(GridFunction::from_fn(&g, |x| (2.0 * x).cos()))
            .g(vec![GridFunction::from_fn(&g, |x| x.sin()), GridFunction::from_fn(&g, |x| (3.0 * x).cos())])
            .build()
            .unwrap();
        let u = GridFunction::from_fn(&g, |x| (x.sin()).exp());
        let c = spec.ito_drift_coefficients();
        let expanded = combine(&[(&c.second, &u.derivative(2)), (&c.first, &u.derivative(1)), (&c.zeroth, &u)])
            .unwrap()
            .add(&c.source)
            .unwrap();
        close(&stratonovich_drift(&spec, &u).unwrap(), &expanded, 1e-10);
    }

    #[test]
    fn ellipticity_examples() {
        let g = grid2pi(32);
        let ok = ProblemSpec::builder(&g, 1).a(CoefficientField::Constant(1.0)).build().unwrap();
        let r = check_ellipticity(&ok);
        assert_eq!(r.lambda_hat, 1.0);
        assert!(r.pass);
        let bad = ProblemSpec::builder(&g, 1).a(CoefficientField::trig(&[(1, 0.0, 1.0)])).build().unwrap();
        let r = check_ellipticity(&bad);
        assert!((r.lambda_hat + 1.0).abs() < 1e-12);
        assert!(!r.pass);
        let deg = ProblemSpec::builder(&g, 1).sigma(vec![CoefficientField::zero()]).build().unwrap();
        let r = check_ellipticity(&deg);
        assert_eq!(r.lambda_hat, 0.0);
        assert!(r.pass && r.degenerate_factorized);
    }

    #[test]
    fn parabolicity_examples() {
        let g = grid2pi(32);
        let spec = ProblemSpec::builder(&g, 1)
            .a(CoefficientField::Constant(1.0))
            .b(vec![CoefficientField::Constant(1.0)])
            .build()
            .unwrap();
        let r = check_parabolicity(&spec);
        assert_eq!(r.margin, 1.0);
        assert!(r.pass);
        let spec = ProblemSpec::builder(&g, 1).b(vec![CoefficientField::Constant(1.0)]).build().unwrap();
        let r = check_parabolicity(&spec);
        assert_eq!(r.margin, 0.0);
        assert!(r.pass);
        // Itô form with 𝔞 = 0 and b = 1.
        let zero = GridFunction::zeros(&g);
        let one = GridFunction::constant(&g, 1.0);
        assert_eq!(ito_parabolicity_margin(&zero, &[&one]), -0.5);
    }

    #[test]
    fn factorization_consistency() {
        let g = grid2pi(32);
        let sigma = vec![CoefficientField::trig(&[(0, 0.5, 0.0), (1, 0.2, 0.0)]), CoefficientField::Constant(0.3)];
        let spec = ProblemSpec::builder(&g, 1).sigma(sigma.clone()).build().unwrap();
        assert!(spec.factorization_residual().unwrap() < 1e-15);
        let bad = ProblemSpec::builder(&g, 1).sigma(sigma).a(CoefficientField::Constant(1.0)).build();
        assert!(bad.is_err());
    }

    #[test]
    fn constant_detection_and_refinement() {
        let g = SpatialGrid::new(64, 20.0).unwrap();
        let spec = ProblemSpec::builder(&g, 1)
            .a(CoefficientField::Constant(0.5))
            .b(vec![CoefficientField::trig(&[(0, 0.5, 0.0)])])
            .b0(vec![CoefficientField::Constant(0.3)])
            .u0(gaussian_bump(&g, 10.0, 1.0, 1.0).unwrap())
            .build()
            .unwrap();
        assert_eq!(spec.constant_coefficients(), Some([0.5, 0.0, 0.0, 0.5, 0.3]));
        let fine = spec.refined(2).unwrap();
        assert_eq!(fine.grid().n_x(), 128);
        let direct = gaussian_bump(fine.grid(), 10.0, 1.0, 1.0).unwrap();
        close(fine.u0(), &direct, 1e-12);
        let two = ProblemSpec::builder(&g, 2).build().unwrap();
        assert!(two.constant_coefficients().is_none());
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let g = grid2pi(32);
        assert!(ProblemSpec::builder(&g, 2).b(vec![CoefficientField::zero()]).build().is_err());
        assert!(ProblemSpec::builder(&g, 1).a(CoefficientField::Tabulated(vec![1.0; 16])).build().is_err());
        let other = grid2pi(64);
        assert!(ProblemSpec::builder(&g, 1).u0(GridFunction::zeros(&other)).build().is_err());
        assert!(ProblemSpec::builder(&g, 0).build().is_err());
    }

    #[test]
    fn operator_handles() {
        let g = grid2pi(32);
        let spec = ProblemSpec::builder(&g, 1)
            .a(CoefficientField::Constant(1.0))
            .b(vec![CoefficientField::Constant(1.0)])
            .build()
            .unwrap();
        let u = GridFunction::from_fn(&g, f64::sin);
        let l = OperatorHandle::new(&spec, Selector::LStrat).unwrap().apply(&u).unwrap();
        close(&l, &u.scale(-1.5), 1e-13);
        assert!(OperatorHandle::new(&spec, Selector::M(1)).is_err());
    }
}
