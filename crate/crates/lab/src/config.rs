//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wz_core::grid::{gaussian_bump, GridFunction, SpatialGrid};
use wz_core::noise::{Scheme, TimeGrid};
use wz_core::problem::{CoefficientField, ProblemSpec};

use crate::error::LabError;
use crate::presets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Noise,
    Solve,
    Rates,
    Check,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Noise => "noise",
            Mode::Solve => "solve",
            Mode::Rates => "rates",
            Mode::Check => "check",
        })
    }
}

/// Source of the driving path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathSource {
    #[default]
    Wiener,
    /// `W^k(t) = t` in every component; a deterministic test path.
    Linear,
}

/// How the limit solution is obtained in rate runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitChoice {
    #[default]
    Auto,
    Oracle,
    Solver,
    Reference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_fine: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub n_x: usize,
    pub domain_length: f64,
}

/// One Sobolev index or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SobolevSelection {
    One(u32),
    Many(Vec<u32>),
}

impl Default for SobolevSelection {
    fn default() -> Self {
        SobolevSelection::One(0)
    }
}

impl SobolevSelection {
    pub fn values(&self) -> Vec<u32> {
        match self {
            SobolevSelection::One(m) => vec![*m],
            SobolevSelection::Many(v) => v.clone(),
        }
    }
}

/// A coefficient: `{"const": c}` or `{"trig": [[mode, cos, sin], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldConfig {
    Const(f64),
    Trig(Vec<[f64; 3]>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// A data field (`u0`, `f`, `g`): a coefficient form or a periodic Gaussian bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Const(f64),
    Trig(Vec<[f64; 3]>),
    Gaussian(GaussianConfig),
}

/// Problem block. A `preset` supplies defaults that the other keys override.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<FieldConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<Vec<FieldConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<FieldConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<DataConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<DataConfig>,
}

impl ProblemConfig {
    /// Preset defaults overlaid with the explicit keys.
    pub fn resolved(&self) -> Result<ProblemConfig, LabError> {
        let base = match &self.preset {
            Some(name) => presets::preset(name)?,
            None => ProblemConfig::default(),
        };
        Ok(ProblemConfig {
            preset: self.preset.clone(),
            d1: self.d1.or(base.d1),
            a: self.a.clone().or(base.a),
            a1: self.a1.clone().or(base.a1),
            a0: self.a0.clone().or(base.a0),
            b: self.b.clone().or(base.b),
            b0: self.b0.clone().or(base.b0),
            sigma: self.sigma.clone().or(base.sigma),
            f: self.f.clone().or(base.f),
            g: self.g.clone().or(base.g),
            u0: self.u0.clone().or(base.u0),
        })
    }

    /// Builds the problem on `grid`. Missing coefficients are zero, `d1` defaults to 1.
    pub fn build(&self, grid: &SpatialGrid) -> Result<ProblemSpec, LabError> {
        let r = self.resolved()?;
        let d1 = r.d1.unwrap_or(1);
        let fields = |v: &Option<Vec<FieldConfig>>, what: &str| -> Result<Option<Vec<CoefficientField>>, LabError> {
            match v {
                None => Ok(None),
                Some(list) => {
                    if list.len() != d1 {
                        return Err(LabError::Config(format!("problem.{what} has {} entries, d1 = {d1}", list.len())));
                    }
                    list.iter().map(|f| field(f, what)).collect::<Result<Vec<_>, _>>().map(Some)
                }
            }
        };
        let mut builder = ProblemSpec::builder(grid, d1);
        if let Some(a) = &r.a {
            builder = builder.a(field(a, "a")?);
        }
        if let Some(a1) = &r.a1 {
            builder = builder.a1(field(a1, "a1")?);
        }
        if let Some(a0) = &r.a0 {
            builder = builder.a0(field(a0, "a0")?);
        }
        if let Some(b) = fields(&r.b, "b")? {
            builder = builder.b(b);
        }
        if let Some(b0) = fields(&r.b0, "b0")? {
            builder = builder.b0(b0);
        }
        if let Some(s) = fields(&r.sigma, "sigma")? {
            builder = builder.sigma(s);
        }
        if let Some(f) = &r.f {
            builder = builder.f(data(f, grid, "f")?);
        }
        if let Some(g) = &r.g {
            if g.len() != d1 {
                return Err(LabError::Config(format!("problem.g has {} entries, d1 = {d1}", g.len())));
            }
            builder = builder.g(g.iter().map(|x| data(x, grid, "g")).collect::<Result<_, _>>()?);
        }
        if let Some(u0) = &r.u0 {
            builder = builder.u0(data(u0, grid, "u0")?);
        }
        builder.build().map_err(|e| LabError::Config(format!("problem: {e}")))
    }
}

fn trig_terms(terms: &[[f64; 3]], what: &str) -> Result<Vec<(u32, f64, f64)>, LabError> {
    terms
        .iter()
        .map(|&[m, c, s]| {
            if m < 0.0 || m.fract() != 0.0 || m > u32::MAX as f64 {
                return Err(LabError::Config(format!("problem.{what}: trig mode {m} must be a nonnegative integer")));
            }
            Ok((m as u32, c, s))
        })
        .collect()
}

fn field(f: &FieldConfig, what: &str) -> Result<CoefficientField, LabError> {
    Ok(match f {
        FieldConfig::Const(c) => CoefficientField::Constant(*c),
        FieldConfig::Trig(t) => CoefficientField::trig(&trig_terms(t, what)?),
    })
}

fn data(d: &DataConfig, grid: &SpatialGrid, what: &str) -> Result<GridFunction, LabError> {
    match d {
        DataConfig::Const(c) => Ok(GridFunction::constant(grid, *c)),
        DataConfig::Trig(t) => CoefficientField::trig(&trig_terms(t, what)?)
            .evaluate(grid)
            .map_err(|e| LabError::Config(format!("problem.{what}: {e}"))),
        DataConfig::Gaussian(g) => {
            if !(g.width > 0.0) {
                return Err(LabError::Config(format!("problem.{what}: gaussian width must be positive")));
            }
            gaussian_bump(grid, g.center, g.width, g.amplitude)
                .map_err(|e| LabError::Config(format!("problem.{what}: {e}")))
        }
    }
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicas: usize,
    pub grid: GridConfig,
    pub space: SpaceConfig,
    pub scheme: Scheme,
    pub n_list: Vec<usize>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sobolev_m: SobolevSelection,
    #[serde(default = "default_one")]
    pub n_substeps: usize,
    /// Record solutions every this many fine steps.
    #[serde(default = "default_one")]
    pub record_every: usize,
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub path: PathSource,
    #[serde(default)]
    pub limit: LimitChoice,
    /// Driver count for noise runs; defaults to the problem's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<usize>,
    /// Named checks for check runs; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    /// Directory of cached Wiener paths shared between runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_cache: Option<PathBuf>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Pass threshold on the median exponent; `gamma - 0.1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Test hook: deliberately corrupt the named check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

fn default_gamma() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates; serde errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.replicas == 0 {
            return bad("replicas must be positive".into());
        }
        let tg = self.time_grid()?;
        self.spatial_grid()?;
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_list must be strictly ascending, got {:?}", self.n_list));
        }
        for &n in &self.n_list {
            if n < 2 {
                return bad(format!("n_list entry {n} is below 2"));
            }
            if !self.scheme.admits(&tg, n) {
                return bad(format!(
                    "n = {n} is not admissible for the {} scheme on n_fine = {}",
                    self.scheme, self.grid.n_fine
                ));
            }
        }
        if self.n_substeps == 0 {
            return bad("n_substeps must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        let ms = self.sobolev_m.values();
        if ms.is_empty() {
            return bad("sobolev_m list is empty".into());
        }
        if let Some(d1) = self.d1 {
            if d1 == 0 {
                return bad("d1 must be positive".into());
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        self.problem()?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid, LabError> {
        TimeGrid::new(self.grid.horizon, self.grid.n_fine).map_err(|e| LabError::Config(format!("grid: {e}")))
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid, LabError> {
        SpatialGrid::new(self.space.n_x, self.space.domain_length).map_err(|e| LabError::Config(format!("space: {e}")))
    }

    pub fn problem(&self) -> Result<ProblemSpec, LabError> {
        self.problem.build(&self.spatial_grid()?)
    }

    pub fn driver_count(&self) -> Result<usize, LabError> {
        Ok(match self.d1 {
            Some(d) => d,
            None => self.problem.resolved()?.d1.unwrap_or(1),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(self.gamma - 0.1)
    }

    pub fn sobolev_indices(&self) -> Vec<u32> {
        self.sobolev_m.values()
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serialisable config");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
