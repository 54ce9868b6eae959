//! Named problem blocks. All live on a box of length 20 with a unit-width
//! Gaussian initial datum in the middle.

use crate::config::{DataConfig, FieldConfig, GaussianConfig, ProblemConfig};
use crate::error::LabError;

pub const PRESETS: [&str; 5] =
    ["heat-multiplicative", "ou-transport", "degenerate-transport", "two-driver-noncommuting", "zero-noise"];

pub const DEFAULT_DOMAIN_LENGTH: f64 = 20.0;

fn bump() -> DataConfig {
    DataConfig::Gaussian(GaussianConfig { center: 10.0, width: 1.0, amplitude: 1.0 })
}

fn c(v: f64) -> FieldConfig {
    FieldConfig::Const(v)
}

pub fn preset(name: &str) -> Result<ProblemConfig, LabError> {
    let base = ProblemConfig { u0: Some(bump()), d1: Some(1), ..ProblemConfig::default() };
    Ok(match name {
        "heat-multiplicative" => {
            ProblemConfig { a: Some(c(1.0)), b: Some(vec![c(0.7)]), b0: Some(vec![c(0.2)]), ..base }
        }
        "ou-transport" => ProblemConfig { a: Some(c(0.5)), b: Some(vec![c(0.5)]), b0: Some(vec![c(0.3)]), ..base },
        "degenerate-transport" => {
            ProblemConfig { sigma: Some(vec![c(0.0)]), b: Some(vec![c(1.0)]), b0: Some(vec![c(0.0)]), ..base }
        }
        // The second driver's field is the first one's x-dependent part shifted by a quarter period.
        "two-driver-noncommuting" => ProblemConfig {
            d1: Some(2),
            a: Some(c(0.5)),
            b: Some(vec![
                FieldConfig::Trig(vec![[0.0, 0.5, 0.0], [1.0, 0.3, 0.0]]),
                FieldConfig::Trig(vec![[0.0, 0.5, 0.0], [1.0, 0.0, 0.3]]),
            ]),
            b0: Some(vec![c(0.0), c(0.0)]),
            ..base
        },
        "zero-noise" => ProblemConfig { a: Some(c(0.5)), b: Some(vec![c(0.0)]), b0: Some(vec![c(0.0)]), ..base },
        other => return Err(LabError::Config(format!("unknown preset {other:?} (known: {})", PRESETS.join(", ")))),
    })
}
