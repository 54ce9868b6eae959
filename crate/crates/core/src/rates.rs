//! Log-log rate fits and their aggregation across replicas.
//!
//! Rates are reported in κ units: an error behaving like `C n^{-κ}` gives
//! `κ̂ = κ`. Squared quantities (`sup_err²`, the time integral of the squared
//! `H^{m+1}` error) have their slope halved before reporting.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-(replica, n) measurements of one coupled run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub replica: usize,
    pub sup_err: f64,
    pub integral_err: f64,
    pub z_n_sup: f64,
    pub sup_w_err: f64,
    pub sup_a_err: f64,
    pub bn_var: f64,
}

impl ErrorRecord {
    pub const CSV_HEADER: &'static str = "n,replica,sup_err,integral_err,z_n_sup,sup_w_err,sup_a_err,bn_var";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.replica,
            self.sup_err,
            self.integral_err,
            self.z_n_sup,
            self.sup_w_err,
            self.sup_a_err,
            self.bn_var
        )
    }
}

/// Which column of an [`ErrorRecord`] to fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    SupErr,
    SupErrSquared,
    IntegralErr,
    ZnSup,
    SupWErr,
    SupAErr,
    BnVar,
}

impl Quantity {
    pub fn is_squared(self) -> bool {
        matches!(self, Quantity::SupErrSquared | Quantity::IntegralErr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::SupErr => "sup_err",
            Quantity::SupErrSquared => "sup_err_squared",
            Quantity::IntegralErr => "integral_err",
            Quantity::ZnSup => "z_n_sup",
            Quantity::SupWErr => "sup_w_err",
            Quantity::SupAErr => "sup_a_err",
            Quantity::BnVar => "bn_var",
        }
    }

    pub fn extract(self, r: &ErrorRecord) -> f64 {
        match self {
            Quantity::SupErr => r.sup_err,
            Quantity::SupErrSquared => r.sup_err * r.sup_err,
            Quantity::IntegralErr => r.integral_err,
            Quantity::ZnSup => r.z_n_sup,
            Quantity::SupWErr => r.sup_w_err,
            Quantity::SupAErr => r.sup_a_err,
            Quantity::BnVar => r.bn_var,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Estimated exponent, already halved for squared quantities.
    pub kappa: f64,
    /// Raw least-squares slope of `ln error` against `ln n`.
    pub slope: f64,
    pub used: Vec<usize>,
    /// `n` values dropped because their error was not positive.
    pub excluded: Vec<usize>,
}

/// Least-squares slope of `ln error` against `ln n`, reported as `κ̂ = -slope`
/// (or `-slope / 2` when `squared`).
pub fn fit_rate(ns: &[usize], errors: &[f64], squared: bool) -> Result<RateFit> {
    if ns.len() != errors.len() {
        return Err(Error::Mismatch(format!("{} n values for {} errors", ns.len(), errors.len())));
    }
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (&n, &e) in ns.iter().zip(errors) {
        if e > 0.0 && e.is_finite() && n > 0 {
            used.push(n);
            pts.push(((n as f64).ln(), e.ln()));
        } else {
            excluded.push(n);
        }
    }
    let mut distinct = used.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewPoints(distinct.len()));
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let kappa = if squared { -0.5 * slope } else { -slope };
    Ok(RateFit { kappa, slope, used, excluded })
}

/// Fits one replica's records for `quantity`.
pub fn fit_records(records: &[ErrorRecord], quantity: Quantity) -> Result<RateFit> {
    let ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    let es: Vec<f64> = records.iter().map(|r| quantity.extract(r)).collect();
    fit_rate(&ns, &es, quantity.is_squared())
}

/// Summary of per-replica exponents for one quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub quantity: String,
    pub gamma_target: f64,
    pub threshold: f64,
    pub median_kappa: Option<f64>,
    pub iqr: f64,
    pub per_replica: Vec<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RateReport {
    /// Report for a quantity whose fits were all refused.
    pub fn degenerate(quantity: &str, gamma_target: f64, threshold: f64, note: &str) -> Self {
        Self {
            quantity: quantity.to_string(),
            gamma_target,
            threshold,
            median_kappa: None,
            iqr: 0.0,
            per_replica: Vec::new(),
            pass: false,
            note: Some(note.to_string()),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        let s = serde_json::to_string_pretty(self).expect("serialisable report");
        out.write_all(s.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Median and interquartile range of per-replica exponents; passes iff the
/// median reaches `threshold`.
pub fn aggregate(quantity: &str, slopes: &[f64], gamma_target: f64, threshold: f64) -> RateReport {
    if slopes.is_empty() {
        return RateReport::degenerate(quantity, gamma_target, threshold, "no replica produced a fit");
    }
    let mut sorted = slopes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    RateReport {
        quantity: quantity.to_string(),
        gamma_target,
        threshold,
        median_kappa: Some(median),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
        per_replica: slopes.to_vec(),
        pass: median >= threshold,
        note: None,
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BnTrend {
    /// `(n, ‖B_n‖(T) / ln n)`.
    pub ratios: Vec<(usize, f64)>,
    /// Ratios never increase from the smallest to the largest `n`.
    pub monotone: bool,
    /// Ratios strictly decrease from the smallest to the largest `n`.
    pub strictly_decreasing: bool,
}

/// Ratio `‖B_n‖(T) / ln n` per `n`. Evidence for sublogarithmic growth, not a proof of it.
pub fn bn_trend(ns: &[usize], bn_variation: &[f64]) -> BnTrend {
    let mut ratios: Vec<(usize, f64)> = ns.iter().zip(bn_variation).map(|(&n, &b)| (n, b / (n as f64).ln())).collect();
    ratios.sort_by_key(|r| r.0);
    let monotone = ratios.windows(2).all(|w| w[1].1 <= w[0].1);
    let strictly_decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);
    BnTrend { ratios, monotone, strictly_decreasing }
}
