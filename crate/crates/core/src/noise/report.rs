use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{sample_wiener, MultiPath, NoiseBundle, Scheme, TimeGrid};
use crate::error::{Error, Result};
use crate::rates::{bn_trend, fit_rate, BnTrend, RateFit};

/// One row of the noise sweep table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRow {
    pub n: usize,
    pub sup_w_err: f64,
    pub sup_area_err: f64,
    pub bn_variation_max: f64,
    pub bn_over_log_n: f64,
    /// Max of `sup_w_err` over swept `m ≥ n`; a lower bound for the supremum over all `m ≥ n`.
    pub eta_n: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseReport {
    pub scheme: Scheme,
    pub rows: Vec<NoiseRow>,
    pub sup_w_fit: Option<RateFit>,
    pub sup_area_fit: Option<RateFit>,
    pub bn_trend: BnTrend,
}

impl NoiseReport {
    pub const CSV_HEADER: &'static str = "n,sup_w_err,sup_area_err,bn_variation_max,bn_over_log_n,eta_n";

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n, r.sup_w_err, r.sup_area_err, r.bn_variation_max, r.bn_over_log_n, r.eta_n
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Sweep over `n_list` for a freshly sampled Wiener path.
pub fn noise_report(seed: u64, d1: usize, grid: TimeGrid, scheme: Scheme, n_list: &[usize]) -> Result<NoiseReport> {
    let w = sample_wiener(seed, d1, grid)?;
    noise_report_for_path(&w, scheme, n_list)
}

/// Sweep over `n_list` for a given path; every `n` sees the same samples.
pub fn noise_report_for_path(w: &MultiPath, scheme: Scheme, n_list: &[usize]) -> Result<NoiseReport> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty n list".into()));
    }
    for &n in n_list {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("n = {n}: ln n must be positive")));
        }
        if !scheme.admits(w.grid(), n) {
            return Err(Error::InvalidArgument(format!(
                "n = {n} is not admissible for the {scheme} scheme on n_fine = {}",
                w.grid().n_fine()
            )));
        }
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let b = NoiseBundle::build(w.clone(), scheme, n)?;
        let bn = b.bn_variation_max();
        rows.push(NoiseRow {
            n,
            sup_w_err: b.sup_w_err,
            sup_area_err: b.sup_a_err,
            bn_variation_max: bn,
            bn_over_log_n: bn / (n as f64).ln(),
            eta_n: 0.0,
        });
    }
    let eta: Vec<f64> =
        rows.iter().map(|r| rows.iter().filter(|o| o.n >= r.n).map(|o| o.sup_w_err).fold(0.0, f64::max)).collect();
    for (r, e) in rows.iter_mut().zip(eta) {
        r.eta_n = e;
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let sup_w: Vec<f64> = rows.iter().map(|r| r.sup_w_err).collect();
    let sup_a: Vec<f64> = rows.iter().map(|r| r.sup_area_err).collect();
    let bn: Vec<f64> = rows.iter().map(|r| r.bn_variation_max).collect();
    Ok(NoiseReport {
        scheme,
        sup_w_fit: fit_rate(&ns, &sup_w, false).ok(),
        sup_area_fit: fit_rate(&ns, &sup_a, false).ok(),
        bn_trend: bn_trend(&ns, &bn),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_sweep_eta() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let r = noise_report(11, 2, g, Scheme::Polygonal, &[8]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].eta_n, r.rows[0].sup_w_err);
        assert!(r.sup_w_fit.is_none());
    }

    #[test]
    fn linear_path_slope_is_one() {
        let g = TimeGrid::new(1.0, 4096).unwrap();
        let w = MultiPath::from_fn(g, 1, |_, t| t).unwrap();
        let ns = [8, 16, 32, 64, 128];
        let r = noise_report_for_path(&w, Scheme::Polygonal, &ns).unwrap();
        for row in &r.rows {
            assert_eq!(row.sup_w_err, 1.0 / row.n as f64);
        }
        assert!((r.sup_w_fit.as_ref().unwrap().kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_is_monotone_lower_envelope() {
        let g = TimeGrid::new(1.0, 4096).unwrap();
        let r = noise_report(5, 2, g, Scheme::Smoothed, &[8, 16, 32, 64]).unwrap();
        for w in r.rows.windows(2) {
            assert!(w[0].eta_n >= w[1].eta_n);
        }
        for row in &r.rows {
            assert!(row.eta_n >= row.sup_w_err);
        }
    }

    #[test]
    fn rejects_inadmissible_n() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        assert!(noise_report(1, 1, g, Scheme::Polygonal, &[8, 24]).is_err());
        assert!(noise_report(1, 1, g, Scheme::Polygonal, &[]).is_err());
        assert!(noise_report(1, 1, g, Scheme::Polygonal, &[1, 8]).is_err());
    }
}
