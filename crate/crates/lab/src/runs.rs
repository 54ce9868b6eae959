//! The noise, solve and rates runs.
//!
//! Replicas are independent cells. They are computed on the worker pool and
//! collected in replica order, then written by the calling thread, so outputs
//! do not depend on the number of threads.

use rayon::prelude::*;
use serde::Serialize;

use wz_core::noise::{noise_report_for_path, MultiPath, NoiseBundle, NoiseReport};
use wz_core::problem::{check_ellipticity, check_parabolicity, ProblemSpec};
use wz_core::rates::{aggregate, fit_records, ErrorRecord, Quantity, RateReport};
use wz_core::solver::{
    coupled_error_against, limit_trajectory, oracle_admissible, oracle_coupled, reference_limit, CoupledError,
    SolveRequest, Target, Trajectory,
};

use crate::config::{ExperimentConfig, LimitChoice};
use crate::error::{is_instability, LabError};
use crate::manifest::{CellStatus, OutputDir};
use crate::paths::replica_path;

/// Errors at or below this multiple of `|u0|_m` count as exact matches.
pub const MISMATCH_FLOOR: f64 = 1e-10;

/// What a run reports back besides its files.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub pass: bool,
    pub instability: bool,
    pub lines: Vec<String>,
    pub cells: Vec<CellStatus>,
}

fn report_line(r: &RateReport) -> String {
    match r.median_kappa {
        Some(k) => format!(
            "{} {}: median kappa {k:.4} (IQR {:.4}, {} replicas, threshold {})",
            if r.pass { "PASS" } else { "FAIL" },
            r.quantity,
            r.iqr,
            r.per_replica.len(),
            r.threshold
        ),
        None => format!("DEGENERATE {}: {}", r.quantity, r.note.as_deref().unwrap_or("no fit")),
    }
}

#[derive(Serialize)]
struct BnTrendEntry<'a> {
    replica: usize,
    ratios: &'a [(usize, f64)],
    monotone: bool,
    strictly_decreasing: bool,
}

#[derive(Serialize)]
struct BnTrendSummary<'a> {
    replicas: usize,
    strictly_decreasing: usize,
    monotone: usize,
    per_replica: Vec<BnTrendEntry<'a>>,
}

pub fn run_noise(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<RunSummary, LabError> {
    let d1 = cfg.driver_count()?;
    let reports: Vec<Result<NoiseReport, LabError>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let w = replica_path(cfg, r, d1)?;
            Ok(noise_report_for_path(&w, cfg.scheme, &cfg.n_list)?)
        })
        .collect();
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut summary = RunSummary::default();
    for (r, rep) in reports.iter().enumerate() {
        rep.write_csv(&out.file(&format!("noise/replica_{r:04}.csv"))?)?;
        summary.cells.push(CellStatus::ok(r, None));
    }
    let gamma = cfg.gamma;
    let thr = cfg.threshold();
    let sup_w: Vec<f64> = reports.iter().filter_map(|r| r.sup_w_fit.as_ref().map(|f| f.kappa)).collect();
    let mut rate_reports = vec![("rate_sup_w_err.json", aggregate("sup_w_err", &sup_w, gamma, thr))];
    if d1 >= 2 {
        let sup_a: Vec<f64> = reports.iter().filter_map(|r| r.sup_area_fit.as_ref().map(|f| f.kappa)).collect();
        rate_reports.push(("rate_sup_area_err.json", aggregate("sup_area_err", &sup_a, gamma, thr)));
    }
    summary.pass = true;
    for (file, rep) in &rate_reports {
        rep.write_json(&out.file(file)?)?;
        summary.lines.push(report_line(rep));
        if rep.median_kappa.is_some() && !rep.pass {
            summary.pass = false;
        }
    }

    let per_replica: Vec<BnTrendEntry> = reports
        .iter()
        .enumerate()
        .map(|(r, rep)| BnTrendEntry {
            replica: r,
            ratios: &rep.bn_trend.ratios,
            monotone: rep.bn_trend.monotone,
            strictly_decreasing: rep.bn_trend.strictly_decreasing,
        })
        .collect();
    let trend = BnTrendSummary {
        replicas: reports.len(),
        strictly_decreasing: per_replica.iter().filter(|e| e.strictly_decreasing).count(),
        monotone: per_replica.iter().filter(|e| e.monotone).count(),
        per_replica,
    };
    summary.lines.push(format!(
        "INFO bn_trend: ||B_n||(T)/ln n strictly decreasing in {} of {} replicas",
        trend.strictly_decreasing, trend.replicas
    ));
    let mut text = serde_json::to_string_pretty(&trend)?;
    text.push('\n');
    std::fs::write(out.file("bn_trend.json")?, text)?;
    Ok(summary)
}

fn validated_problem(cfg: &ExperimentConfig) -> Result<ProblemSpec, LabError> {
    let spec = cfg.problem()?;
    let ell = check_ellipticity(&spec);
    if !ell.pass {
        return Err(LabError::Config(format!("problem fails ellipticity: min a = {}", ell.lambda_hat)));
    }
    let par = check_parabolicity(&spec);
    if !par.pass {
        return Err(LabError::Config(format!("problem fails stochastic parabolicity: margin = {}", par.margin)));
    }
    Ok(spec)
}

/// One replica of a solve run: the limit trajectory and one approximating trajectory per `n`.
struct SolveReplica {
    limit: Result<Trajectory, wz_core::Error>,
    approx: Vec<Result<Trajectory, wz_core::Error>>,
}

fn limit_for(cfg: &ExperimentConfig, spec: &ProblemSpec, w: &MultiPath, m: u32) -> Result<Trajectory, wz_core::Error> {
    match cfg.limit {
        LimitChoice::Oracle => wz_core::solver::oracle_constant(spec, w, cfg.record_every, m),
        LimitChoice::Auto if oracle_admissible(spec) => wz_core::solver::oracle_constant(spec, w, cfg.record_every, m),
        LimitChoice::Reference => reference_limit(spec, w, cfg.n_substeps, cfg.record_every, m),
        _ => limit_trajectory(spec, w, cfg.n_substeps, cfg.record_every, m),
    }
}

pub fn run_solve(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<RunSummary, LabError> {
    let spec = validated_problem(cfg)?;
    let m = cfg.sobolev_indices()[0];
    let results: Vec<Result<SolveReplica, LabError>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let w = replica_path(cfg, r, spec.d1())?;
            let limit = limit_for(cfg, &spec, &w, m);
            let approx = cfg
                .n_list
                .iter()
                .map(|&n| {
                    let wn = wz_core::noise::approximate(&w, cfg.scheme, n)?;
                    let mut req = SolveRequest::new(&spec, &wn, Target::Approximating);
                    req.source = Some(&w);
                    req.substeps = cfg.n_substeps;
                    req.record_every = cfg.record_every;
                    req.sobolev_m = m;
                    req.run()
                })
                .collect();
            Ok(SolveReplica { limit, approx })
        })
        .collect();

    let mut summary = RunSummary { pass: true, ..RunSummary::default() };
    let note =
        |summary: &mut RunSummary, r: usize, n: Option<usize>, res: &Result<Trajectory, wz_core::Error>| match res {
            Ok(_) => summary.cells.push(CellStatus::ok(r, n)),
            Err(e) => {
                summary.pass = false;
                summary.instability |= is_instability(e);
                summary.cells.push(CellStatus::aborted(r, n, e.to_string()));
                let which = n.map_or("limit".to_string(), |n| format!("n = {n}"));
                summary.lines.push(format!("FAIL replica {r} {which}: {e}"));
            }
        };
    for (r, rep) in results.into_iter().enumerate() {
        let rep = rep?;
        note(&mut summary, r, None, &rep.limit);
        if let Ok(tr) = &rep.limit {
            tr.write_csv(&out.file(&format!("solve/replica_{r:04}/limit.csv"))?)?;
            if let Some(u) = tr.terminal() {
                u.write_csv(&out.file(&format!("solve/replica_{r:04}/limit_terminal.csv"))?)?;
            }
        }
        for (&n, res) in cfg.n_list.iter().zip(&rep.approx) {
            note(&mut summary, r, Some(n), res);
            if let Ok(tr) = res {
                tr.write_csv(&out.file(&format!("solve/replica_{r:04}/approx_n{n}.csv"))?)?;
                if let Some(u) = tr.terminal() {
                    u.write_csv(&out.file(&format!("solve/replica_{r:04}/approx_n{n}_terminal.csv"))?)?;
                }
            }
        }
    }
    let ok = summary.cells.iter().filter(|c| c.detail.is_none()).count();
    summary.lines.push(format!("INFO solve: {ok} of {} trajectories completed", summary.cells.len()));
    Ok(summary)
}

/// Per-replica coupled errors: one row of records per Sobolev index, plus cell statuses.
struct RatesReplica {
    records: Vec<Vec<ErrorRecord>>,
    cells: Vec<CellStatus>,
    instability: bool,
}

fn rates_replica(
    cfg: &ExperimentConfig,
    spec: &ProblemSpec,
    ms: &[u32],
    use_oracle: bool,
    r: usize,
) -> Result<RatesReplica, LabError> {
    let w = replica_path(cfg, r, spec.d1())?;
    let mut out = RatesReplica { records: vec![Vec::new(); ms.len()], cells: Vec::new(), instability: false };
    let limit = if use_oracle {
        None
    } else {
        let res = match cfg.limit {
            LimitChoice::Reference => reference_limit(spec, &w, cfg.n_substeps, cfg.record_every, ms[0]),
            _ => limit_trajectory(spec, &w, cfg.n_substeps, cfg.record_every, ms[0]),
        };
        match res {
            Ok(tr) => Some(tr),
            Err(e) => {
                out.instability = is_instability(&e);
                for &n in &cfg.n_list {
                    out.cells.push(CellStatus::aborted(r, Some(n), format!("limit solve: {e}")));
                }
                return Ok(out);
            }
        }
    };
    for &n in &cfg.n_list {
        let bundle = NoiseBundle::build(w.clone(), cfg.scheme, n)?;
        let errs: Result<Vec<CoupledError>, wz_core::Error> = match &limit {
            None => oracle_coupled(spec, &bundle.w, &bundle.wn, ms, cfg.record_every),
            Some(tr) => coupled_error_against(spec, &bundle, tr, cfg.n_substeps, ms),
        };
        match errs {
            Ok(errs) => {
                for (i, e) in errs.iter().enumerate() {
                    out.records[i].push(ErrorRecord {
                        n,
                        replica: r,
                        sup_err: e.sup_err,
                        integral_err: e.integral_err,
                        z_n_sup: e.z_n_sup,
                        sup_w_err: bundle.sup_w_err,
                        sup_a_err: bundle.sup_a_err,
                        bn_var: bundle.bn_variation_max(),
                    });
                }
                out.cells.push(CellStatus::ok(r, Some(n)));
            }
            Err(e) => {
                out.instability |= is_instability(&e);
                out.cells.push(CellStatus::aborted(r, Some(n), e.to_string()));
            }
        }
    }
    Ok(out)
}

/// Per-replica exponents for `quantity`; errors at the mismatch floor are excluded.
fn replica_slopes(records: &[ErrorRecord], replicas: usize, quantity: Quantity, floor: f64) -> Vec<f64> {
    (0..replicas)
        .filter_map(|r| {
            let mine: Vec<ErrorRecord> = records
                .iter()
                .filter(|rec| rec.replica == r)
                .map(|rec| {
                    let mut rec = rec.clone();
                    let limit = if quantity.is_squared() { floor * floor } else { floor };
                    if quantity.extract(&rec) <= limit {
                        rec.sup_err = 0.0;
                        rec.integral_err = 0.0;
                        rec.z_n_sup = 0.0;
                    }
                    rec
                })
                .collect();
            fit_records(&mine, quantity).ok().map(|f| f.kappa)
        })
        .collect()
}

pub fn run_rates(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<RunSummary, LabError> {
    let spec = validated_problem(cfg)?;
    let ms = cfg.sobolev_indices();
    let use_oracle = match cfg.limit {
        LimitChoice::Oracle => {
            if !oracle_admissible(&spec) {
                return Err(LabError::Config(
                    "limit = oracle needs constant coefficients, d1 = 1 and f = g = 0".into(),
                ));
            }
            true
        }
        LimitChoice::Auto => oracle_admissible(&spec),
        LimitChoice::Solver | LimitChoice::Reference => false,
    };
    let degenerate = check_ellipticity(&spec).lambda_hat <= 0.0;
    let results: Vec<Result<RatesReplica, LabError>> =
        (0..cfg.replicas).into_par_iter().map(|r| rates_replica(cfg, &spec, &ms, use_oracle, r)).collect();
    let mut records: Vec<Vec<ErrorRecord>> = vec![Vec::new(); ms.len()];
    let mut summary = RunSummary { pass: true, ..RunSummary::default() };
    for rep in results {
        let rep = rep?;
        for (all, mine) in records.iter_mut().zip(rep.records) {
            all.extend(mine);
        }
        summary.instability |= rep.instability;
        summary.cells.extend(rep.cells);
    }
    let aborted = summary.cells.iter().filter(|c| c.detail.is_some()).count();
    if aborted > 0 {
        summary.lines.push(format!("WARN {aborted} cells aborted and excluded from fits"));
    }

    let gamma = cfg.gamma;
    let thr = cfg.threshold();
    for (i, &m) in ms.iter().enumerate() {
        let path = out.file(&format!("errors_m{m}.csv"))?;
        let mut text = String::from(ErrorRecord::CSV_HEADER);
        text.push('\n');
        for rec in &records[i] {
            text.push_str(&rec.csv_row());
            text.push('\n');
        }
        std::fs::write(path, text)?;

        let floor = MISMATCH_FLOOR * spec.u0().sobolev_norm(m).max(f64::MIN_POSITIVE);
        let mut quantities = vec![Quantity::SupErr];
        if !degenerate {
            quantities.push(Quantity::IntegralErr);
        }
        for q in quantities {
            let name = format!("{}_m{m}", q.name());
            let slopes = replica_slopes(&records[i], cfg.replicas, q, floor);
            let report = if slopes.is_empty() {
                RateReport::degenerate(
                    &name,
                    gamma,
                    thr,
                    "fit refused: errors at the solver-mismatch floor or too few points",
                )
            } else {
                aggregate(&name, &slopes, gamma, thr)
            };
            report.write_json(&out.file(&format!("rate_{name}.json"))?)?;
            summary.lines.push(report_line(&report));
            if report.median_kappa.is_some() && !report.pass {
                summary.pass = false;
            }
        }
    }
    if summary.instability {
        summary.pass = false;
    }
    Ok(summary)
}
