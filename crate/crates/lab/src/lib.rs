//! Experiment orchestration for Wong-Zakai rate studies: configuration,
//! worker pool, output files and the run manifest.

pub mod check;
pub mod config;
pub mod error;
pub mod manifest;
pub mod paths;
pub mod presets;
pub mod runs;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Mode};
pub use error::{LabError, EXIT_CONFIG, EXIT_FAILURE, EXIT_INSTABILITY, EXIT_PASS};
pub use manifest::{OutputDir, RunManifest};

/// Command-line overrides of the config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub replicas: Option<usize>,
    /// Worker threads; all available cores when absent.
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub pass: bool,
    pub instability: bool,
    /// One verdict or summary line per report or check.
    pub lines: Vec<String>,
    pub output: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.instability {
            EXIT_INSTABILITY
        } else if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAILURE
        }
    }
}

/// Runs `mode` on `cfg` and writes its outputs and manifest.
pub fn run(mode: Mode, mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, LabError> {
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(LabError::Config(format!("config is for mode {m}, not {mode}")));
        }
    }
    if let Some(r) = opts.replicas {
        cfg.replicas = r;
    }
    if let Some(o) = &opts.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    let threads = opts.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let started = manifest::unix_now();
    let mut out = OutputDir::create(&cfg.output)?;
    let summary = pool.install(|| match mode {
        Mode::Noise => runs::run_noise(&cfg, &mut out),
        Mode::Solve => runs::run_solve(&cfg, &mut out),
        Mode::Rates => runs::run_rates(&cfg, &mut out),
        Mode::Check => run_check(&cfg, &mut out),
    })?;
    let manifest = RunManifest {
        mode,
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: manifest::unix_now(),
        threads: pool.current_num_threads(),
        pass: summary.pass,
        cells: summary.cells,
        files: out.files().to_vec(),
        config: cfg.clone(),
    };
    manifest.write(&out)?;
    Ok(RunOutcome {
        pass: summary.pass,
        instability: summary.instability,
        lines: summary.lines,
        output: cfg.output,
        manifest,
    })
}

fn run_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<runs::RunSummary, LabError> {
    let outcomes = check::run_checks(cfg)?;
    let lines: Vec<String> = outcomes.iter().map(|o| o.line()).collect();
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(out.file("checks.txt")?, text)?;
    Ok(runs::RunSummary { pass: outcomes.iter().all(|o| o.pass), instability: false, lines, cells: Vec::new() })
}
