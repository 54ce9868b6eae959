//! Driving paths per replica and their on-disk cache.
//!
//! Each replica draws its path from `replica_seed(seed, r)`, independent of
//! the thread that computes it. Every `n` of a sweep reuses that one path.

use std::path::{Path, PathBuf};

use wz_core::noise::{read_path_file, replica_seed, sample_wiener, write_path_file, MultiPath, PathKind};

use crate::config::{ExperimentConfig, PathSource};
use crate::error::LabError;

pub fn cache_file_name(seed: u64, replica: usize) -> String {
    format!("w_seed{seed}_r{replica:04}.wznb")
}

/// The driving path of replica `r` with `d1` components.
pub fn replica_path(cfg: &ExperimentConfig, r: usize, d1: usize) -> Result<MultiPath, LabError> {
    let grid = cfg.time_grid()?;
    match cfg.path {
        PathSource::Linear => Ok(MultiPath::from_fn(grid, d1, |_, t| t)?),
        PathSource::Wiener => {
            let Some(dir) = &cfg.path_cache else {
                return Ok(sample_wiener(replica_seed(cfg.seed, r as u64), d1, grid)?);
            };
            let file = dir.join(cache_file_name(cfg.seed, r));
            if file.exists() {
                let w = read_path_file(&file)?;
                if *w.grid() != grid || w.d1() != d1 {
                    return Err(LabError::Config(format!(
                        "{}: cached path has d1 = {} on {:?}, run needs d1 = {d1} on {:?}",
                        file.display(),
                        w.d1(),
                        w.grid(),
                        grid
                    )));
                }
                Ok(w)
            } else {
                let w = sample_wiener(replica_seed(cfg.seed, r as u64), d1, grid)?;
                std::fs::create_dir_all(dir)?;
                write_path_file(&file, &w)?;
                Ok(w)
            }
        }
    }
}

/// Writes the Wiener path of every replica to `dir`.
pub fn cache_paths(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    let d1 = cfg.driver_count()?;
    let grid = cfg.time_grid()?;
    std::fs::create_dir_all(dir)?;
    (0..cfg.replicas)
        .map(|r| {
            let w = sample_wiener(replica_seed(cfg.seed, r as u64), d1, grid)?;
            let file = dir.join(cache_file_name(cfg.seed, r));
            write_path_file(&file, &w)?;
            Ok(file)
        })
        .collect()
}

/// Every cached path in `dir`, ordered by file name.
pub fn load_paths(dir: &Path) -> Result<Vec<MultiPath>, LabError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wznb"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let w = read_path_file(f)?;
            debug_assert_eq!(w.kind(), PathKind::Wiener);
            Ok(w)
        })
        .collect()
}
