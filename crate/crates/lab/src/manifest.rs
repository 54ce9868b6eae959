//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::error::LabError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output root that indexes every file handed out through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, LabError> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path for `rel`, with parent directories created and the file indexed.
    pub fn file(&mut self, rel: &str) -> Result<PathBuf, LabError> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellState {
    Ok,
    Aborted,
}

/// Outcome of one `(replica, n)` cell; `n` is absent for per-replica work.
#[derive(Clone, Debug, Serialize)]
pub struct CellStatus {
    pub replica: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub status: CellState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CellStatus {
    pub fn ok(replica: usize, n: Option<usize>) -> Self {
        Self { replica, n, status: CellState::Ok, detail: None }
    }

    pub fn aborted(replica: usize, n: Option<usize>, detail: String) -> Self {
        Self { replica, n, status: CellState::Aborted, detail: Some(detail) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub mode: Mode,
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub threads: usize,
    pub pass: bool,
    pub cells: Vec<CellStatus>,
    /// Every emitted file, relative to the output directory; the manifest itself excluded.
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn write(&self, out: &OutputDir) -> Result<PathBuf, LabError> {
        let p = out.root().join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&p, text)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_are_indexed_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("o")).unwrap();
        let p = out.file("a/b.csv").unwrap();
        std::fs::write(&p, "x").unwrap();
        out.file("a/b.csv").unwrap();
        out.file("c.json").unwrap();
        assert_eq!(out.files(), ["a/b.csv", "c.json"]);
        assert!(dir.path().join("o/a").is_dir());
    }
}
