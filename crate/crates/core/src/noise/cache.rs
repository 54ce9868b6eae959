//! Binary Wiener path files.
//!
//! Layout (little endian): magic `WZNB`, version `u16`, `d1` as `u16`,
//! `n_fine` as `u64`, horizon `T` as `f64`, then `d1 × (n_fine + 1)` `f64`
//! samples in row-major (component-major) order.

use std::io::{Read, Write};
use std::path::Path;

use super::{MultiPath, PathKind, TimeGrid};
use crate::error::{Error, Result};

pub const PATH_FILE_MAGIC: [u8; 4] = *b"WZNB";
pub const PATH_FILE_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 2 + 8 + 8;

pub fn write_path_file(path: &Path, w: &MultiPath) -> Result<()> {
    let d1 = u16::try_from(w.d1()).map_err(|_| Error::PathFormat(format!("d1 = {} does not fit in u16", w.d1())))?;
    let grid = w.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * w.d1() * grid.n_points());
    buf.extend_from_slice(&PATH_FILE_MAGIC);
    buf.extend_from_slice(&PATH_FILE_VERSION.to_le_bytes());
    buf.extend_from_slice(&d1.to_le_bytes());
    buf.extend_from_slice(&(grid.n_fine() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.horizon().to_le_bytes());
    for row in w.samples() {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_path_file(path: &Path) -> Result<MultiPath> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::PathFormat(format!("{}: truncated header ({} bytes)", path.display(), bytes.len())));
    }
    if bytes[0..4] != PATH_FILE_MAGIC {
        return Err(Error::PathFormat(format!("{}: bad magic", path.display())));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != PATH_FILE_VERSION {
        return Err(Error::PathFormat(format!(
            "{}: unsupported version {version} (expected {PATH_FILE_VERSION})",
            path.display()
        )));
    }
    let d1 = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let n_fine = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let horizon = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let grid = TimeGrid::new(horizon, n_fine)?;
    let expected = HEADER_LEN + 8 * d1 * grid.n_points();
    if bytes.len() != expected {
        return Err(Error::PathFormat(format!("{}: expected {expected} bytes, found {}", path.display(), bytes.len())));
    }
    let body = &bytes[HEADER_LEN..];
    let samples = (0..d1)
        .map(|k| {
            let row = &body[8 * k * grid.n_points()..8 * (k + 1) * grid.n_points()];
            row.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
        })
        .collect();
    MultiPath::from_samples(grid, PathKind::Wiener, samples)
}
