//! Experiment harness: configuration files, reproducible sweeps with
//! crash-safe CSV output, and slope fitting.

pub mod config;
pub mod fit;
pub mod sweep;

use std::io::{Read, Write};
use std::path::Path;

use waveop::{Error, Result};

/// Env var limiting the rayon worker pool for sweeps.
pub const WORKERS_ENV: &str = "WAVEOP_WORKERS";

/// Applies the worker budget from the environment, if set. Must run
/// before any parallel work.
pub fn install_worker_budget() {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Raw little-endian f64 sample files (the grid-function interchange
/// format).
pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for v in samples {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!("length {} is not a multiple of 8", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
