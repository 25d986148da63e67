//! Sweep execution: deterministic cell grids, per-row crash-safe CSV
//! appends, and resumable runs.
//!
//! Every sweep is a flat list of cells in a fixed order; each cell yields
//! exactly one CSV row. Cells are computed in parallel chunks but written
//! strictly in order with a flush per row, so an interrupted sweep can be
//! resumed by counting the rows already on disk.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use waveop::compression::{
    build_mask, classify_region, sparsity_stats, CompressionParams, Region,
};
use waveop::estimator::{
    error_report_from_reference, estimate, select_parameters, LevelMode,
};
use waveop::fields::{generate_dataset, PreparedOperator};
use waveop::galerkin::{assemble_matrix, BlockMatrix};
use waveop::solver::{galerkin_solve, solve_error};
use waveop::wavelets::{num_indices, WaveletSystem};
use waveop::{Error, Result};

use crate::config::{ExperimentConfig, SweepMode};

type SolverCache = std::collections::HashMap<usize, (Vec<f64>, Vec<f64>)>;

/// Deterministic H^t reference profile used by solver sweeps and the
/// `solve` presets: Fourier amplitudes xi^{-(t + 1/2)} with fixed phases.
pub fn manufactured_h_t(m: usize, t: f64) -> Vec<f64> {
    let mut u = vec![0.0; m];
    for xi in 1..=(m / 2 - 1) {
        let amp = (xi as f64).powf(-(t + 0.5));
        let phase = 2.61803 * xi as f64;
        for (i, v) in u.iter_mut().enumerate() {
            let x = i as f64 / m as f64;
            *v += amp * (2.0 * std::f64::consts::PI * xi as f64 * x + phase).cos();
        }
    }
    u
}

/// One sweep cell; each cell renders to exactly one CSV row.
#[derive(Debug, Clone, Copy)]
enum Cell {
    Rate { n: usize, seed: u64 },
    Noiseless { j: usize, n: usize, seed: u64 },
    Sparsity { j: usize },
    Solver { j_star: usize, alpha: f64 },
    Ovb { n: usize, seed: u64 },
}

pub fn csv_header(mode: SweepMode) -> &'static str {
    match mode {
        SweepMode::RateSweep => {
            "n,seed,j,total,truncation,compression,estimation,wall_millis"
        }
        SweepMode::NoiselessSweep => "j,n,seed,total,truncation,compression,estimation",
        SweepMode::SparsitySweep => {
            "j,nnz,max_row,max_col,nnz_d1,nnz_d2,nnz_d3,nnz_d4,nnz_d5,nnz_d6"
        }
        SweepMode::SolverSweep => "j_star,alpha,solution_error",
        SweepMode::OvbProbe => "n,seed,ovb_estimate,noisy_estimation",
    }
}

fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    match cfg.mode {
        SweepMode::RateSweep => {
            for &n in &cfg.n_grid {
                for &seed in &cfg.seeds {
                    out.push(Cell::Rate { n, seed });
                }
            }
        }
        SweepMode::NoiselessSweep => {
            let js = if cfg.j_grid.is_empty() {
                vec![usize::MAX] // sentinel: honour the config's j_mode
            } else {
                cfg.j_grid.clone()
            };
            for &j in &js {
                let ns = if cfg.n_grid.is_empty() {
                    vec![0] // sentinel: auto-size from the enlarged support
                } else {
                    cfg.n_grid.clone()
                };
                for n in ns {
                    for &seed in &cfg.seeds {
                        out.push(Cell::Noiseless { j, n, seed });
                    }
                }
            }
        }
        SweepMode::SparsitySweep => {
            for &j in &cfg.j_grid {
                out.push(Cell::Sparsity { j });
            }
        }
        SweepMode::SolverSweep => {
            for &j_star in &cfg.j_grid {
                for &alpha in &cfg.alpha_grid {
                    out.push(Cell::Solver { j_star, alpha });
                }
            }
        }
        SweepMode::OvbProbe => {
            for &n in &cfg.n_grid {
                for &seed in &cfg.seeds {
                    out.push(Cell::Ovb { n, seed });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    Ok(out)
}

/// Shared immutable state for all cells of a sweep.
struct SweepContext {
    cfg: ExperimentConfig,
    sys: WaveletSystem,
    op: PreparedOperator,
    /// Reference assembly for error reports (None for modes without one).
    a_ref: Option<BlockMatrix>,
    /// Solution-coefficient and exact-profile cache for solver sweeps,
    /// keyed by level.
    solver_cache: Mutex<SolverCache>,
}

impl SweepContext {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
        let op = PreparedOperator::new(cfg.op, sys.grid_size())?;
        let needs_reference = matches!(
            cfg.mode,
            SweepMode::RateSweep | SweepMode::NoiselessSweep | SweepMode::OvbProbe
        );
        let a_ref = if needs_reference {
            Some(assemble_matrix(&sys, &op, cfg.j_ref)?)
        } else {
            None
        };
        Ok(SweepContext {
            cfg: cfg.clone(),
            sys,
            op,
            a_ref,
            solver_cache: Mutex::new(SolverCache::new()),
        })
    }

    /// Validates every cell's derived levels before any work starts, so
    /// infeasible configurations fail as configuration errors.
    fn validate_cells(&self, cells: &[Cell]) -> Result<()> {
        for cell in cells {
            match *cell {
                Cell::Rate { n, .. } | Cell::Ovb { n, .. } => {
                    let sel = select_parameters(n, &self.cfg.estimator, 1)?;
                    if sel.j_tilde + 3 > self.cfg.jmax {
                        return Err(Error::Resolution(format!(
                            "N = {n} needs dataset level {} and jmax >= {}; increase jmax or shrink N",
                            sel.j_tilde,
                            sel.j_tilde + 3
                        )));
                    }
                    if self.cfg.j_ref < sel.j + 2 {
                        return Err(Error::InvalidParameter(format!(
                            "j_ref = {} must be >= J + 2 = {} at N = {n}",
                            self.cfg.j_ref,
                            sel.j + 2
                        )));
                    }
                }
                Cell::Noiseless { j, n, .. } => {
                    let mut est = self.cfg.estimator;
                    if j != usize::MAX {
                        est.mode = LevelMode::Fixed(j);
                    }
                    let sel = select_parameters(if n == 0 { 2 } else { n }, &est, 1)?;
                    if sel.j_tilde + 3 > self.cfg.jmax {
                        return Err(Error::Resolution(format!(
                            "J = {} needs enlarged level {} and jmax >= {}",
                            sel.j,
                            sel.j_tilde,
                            sel.j_tilde + 3
                        )));
                    }
                }
                Cell::Solver { j_star, .. } => {
                    if j_star + 3 > self.cfg.jmax {
                        return Err(Error::Resolution(format!(
                            "solver level {j_star} needs jmax >= {}",
                            j_star + 3
                        )));
                    }
                }
                Cell::Sparsity { j } => {
                    if j > self.cfg.jmax {
                        return Err(Error::Resolution(format!(
                            "sparsity level {j} exceeds jmax = {}",
                            self.cfg.jmax
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn compression_params(&self, j: usize) -> CompressionParams {
        self.cfg.estimator.compression_params(j)
    }

    fn run_cell(&self, cell: Cell) -> Result<String> {
        match cell {
            Cell::Rate { n, seed } => {
                let start = Instant::now();
                let sel = select_parameters(n, &self.cfg.estimator, 1)?;
                let ds = generate_dataset(
                    &self.sys,
                    n,
                    &self.op,
                    self.cfg.input,
                    self.cfg.noise,
                    sel.j_tilde,
                    seed,
                )?;
                let learned = estimate(&self.sys, &ds, &self.cfg.estimator)?;
                let rep = error_report_from_reference(self.a_ref.as_ref().unwrap(), &learned)?;
                let wall = if self.cfg.timing {
                    start.elapsed().as_millis()
                } else {
                    0
                };
                Ok(format!(
                    "{n},{seed},{},{},{},{},{},{wall}",
                    learned.selected.j, rep.total, rep.truncation, rep.compression, rep.estimation
                ))
            }
            Cell::Noiseless { j, n, seed } => {
                let mut est = self.cfg.estimator;
                if j != usize::MAX {
                    est.mode = LevelMode::Fixed(j);
                }
                let sel = select_parameters(if n == 0 { 2 } else { n }, &est, 1)?;
                let n_eff = if n == 0 {
                    2 * num_indices(sel.j_tilde)
                } else {
                    n
                };
                let ds = generate_dataset(
                    &self.sys,
                    n_eff,
                    &self.op,
                    self.cfg.input,
                    None,
                    sel.j_tilde,
                    seed,
                )?;
                let learned = estimate(&self.sys, &ds, &est)?;
                let rep = error_report_from_reference(self.a_ref.as_ref().unwrap(), &learned)?;
                Ok(format!(
                    "{},{n_eff},{seed},{},{},{},{}",
                    learned.selected.j, rep.total, rep.truncation, rep.compression, rep.estimation
                ))
            }
            Cell::Sparsity { j } => {
                let p = self.compression_params(j);
                let mask = build_mask(&self.sys, &p)?;
                let stats = sparsity_stats(&mask);
                let mut by_region = [0usize; 6];
                for jr in 0..=j {
                    for jc in 0..=j {
                        let idx = match classify_region(jr, jc, &p) {
                            Region::D1 => 0,
                            Region::D2 => 1,
                            Region::D3 => 2,
                            Region::D4 => 3,
                            Region::D5 => 4,
                            Region::D6 => 5,
                        };
                        by_region[idx] += stats.per_block_nnz[(jr, jc)];
                    }
                }
                Ok(format!(
                    "{j},{},{},{},{},{},{},{},{},{}",
                    stats.global_nnz,
                    stats.max_row_nnz,
                    stats.max_col_nnz,
                    by_region[0],
                    by_region[1],
                    by_region[2],
                    by_region[3],
                    by_region[4],
                    by_region[5]
                ))
            }
            Cell::Solver { j_star, alpha } => {
                let r = self.op.order();
                let (coefs_flat, exact) = {
                    let mut cache = self.solver_cache.lock().unwrap();
                    if let Some(hit) = cache.get(&j_star) {
                        hit.clone()
                    } else {
                        let u = manufactured_h_t(self.sys.grid_size(), self.cfg.manufactured_t);
                        let f = self.op.apply(&u)?;
                        let a = assemble_matrix(&self.sys, &self.op, j_star)?;
                        let sol = galerkin_solve(&self.sys, &a, &f, r)?;
                        let entry = (sol.coefs.to_flat(), u);
                        cache.insert(j_star, entry.clone());
                        entry
                    }
                };
                let coefs = waveop::wavelets::CoefVector::from_flat(
                    waveop::wavelets::Flavor::DualTest,
                    j_star,
                    &coefs_flat,
                )?;
                let err = solve_error(&self.sys, &coefs, &exact, r / 2.0 - alpha)?;
                Ok(format!("{j_star},{alpha},{err}"))
            }
            Cell::Ovb { n, seed } => {
                let sel = select_parameters(n, &self.cfg.estimator, 1)?;
                let noisy = generate_dataset(
                    &self.sys,
                    n,
                    &self.op,
                    self.cfg.input,
                    self.cfg.noise,
                    sel.j_tilde,
                    seed,
                )?;
                let clean = generate_dataset(
                    &self.sys,
                    n,
                    &self.op,
                    self.cfg.input,
                    None,
                    sel.j_tilde,
                    seed,
                )?;
                let learned_noisy = estimate(&self.sys, &noisy, &self.cfg.estimator)?;
                let learned_clean = estimate(&self.sys, &clean, &self.cfg.estimator)?;
                let rep_noisy =
                    error_report_from_reference(self.a_ref.as_ref().unwrap(), &learned_noisy)?;
                let rep_clean =
                    error_report_from_reference(self.a_ref.as_ref().unwrap(), &learned_clean)?;
                Ok(format!(
                    "{n},{seed},{},{}",
                    rep_clean.estimation, rep_noisy.estimation
                ))
            }
        }
    }
}

/// Number of data rows already present; tolerates (and ignores) a partial
/// trailing line from an interrupted write.
fn existing_rows(path: &Path, header: &str) -> Result<usize> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e.into()),
    };
    let mut complete: Vec<&str> = text.split_inclusive('\n').collect();
    if let Some(last) = complete.last() {
        if !last.ends_with('\n') {
            complete.pop();
        }
    }
    let mut lines = complete.iter().map(|l| l.trim_end_matches('\n'));
    match lines.next() {
        None => Ok(0),
        Some(h) if h == header => Ok(lines.count()),
        Some(h) => Err(Error::Parse {
            file: path.display().to_string(),
            message: format!("existing header '{h}' does not match '{header}'"),
        }),
    }
}

/// Runs (or resumes) a sweep, returning the CSV path.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, resume: bool) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", cfg.mode.label()));
    let header = csv_header(cfg.mode);
    let ctx = SweepContext::new(cfg)?;
    let all_cells = cells(cfg)?;
    ctx.validate_cells(&all_cells)?;

    let done = if resume {
        existing_rows(&path, header)?
    } else {
        0
    };
    if done > all_cells.len() {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!(
                "{done} rows on disk exceed the sweep's {} cells",
                all_cells.len()
            ),
        });
    }

    // rewrite the file up to the completed prefix (drops partial lines)
    let mut file = if resume && done > 0 {
        let text = fs::read_to_string(&path)?;
        let keep: String = text
            .split_inclusive('\n')
            .filter(|l| l.ends_with('\n'))
            .take(done + 1)
            .collect();
        fs::write(&path, keep)?;
        fs::OpenOptions::new().append(true).open(&path)?
    } else {
        let mut f = fs::File::create(&path)?;
        writeln!(f, "{header}")?;
        f.flush()?;
        f
    };

    let chunk = rayon::current_num_threads().max(1) * 2;
    let mut idx = done;
    while idx < all_cells.len() {
        let hi = (idx + chunk).min(all_cells.len());
        let rows: Vec<Result<String>> = all_cells[idx..hi]
            .par_iter()
            .map(|c| ctx.run_cell(*c))
            .collect();
        for row in rows {
            let row = row?;
            writeln!(file, "{row}")?;
            file.flush()?;
        }
        idx = hi;
    }
    Ok(path)
}
