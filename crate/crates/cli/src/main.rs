use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waveop::compression::{
    build_mask, build_mask_new, classify_region, sigma_window_warnings, sparsity_stats, Region,
};
use waveop::estimator::{estimate, estimate_solver_grade, select_parameters};
use waveop::fields::{assumption_warnings, generate_dataset, io as fields_io, PreparedOperator};
use waveop::galerkin::assemble_matrix;
use waveop::solver::{galerkin_solve, solve_error};
use waveop::wavelets::WaveletSystem;
use waveop::Error;

use waveop_cli::config::ExperimentConfig;
use waveop_cli::sweep::{manufactured_h_t, run_sweep};
use waveop_cli::{fit, install_worker_budget, read_samples, write_samples};

/// Wavelet-Galerkin operator learning harness.
#[derive(Parser)]
#[command(name = "waveop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from the configured operator and field models.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output base path (writes <base>.header, <base>.u.bin, <base>.f.bin).
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed grid with a single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the compression support and print its sparsity statistics.
    Mask {
        #[arg(long)]
        config: PathBuf,
        /// Truncation level (defaults to the first entry of j_grid).
        #[arg(long)]
        j: Option<usize>,
        /// Use the solver-grade modified rule with this eps.
        #[arg(long)]
        new_eps: Option<f64>,
        /// Optional file to store the mask.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the nested-support regression estimator on a dataset.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Dataset base path (as produced by gen).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Solver-grade mode: eps-modified supports and balanced level.
        #[arg(long)]
        solver_grade: bool,
        /// eps for solver-grade mode.
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
    },
    /// Error components of a learned operator against the configured truth.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        learned: PathBuf,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve A_hat u = f with a learned (or exact assembled) operator.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Learned-operator file; mutually exclusive with --exact.
        #[arg(long)]
        learned: Option<PathBuf>,
        /// Assemble the exact matrix at --j-star instead of loading one.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        j_star: Option<usize>,
        /// Right-hand side: a raw f64-le samples file, or an analytic
        /// preset `ht:<t>` / `harmonic:<k>`.
        #[arg(long)]
        rhs: String,
        #[arg(long)]
        out_samples: PathBuf,
        /// Exact solution samples; enables the error CSV.
        #[arg(long)]
        exact_solution: Option<PathBuf>,
        /// Error CSV path (stdout when omitted).
        #[arg(long)]
        out_errors: Option<PathBuf>,
    },
    /// Run the configured sweep, appending rows crash-safely.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue an interrupted sweep instead of starting over.
        #[arg(long)]
        resume: bool,
    },
    /// Fit a log2-log2 slope through per-x medians of a sweep CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::LinearSolve(_) | Error::Eigen(_) | Error::NonFinite(_) | Error::Invariant(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    install_worker_budget();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn print_warnings(cfg: &ExperimentConfig, sys: &WaveletSystem) {
    for w in assumption_warnings(cfg.op.order(), cfg.input, cfg.noise) {
        eprintln!("warning: {w}");
    }
    let p = cfg
        .estimator
        .compression_params(cfg.j_grid.first().copied().unwrap_or(4));
    for w in sigma_window_warnings(&p, Some(cfg.estimator.r1), &sys.bank().constants) {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> waveop::Result<()> {
    match cli.command {
        Command::Gen { config, out, seed } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            if cfg.n_samples == 0 {
                return Err(Error::InvalidParameter(
                    "gen needs n_samples in the config".into(),
                ));
            }
            let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
            print_warnings(&cfg, &sys);
            let op = PreparedOperator::new(cfg.op, sys.grid_size())?;
            let j_tilde = match cfg.j_tilde {
                Some(j) => j,
                None => select_parameters(cfg.n_samples, &cfg.estimator, 1)?.j_tilde,
            };
            let seed = seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0);
            let ds =
                generate_dataset(&sys, cfg.n_samples, &op, cfg.input, cfg.noise, j_tilde, seed)?;
            fields_io::save_dataset(&out, &ds)?;
            println!(
                "dataset: N = {}, levels up to {}, seed {} -> {}",
                cfg.n_samples,
                j_tilde,
                seed,
                out.display()
            );
            Ok(())
        }
        Command::Mask {
            config,
            j,
            new_eps,
            out,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let j_top = j
                .or_else(|| cfg.j_grid.first().copied())
                .ok_or_else(|| Error::InvalidParameter("mask needs --j or j_grid".into()))?;
            let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
            let p = cfg.estimator.compression_params(j_top);
            for w in sigma_window_warnings(&p, Some(cfg.estimator.r1), &sys.bank().constants) {
                eprintln!("warning: {w}");
            }
            let mask = match new_eps {
                Some(eps) => build_mask_new(&sys, &p, eps)?,
                None => build_mask(&sys, &p)?,
            };
            let stats = sparsity_stats(&mask);
            println!("j,region,nnz,max_row,max_col");
            for region in [
                Region::D1,
                Region::D2,
                Region::D3,
                Region::D4,
                Region::D5,
                Region::D6,
            ] {
                let mut nnz = 0usize;
                let mut max_row = 0usize;
                let mut max_col = 0usize;
                for jr in 0..=j_top {
                    for jc in 0..=j_top {
                        if classify_region(jr, jc, &p) == region {
                            nnz += stats.per_block_nnz[(jr, jc)];
                            max_row = max_row.max(stats.per_block_max_row[(jr, jc)]);
                            max_col = max_col.max(stats.per_block_max_col[(jr, jc)]);
                        }
                    }
                }
                println!("{j_top},{},{nnz},{max_row},{max_col}", region.label());
            }
            println!(
                "{j_top},total,{},{},{}",
                stats.global_nnz, stats.max_row_nnz, stats.max_col_nnz
            );
            if let Some(path) = out {
                waveop::compression::io::save_mask(&path, &mask, Some(&p))?;
            }
            Ok(())
        }
        Command::Estimate {
            config,
            data,
            out,
            solver_grade,
            eps,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
            print_warnings(&cfg, &sys);
            let ds = fields_io::load_dataset(&data)?;
            if ds.meta.d != cfg.d || ds.meta.dt != cfg.dt {
                return Err(Error::InvalidParameter(format!(
                    "dataset family ({}, {}) does not match config ({}, {})",
                    ds.meta.d, ds.meta.dt, cfg.d, cfg.dt
                )));
            }
            let learned = if solver_grade {
                estimate_solver_grade(&sys, &ds, &cfg.estimator, eps)?
            } else {
                estimate(&sys, &ds, &cfg.estimator)?
            };
            waveop::estimator::io::save_learned(&out, &learned)?;
            println!(
                "estimated: J = {}, J~ = {}, nnz = {}, jittered columns = {}",
                learned.selected.j,
                learned.selected.j_tilde,
                learned.nnz(),
                learned.diagnostics.jittered_columns.len()
            );
            Ok(())
        }
        Command::Report {
            config,
            learned,
            out,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
            let op = PreparedOperator::new(cfg.op, sys.grid_size())?;
            let learned = waveop::estimator::io::load_learned(&learned)?;
            let j_ref = if cfg.j_ref > 0 {
                cfg.j_ref
            } else {
                learned.j_top() + 2
            };
            let rep = waveop::estimator::error_report(&sys, &op, &learned, j_ref)?;
            let mut text = String::from("component,value\n");
            text.push_str(&format!("total,{}\n", rep.total));
            text.push_str(&format!("truncation,{}\n", rep.truncation));
            text.push_str(&format!("compression,{}\n", rep.compression));
            text.push_str(&format!("estimation,{}\n", rep.estimation));
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Solve {
            config,
            learned,
            exact,
            j_star,
            rhs,
            out_samples,
            exact_solution,
            out_errors,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
            let r = cfg.op.order();
            let matrix = match (learned, exact) {
                (Some(path), false) => waveop::estimator::io::load_learned(&path)?.matrix,
                (None, true) => {
                    let j = j_star.ok_or_else(|| {
                        Error::InvalidParameter("--exact needs --j-star".into())
                    })?;
                    let op = PreparedOperator::new(cfg.op, sys.grid_size())?;
                    assemble_matrix(&sys, &op, j)?
                }
                _ => {
                    return Err(Error::InvalidParameter(
                        "pass exactly one of --learned or --exact".into(),
                    ))
                }
            };
            let f = parse_rhs(&rhs, &sys)?;
            let sol = galerkin_solve(&sys, &matrix, &f, r)?;
            if let Some(w) = &sol.warning {
                eprintln!("warning: {w}");
            }
            write_samples(&out_samples, &sol.samples)?;
            if let Some(exact_path) = exact_solution {
                let u_exact = read_samples(&exact_path)?;
                let alphas = if cfg.alpha_grid.is_empty() {
                    vec![0.0]
                } else {
                    cfg.alpha_grid.clone()
                };
                let mut text = String::from("alpha,s,error\n");
                for alpha in alphas {
                    let s = r / 2.0 - alpha;
                    let e = solve_error(&sys, &sol.coefs, &u_exact, s)?;
                    text.push_str(&format!("{alpha},{s},{e}\n"));
                }
                match out_errors {
                    Some(path) => std::fs::write(path, text)?,
                    None => print!("{text}"),
                }
            }
            Ok(())
        }
        Command::Sweep {
            config,
            out,
            resume,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let sys = WaveletSystem::new(cfg.d, cfg.dt, cfg.jmax)?;
            print_warnings(&cfg, &sys);
            let path = run_sweep(&cfg, &out, resume)?;
            println!("sweep complete: {}", path.display());
            Ok(())
        }
        Command::Fit { csv, x, y } => {
            let fit = fit::fit_slope(&csv, &x, &y)?;
            println!("slope,intercept,r_squared");
            println!("{},{},{}", fit.slope, fit.intercept, fit.r_squared);
            Ok(())
        }
    }
}

fn parse_rhs(rhs: &str, sys: &WaveletSystem) -> waveop::Result<Vec<f64>> {
    if let Some(spec) = rhs.strip_prefix("ht:") {
        let t: f64 = spec
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad ht preset '{rhs}': {e}")))?;
        return Ok(manufactured_h_t(sys.grid_size(), t));
    }
    if let Some(spec) = rhs.strip_prefix("harmonic:") {
        let k: usize = spec
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad harmonic preset '{rhs}': {e}")))?;
        let m = sys.grid_size();
        return Ok((0..m)
            .map(|i| (2.0 * std::f64::consts::PI * k as f64 * i as f64 / m as f64).cos())
            .collect());
    }
    let samples = read_samples(std::path::Path::new(rhs))?;
    if samples.len() != sys.grid_size() {
        return Err(Error::DimensionMismatch {
            expected: sys.grid_size(),
            got: samples.len(),
            context: "rhs samples",
        });
    }
    Ok(samples)
}
