//! Harness behaviour: byte-stable sweeps, crash-resume equivalence, and
//! the CLI binary end to end.

use std::fs;
use std::process::Command;

use waveop_cli::config::ExperimentConfig;
use waveop_cli::sweep::run_sweep;

fn rate_config() -> ExperimentConfig {
    let text = "mode = rate-sweep\nd = 2\ndt = 4\njmax = 7\n\
        t = 1.0\nt_prime = 1.0\nr = -2.0\nr1 = 1.5\nr2 = 1.5\nsigma = 10.0\n\
        jitter = 1e-10\n\
        op_kind = fourier_multiplier\nop_kappa = 1\nop_order = -2.0\n\
        input_order = 1.5\nnoise_order = 1.5\n\
        n_grid = 32,64,128\nseeds = 1,2,3\nj_ref = 4\n";
    ExperimentConfig::from_text(text, "test").unwrap()
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let cfg = rate_config();
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let p1 = run_sweep(&cfg, dir1.path(), false).unwrap();
    let p2 = run_sweep(&cfg, dir2.path(), false).unwrap();
    let b1 = fs::read(&p1).unwrap();
    let b2 = fs::read(&p2).unwrap();
    assert!(!b1.is_empty());
    assert_eq!(b1, b2);
}

#[test]
fn interrupted_sweep_resumes_to_identical_bytes() {
    let cfg = rate_config();
    let full_dir = tempfile::tempdir().unwrap();
    let full_path = run_sweep(&cfg, full_dir.path(), false).unwrap();
    let full_bytes = fs::read(&full_path).unwrap();

    // simulate a crash: keep the header, three complete rows, and a
    // partial fourth line
    let text = String::from_utf8(full_bytes.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() > 5);
    let mut partial = lines[..4].join("\n");
    partial.push('\n');
    partial.push_str("64,2,1,0.12"); // truncated row, no newline
    let resume_dir = tempfile::tempdir().unwrap();
    let resume_path = resume_dir.path().join("rate-sweep.csv");
    fs::write(&resume_path, &partial).unwrap();

    let resumed = run_sweep(&cfg, resume_dir.path(), true).unwrap();
    assert_eq!(resumed, resume_path);
    assert_eq!(fs::read(&resumed).unwrap(), full_bytes);
}

#[test]
fn resume_on_complete_file_is_a_no_op() {
    let cfg = rate_config();
    let dir = tempfile::tempdir().unwrap();
    let path = run_sweep(&cfg, dir.path(), false).unwrap();
    let before = fs::read(&path).unwrap();
    let again = run_sweep(&cfg, dir.path(), true).unwrap();
    assert_eq!(fs::read(&again).unwrap(), before);
}

#[test]
fn sparsity_sweep_emits_region_breakdown() {
    let text = "mode = sparsity-sweep\nd = 2\ndt = 4\njmax = 8\n\
        t = 0.25\nt_prime = 0.25\nr = 0.25\nr1 = 1.5\nr2 = 1.5\nsigma = 1.4\n\
        op_kind = fourier_multiplier\nop_kappa = 1\nop_order = 0.25\n\
        input_order = 1.5\nj_grid = 4,5,6\n";
    let cfg = ExperimentConfig::from_text(text, "test").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = run_sweep(&cfg, dir.path(), false).unwrap();
    let content = fs::read_to_string(&path).unwrap();
    let mut lines = content.lines();
    assert_eq!(
        lines.next().unwrap(),
        "j,nnz,max_row,max_col,nnz_d1,nnz_d2,nnz_d3,nnz_d4,nnz_d5,nnz_d6"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    // D1 and D2 columns are all zeros
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[4], "0");
        assert_eq!(cols[5], "0");
    }
}

#[test]
fn noiseless_sweep_auto_sizes_n() {
    let text = "mode = noiseless-sweep\nd = 2\ndt = 4\njmax = 8\n\
        t = 1.0\nt_prime = 1.0\nr = -2.0\nr1 = 1.5\nr2 = 1.5\nsigma = 10.0\n\
        regression = full\n\
        op_kind = fourier_multiplier\nop_kappa = 1\nop_order = -2.0\n\
        input_order = 1.5\nj_grid = 2,3\nseeds = 5\nj_ref = 5\n";
    let cfg = ExperimentConfig::from_text(text, "test").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = run_sweep(&cfg, dir.path(), false).unwrap();
    let content = fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = content.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let cols: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        // estimation column is machine-level in the consistent regime
        assert!(cols[6] < 1e-8, "estimation {} in {row}", cols[6]);
    }
}

#[test]
fn ovb_probe_runs_and_reports_components() {
    let text = "mode = ovb-probe\nd = 2\ndt = 4\njmax = 7\n\
        t = 1.0\nt_prime = 1.0\nr = -2.0\nr1 = 1.5\nr2 = 1.5\nsigma = 10.0\n\
        jitter = 1e-10\n\
        op_kind = fourier_multiplier\nop_kappa = 1\nop_order = -2.0\n\
        input_order = 1.5\nnoise_order = 1.5\n\
        n_grid = 64\nseeds = 3,4\nj_ref = 4\n";
    let cfg = ExperimentConfig::from_text(text, "test").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = run_sweep(&cfg, dir.path(), false).unwrap();
    let content = fs::read_to_string(&path).unwrap();
    for row in content.lines().skip(1) {
        let cols: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[2].is_finite() && cols[2] >= 0.0);
        assert!(cols[3].is_finite() && cols[3] >= 0.0);
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_waveop"))
}

#[test]
fn cli_end_to_end_gen_estimate_report_solve_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.cfg");
    fs::write(
        &config_path,
        "mode = rate-sweep\nd = 2\ndt = 4\njmax = 8\n\
         t = 1.0\nt_prime = 1.0\nr = -2.0\nr1 = 1.5\nr2 = 1.5\nsigma = 2.5\n\
         jitter = 1e-10\nj_mode = fixed:3\nregression = full\n\
         op_kind = fourier_multiplier\nop_kappa = 1\nop_order = -2.0\n\
         input_order = 1.5\nnoise = none\n\
         n_samples = 80\nn_grid = 32,64,128\nseeds = 1,2,3\nj_ref = 5\n\
         alpha_grid = 0.0,0.5\n",
    )
    .unwrap();

    let data_base = dir.path().join("data");
    let out = bin()
        .args(["gen", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&data_base)
        .arg("--seed")
        .arg("9")
        .output()
        .unwrap();
    assert!(out.status.success(), "gen failed: {out:?}");
    assert!(data_base.with_extension("u.bin").exists());

    let learned_path = dir.path().join("learned.txt");
    let out = bin()
        .args(["estimate", "--config"])
        .arg(&config_path)
        .arg("--data")
        .arg(&data_base)
        .arg("--out")
        .arg(&learned_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "estimate failed: {out:?}");

    let report_path = dir.path().join("report.csv");
    let out = bin()
        .args(["report", "--config"])
        .arg(&config_path)
        .arg("--learned")
        .arg(&learned_path)
        .arg("--out")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "report failed: {out:?}");
    let report = fs::read_to_string(&report_path).unwrap();
    assert!(report.starts_with("component,value"));
    let estimation: f64 = report
        .lines()
        .find(|l| l.starts_with("estimation"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(estimation < 1e-8, "estimation {estimation}");

    // solve with the learned operator against an analytic preset
    let samples_path = dir.path().join("solution.bin");
    let errors_path = dir.path().join("errors.csv");
    // manufacture the exact solution and rhs through the exact operator
    let out = bin()
        .args(["solve", "--config"])
        .arg(&config_path)
        .arg("--learned")
        .arg(&learned_path)
        .arg("--rhs")
        .arg("harmonic:2")
        .arg("--out-samples")
        .arg(&samples_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "solve failed: {out:?}");
    let samples = waveop_cli::read_samples(&samples_path).unwrap();
    assert_eq!(samples.len(), 512);
    // A = (1 - lap)^{-1} is the smoothing side, so solving A u = cos(4 pi x)
    // roughens: u = (1 + 16 pi^2) cos(4 pi x), up to truncation at J = 3
    let sup = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let want = 1.0 + 16.0 * std::f64::consts::PI.powi(2);
    assert!(
        (sup - want).abs() < 0.2 * want,
        "learned solve amplitude {sup} vs {want}"
    );
    drop(errors_path);

    // sweep + fit
    let sweep_dir = dir.path().join("sweep");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&sweep_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "sweep failed: {out:?}");
    let out = bin()
        .args(["fit", "--csv"])
        .arg(sweep_dir.join("rate-sweep.csv"))
        .args(["--x", "n", "--y", "total"])
        .output()
        .unwrap();
    assert!(out.status.success(), "fit failed: {out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("slope,intercept,r_squared"), "{stdout}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.cfg");
    fs::write(&config_path, "mode = rate-sweep\nbogus_key = 1\n").unwrap();
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // missing file is also a configuration-class failure
    let out = bin()
        .args(["fit", "--csv"])
        .arg(dir.path().join("nope.csv"))
        .args(["--x", "n", "--y", "total"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn worker_budget_env_is_respected() {
    let text = "mode = sparsity-sweep\nd = 2\ndt = 4\njmax = 8\n\
        t = 0.25\nt_prime = 0.25\nr = 0.25\nr1 = 1.5\nr2 = 1.5\nsigma = 1.4\n\
        op_kind = fourier_multiplier\nop_kappa = 1\nop_order = 0.25\n\
        input_order = 1.5\nj_grid = 4,5\n";
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.cfg");
    fs::write(&config_path, text).unwrap();
    let out = bin()
        .env(waveop_cli::WORKERS_ENV, "1")
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
}
