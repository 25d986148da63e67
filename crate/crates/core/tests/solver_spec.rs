//! Galerkin solver behaviour: manufactured-solution convergence, solver
//! paths, error metrics.

use waveop::estimator::{estimate, EstimatorConfig, LevelMode, RegressionSupport};
use waveop::fields::{generate_dataset, GrfSpec, OperatorSpec, PreparedOperator};
use waveop::galerkin::{assemble_matrix, preconditioned_spectrum, BlockMatrix};
use waveop::solver::{ellipticity_check, galerkin_solve, solve_error};
use waveop::wavelets::{num_indices, Flavor, WaveletSystem};

/// A deterministic function with Fourier decay |u_hat(xi)| ~ xi^{-(t+1/2)},
/// i.e. exactly H^t smoothness, evaluated on the grid.
fn manufactured_u(m: usize, t: f64) -> Vec<f64> {
    let mut u = vec![0.0; m];
    for xi in 1..=(m / 2 - 1) {
        let amp = (xi as f64).powf(-(t + 0.5));
        let phase = 2.61803 * xi as f64; // fixed irrational phases
        for (i, v) in u.iter_mut().enumerate() {
            let x = i as f64 / m as f64;
            *v += amp * (2.0 * std::f64::consts::PI * xi as f64 * x + phase).cos();
        }
    }
    u
}

#[test]
fn identity_system_returns_rhs_coefficients() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let j_star = 4;
    let n = num_indices(j_star);
    let mut eye = ndarray::Array2::<f64>::zeros((n, n));
    for i in 0..n {
        eye[(i, i)] = 1.0;
    }
    let a = BlockMatrix::dense(j_star, eye).unwrap();
    let f = manufactured_u(sys.grid_size(), 2.0);
    let sol = galerkin_solve(&sys, &a, &f, 0.0).unwrap();
    let expected = sys.analysis(&f, Flavor::PrimalTest, j_star).unwrap();
    for (got, want) in sol.coefs.to_flat().iter().zip(expected.to_flat()) {
        assert!((got - want).abs() < 1e-10);
    }
    assert!(sol.warning.is_none());
}

/// Exact-matrix Galerkin error in H^{r/2} decays like 2^{-J (t - r/2)}.
#[test]
fn manufactured_solution_convergence_slope() {
    let sys = WaveletSystem::new(2, 4, 10).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let r = op.order();
    let t = 1.0; // smoothness of the manufactured solution
    let u = manufactured_u(sys.grid_size(), t);
    let f = op.apply(&u).unwrap();
    let mut pts = Vec::new();
    for j_star in 3..=7usize {
        let a = assemble_matrix(&sys, &op, j_star).unwrap();
        let sol = galerkin_solve(&sys, &a, &f, r).unwrap();
        assert!(sol.warning.is_none(), "system should be elliptic");
        let err = solve_error(&sys, &sol.coefs, &u, r / 2.0).unwrap();
        pts.push((j_star as f64, err.log2()));
    }
    let slope = ols_slope(&pts);
    let want = -(t - r / 2.0);
    assert!(
        (slope - want).abs() <= 0.3,
        "solver slope {slope:.3}, expected {want} +- 0.3 ({pts:?})"
    );
}

/// The galerkin projection of the exact solution is recovered when the
/// right-hand side is produced by the same truncated operator; the
/// solve_error of the analyzed exact solution against itself vanishes.
#[test]
fn solve_error_basics() {
    let sys = WaveletSystem::new(2, 4, 9).unwrap();
    let u = manufactured_u(sys.grid_size(), 1.5);
    let coefs = sys.analysis(&u, Flavor::DualTest, sys.params().jmax).unwrap();
    let zero = solve_error(&sys, &coefs, &u, 0.0).unwrap();
    assert!(zero < 1e-10, "self distance {zero}");
    // s = 0 equals the flat l2 distance
    let truncated = coefs.truncated(4);
    let e0 = solve_error(&sys, &truncated, &u, 0.0).unwrap();
    let full = coefs.to_flat();
    let mut l2 = 0.0;
    for (i, v) in full.iter().enumerate() {
        if i >= num_indices(4) {
            l2 += v * v;
        }
    }
    assert!((e0 - l2.sqrt()).abs() < 1e-10);
}

/// Weaker norms report smaller errors: the H^{r/2 - alpha} error decreases
/// as alpha grows.
#[test]
fn error_decreases_in_weaker_norms() {
    let sys = WaveletSystem::new(2, 4, 9).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let u = manufactured_u(sys.grid_size(), 1.0);
    let f = op.apply(&u).unwrap();
    let a = assemble_matrix(&sys, &op, 4).unwrap();
    let sol = galerkin_solve(&sys, &a, &f, op.order()).unwrap();
    let mut prev = f64::INFINITY;
    for alpha in [0.0, 0.5, 1.0] {
        let e = solve_error(&sys, &sol.coefs, &u, op.order() / 2.0 - alpha).unwrap();
        assert!(e <= prev * (1.0 + 1e-12), "alpha {alpha}: {e} > {prev}");
        prev = e;
    }
}

/// Exact truncated matrices of positive definite operators pass the
/// ellipticity check with the preconditioned lower band edge.
#[test]
fn exact_matrix_is_elliptic_with_band_margin() {
    let sys = WaveletSystem::new(2, 4, 9).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -1.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let a = assemble_matrix(&sys, &op, 5).unwrap();
    let rep = ellipticity_check(&a, op.order()).unwrap();
    assert!(rep.elliptic);
    let (c_minus, _) = preconditioned_spectrum(&a, op.order()).unwrap();
    assert!((rep.lambda_min - c_minus).abs() < 1e-12);
    assert!(rep.lambda_min > 1e-3);
}

/// A learned operator from a large noiseless run solves nearly as well as
/// the exact truncated matrix.
#[test]
fn learned_solver_tracks_exact_solver() {
    let sys = WaveletSystem::new(2, 4, 9).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let r = op.order();
    let cfg = EstimatorConfig {
        t: 1.0,
        t_prime: 1.0,
        r,
        r1: 1.5,
        r2: 1.5,
        sigma: 2.5,
        dt: 4,
        a: 2.0,
        jitter: 0.0,
        mode: LevelMode::Fixed(3),
        regression: RegressionSupport::Full,
    };
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let ds = generate_dataset(&sys, 80, &op, input, None, 5, 3).unwrap();
    let learned = estimate(&sys, &ds, &cfg).unwrap();

    let u = manufactured_u(sys.grid_size(), 1.0);
    let f = op.apply(&u).unwrap();
    let a_exact = assemble_matrix(&sys, &op, 3).unwrap();
    let exact_sol = galerkin_solve(&sys, &a_exact, &f, r).unwrap();
    let learned_sol = galerkin_solve(&sys, &learned.matrix, &f, r).unwrap();
    let e_exact = solve_error(&sys, &exact_sol.coefs, &u, r / 2.0).unwrap();
    let e_learned = solve_error(&sys, &learned_sol.coefs, &u, r / 2.0).unwrap();
    assert!(
        e_learned <= 2.0 * e_exact,
        "learned {e_learned} vs exact {e_exact}"
    );
}

/// The sparse direct path (dim >= 512) agrees with a dense solve.
#[test]
fn sparse_path_matches_dense() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let j_star = 8; // dim 512 hits the sparse branch
    let n = num_indices(j_star);
    let mut rng_state = 0x243f6a88u64;
    let mut next = move || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut dense = ndarray::Array2::<f64>::zeros((n, n));
    for c in 0..n {
        for r in 0..n {
            let keep = r == c || (r as i64 - c as i64).abs() <= 2 && next() > 0.3;
            if keep {
                let v = if r == c { 4.0 + next() } else { next() };
                cols[c].push((r, v));
                dense[(r, c)] = v;
            }
        }
    }
    let sparse = BlockMatrix::sparse(j_star, cols).unwrap();
    assert!(sparse.is_sparse() && sparse.dim() >= 512);
    let f = manufactured_u(sys.grid_size(), 1.5);
    let sol_sparse = galerkin_solve(&sys, &sparse, &f, 0.0).unwrap();
    let dense_m = BlockMatrix::dense(j_star, dense).unwrap();
    let sol_dense = galerkin_solve(&sys, &dense_m, &f, 0.0).unwrap();
    for (a, b) in sol_sparse
        .coefs
        .to_flat()
        .iter()
        .zip(sol_dense.coefs.to_flat())
    {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}
