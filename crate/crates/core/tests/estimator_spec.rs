//! Estimator pipeline: columnwise regression, restriction/symmetrization,
//! exact recovery in consistent regimes, and error reporting.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use waveop::compression::SupportMask;
use waveop::estimator::{
    columnwise_regression, error_report, estimate, restrict_symmetrize, EstimatorConfig,
    LevelMode, RawRegression, RegressedColumn, RegressionSupport,
};
use waveop::fields::{
    generate_dataset, Dataset, DatasetMeta, GrfSpec, OperatorSpec, PreparedOperator,
};
use waveop::galerkin::assemble_matrix;
use waveop::wavelets::{index_from_flat, num_indices, WaveletSystem};
use waveop::Error;

fn synthetic_dataset(u: Array2<f64>, f: Array2<f64>, j_tilde: usize) -> Dataset {
    let n_samples = u.nrows();
    Dataset {
        u,
        f,
        meta: DatasetMeta {
            n_samples,
            j_tilde,
            seed: 0,
            d: 2,
            dt: 4,
            jmax: j_tilde + 3,
            op: OperatorSpec::FourierMultiplier {
                kappa: 1.0,
                order: 0.0,
            },
            input: GrfSpec {
                order: 1.5,
                kappa: 1.0,
            },
            noise: None,
        },
    }
}

/// Singleton supports with f = a * u reduce to scalar least squares.
#[test]
fn singleton_support_scalar_regression() {
    let j = 2;
    let n_cols = num_indices(j);
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut u = Array2::<f64>::zeros((n, n_cols));
    for v in u.iter_mut() {
        *v = rng.gen::<f64>() - 0.5;
    }
    let slope = -2.75;
    let f = u.clone() * slope;
    let ds = synthetic_dataset(u, f, j);
    let diag_mask = SupportMask::new(j, (0..n_cols).map(|c| vec![c]).collect()).unwrap();
    let raw = columnwise_regression(&ds, &diag_mask, j, 0.0).unwrap();
    for c in 0..n_cols {
        let got = raw.value_at(c, c).unwrap();
        assert!((got - slope).abs() < 1e-10, "column {c}: {got}");
        assert!(!raw.columns[c].jittered);
    }
}

/// A duplicated design column makes the Gram singular; the jitter path
/// engages and is flagged.
#[test]
fn duplicate_column_engages_jitter() {
    let j = 1;
    let n_cols = num_indices(j);
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut u = Array2::<f64>::zeros((n, n_cols));
    for i in 0..n {
        let v = rng.gen::<f64>() - 0.5;
        u[(i, 0)] = v;
        u[(i, 1)] = v; // duplicate
        u[(i, 2)] = rng.gen::<f64>() - 0.5;
        u[(i, 3)] = rng.gen::<f64>() - 0.5;
    }
    let f = u.clone();
    let ds = synthetic_dataset(u, f, j);
    let full = SupportMask::full(j);
    // without jitter: hard error
    assert!(matches!(
        columnwise_regression(&ds, &full, j, 0.0),
        Err(Error::LinearSolve(_))
    ));
    let raw = columnwise_regression(&ds, &full, j, 1e-8).unwrap();
    assert!(raw.columns.iter().any(|c| c.jittered));
}

#[test]
fn under_determined_error_names_worst_column() {
    let j = 2;
    let n_cols = num_indices(j);
    let u = Array2::<f64>::zeros((3, n_cols));
    let f = Array2::<f64>::zeros((3, n_cols));
    let ds = synthetic_dataset(u, f, j);
    let err = columnwise_regression(&ds, &SupportMask::full(j), j, 0.0).unwrap_err();
    match err {
        Error::UnderDetermined { omega, n, .. } => {
            assert_eq!(omega, n_cols);
            assert_eq!(n, 3);
        }
        other => panic!("expected UnderDetermined, got {other}"),
    }
}

/// Hand-evaluated case table of the symmetrization rule on a two-level
/// toy: rows/columns at levels [0, 0, 1, 1]; entries with j <= j' copy in
/// place, entries with j > j' copy the reflected regression value.
#[test]
fn restrict_symmetrize_matches_hand_oracle() {
    let j = 1;
    let n = num_indices(j); // 4
    let raw_value = |col: usize, row: usize| (10 * col + row) as f64;
    let raw = RawRegression {
        j_target: j,
        j_reg: j,
        columns: (0..n)
            .map(|c| RegressedColumn {
                omega: (0..n).collect(),
                coefs: (0..n).map(|r| raw_value(c, r)).collect(),
                condition: 1.0,
                jittered: false,
            })
            .collect(),
    };
    let full = SupportMask::full(j);
    let out = restrict_symmetrize(&raw, &full).unwrap();
    let levels = [0usize, 0, 1, 1];
    for r in 0..n {
        for c in 0..n {
            let want = if levels[r] <= levels[c] {
                raw_value(c, r)
            } else {
                raw_value(r, c)
            };
            assert_eq!(out.get(r, c), want, "entry ({r},{c})");
        }
    }

    // a diagonal-only target keeps exactly the raw diagonal
    let diag = SupportMask::new(j, (0..n).map(|c| vec![c]).collect()).unwrap();
    let out = restrict_symmetrize(&raw, &diag).unwrap();
    assert_eq!(out.nnz(), n);
    for r in 0..n {
        for c in 0..n {
            let want = if r == c { raw_value(c, r) } else { 0.0 };
            assert_eq!(out.get(r, c), want);
        }
    }
}

fn exact_recovery_cfg() -> EstimatorConfig {
    EstimatorConfig {
        t: 1.0,
        t_prime: 1.0,
        r: -2.0,
        r1: 1.5,
        r2: 1.5,
        sigma: 2.5,
        dt: 4,
        a: 2.0,
        jitter: 0.0,
        mode: LevelMode::Fixed(3),
        regression: RegressionSupport::Full,
    }
}

/// Noiseless data, band-limited inputs, full regression support: least
/// squares recovers the masked truth to machine level, and the error
/// report shows a pure truncation + compression budget.
#[test]
fn noiseless_full_support_exact_recovery() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let cfg = exact_recovery_cfg();
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let ds = generate_dataset(&sys, 40, &op, input, None, 4, 31).unwrap();
    let learned = estimate(&sys, &ds, &cfg).unwrap();
    assert_eq!(learned.selected.j, 3);
    assert!(learned.selected.j_tilde <= 4);

    // entrywise recovery on the target support
    let a_j = assemble_matrix(&sys, &op, 3).unwrap();
    let masked = a_j.on_mask(&learned.target_mask).unwrap();
    let diff = learned.matrix.sub(&masked).unwrap();
    let max_err = diff
        .to_dense()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    assert!(max_err <= 1e-8, "entrywise recovery error {max_err}");

    // support exactness
    assert_eq!(learned.nnz(), learned.target_mask.nnz());

    // components: estimation at machine level, total explained by
    // truncation + compression within 10%
    let report = error_report(&sys, &op, &learned, 5).unwrap();
    assert!(report.estimation <= 1e-8, "estimation {}", report.estimation);
    let explained = report.truncation + report.compression;
    assert!(
        (report.total - explained).abs() <= 0.1 * report.total.max(explained),
        "total {} vs truncation+compression {}",
        report.total,
        explained
    );
}

/// Bitwise determinism of the full pipeline under a fixed seed.
#[test]
fn estimate_is_deterministic() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let mut cfg = exact_recovery_cfg();
    cfg.regression = RegressionSupport::Nested;
    cfg.mode = LevelMode::Fixed(2);
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let noise = Some(GrfSpec {
        order: 1.5,
        kappa: 1.0,
    });
    let d1 = generate_dataset(&sys, 64, &op, input, noise, 4, 77).unwrap();
    let d2 = generate_dataset(&sys, 64, &op, input, noise, 4, 77).unwrap();
    let a1 = estimate(&sys, &d1, &cfg).unwrap();
    let a2 = estimate(&sys, &d2, &cfg).unwrap();
    assert_eq!(a1.matrix.to_dense(), a2.matrix.to_dense());
}

/// Below-diagonal entries equal the reflected regression values bit for
/// bit.
#[test]
fn symmetrization_is_bit_exact() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let mut cfg = exact_recovery_cfg();
    cfg.mode = LevelMode::Fixed(2);
    cfg.jitter = 1e-10;
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let noise = Some(GrfSpec {
        order: 1.5,
        kappa: 1.0,
    });
    let ds = generate_dataset(&sys, 64, &op, input, noise, 4, 13).unwrap();
    let sel = waveop::estimator::select_parameters(64, &cfg, 1).unwrap();
    let reg_mask = SupportMask::full(sel.j_tilde);
    let raw = columnwise_regression(&ds, &reg_mask, sel.j, cfg.jitter).unwrap();
    let learned = estimate(&sys, &ds, &cfg).unwrap();
    for (c, rows) in learned.target_mask.columns().iter().enumerate() {
        let jc = index_from_flat(c).j;
        for &r in rows {
            let jr = index_from_flat(r).j;
            if jr > jc {
                let expected = raw.value_at(r, c).unwrap();
                assert_eq!(learned.matrix.get(r, c), expected, "({r},{c})");
            }
        }
    }
}

/// Enlarging the regression support never worsens the noiseless
/// estimation component (monotone information).
#[test]
fn monotone_information_in_regression_support() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let ds = generate_dataset(&sys, 40, &op, input, None, 4, 19).unwrap();
    let mut cfg = exact_recovery_cfg();
    cfg.regression = RegressionSupport::Nested;
    let nested = estimate(&sys, &ds, &cfg).unwrap();
    cfg.regression = RegressionSupport::Full;
    let full = estimate(&sys, &ds, &cfg).unwrap();
    let rep_nested = error_report(&sys, &op, &nested, 5).unwrap();
    let rep_full = error_report(&sys, &op, &full, 5).unwrap();
    assert!(
        rep_full.estimation <= rep_nested.estimation + 1e-9,
        "full {} vs nested {}",
        rep_full.estimation,
        rep_nested.estimation
    );
}

/// Zero data with jitter engaged gives the zero estimator; the total error
/// is then the weighted norm of the reference matrix, and every component
/// obeys the triangle sanity bound.
#[test]
fn zero_data_yields_zero_estimator() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let j_tilde = 4;
    let cols = num_indices(j_tilde);
    let ds = synthetic_dataset(
        Array2::zeros((40, cols)),
        Array2::zeros((40, cols)),
        j_tilde,
    );
    let mut cfg = exact_recovery_cfg();
    cfg.jitter = 1e-8;
    let learned = estimate(&sys, &ds, &cfg).unwrap();
    assert!(learned
        .matrix
        .to_dense()
        .iter()
        .all(|v| *v == 0.0));
    assert!(!learned.diagnostics.jittered_columns.is_empty());
    let report = error_report(&sys, &op, &learned, 5).unwrap();
    let a_ref = assemble_matrix(&sys, &op, 5).unwrap();
    let whole = waveop::galerkin::weighted_opnorm(&a_ref, cfg.t_prime, cfg.t).value;
    assert!((report.total - whole).abs() < 1e-8 * whole);
    // triangle sanity
    assert!(report.truncation <= report.total + report.compression + report.estimation + 1e-12);
    assert!(report.compression <= report.total + report.truncation + report.estimation + 1e-12);
}

/// t > t' runs on swapped indices and returns the adjoint; the result is
/// exactly the transpose of the swapped run and reports the same error.
#[test]
fn orientation_handled_by_adjoint() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let noise = Some(GrfSpec {
        order: 1.5,
        kappa: 1.0,
    });
    let ds = generate_dataset(&sys, 80, &op, input, noise, 4, 41).unwrap();
    let mut cfg = exact_recovery_cfg();
    cfg.mode = LevelMode::Fixed(2);
    cfg.jitter = 1e-10;
    cfg.t = 1.0;
    cfg.t_prime = 0.5;
    let learned = estimate(&sys, &ds, &cfg).unwrap();
    assert!(learned.adjoint_of_swapped);

    let mut swapped = cfg;
    std::mem::swap(&mut swapped.t, &mut swapped.t_prime);
    let direct = estimate(&sys, &ds, &swapped).unwrap();
    assert_eq!(
        learned.matrix.to_dense(),
        direct.matrix.to_dense().t().to_owned()
    );

    // the weighted error of the adjoint in the original metric equals the
    // swapped run's error in the swapped metric
    let rep = error_report(&sys, &op, &learned, 5).unwrap();
    let rep_swapped = error_report(&sys, &op, &direct, 5).unwrap();
    assert!(
        (rep.total - rep_swapped.total).abs() <= 1e-10 * rep.total.max(rep_swapped.total),
        "{} vs {}",
        rep.total,
        rep_swapped.total
    );
}

#[test]
fn learned_operator_file_round_trip() {
    let sys = WaveletSystem::new(2, 4, 8).unwrap();
    let op = PreparedOperator::new(
        OperatorSpec::FourierMultiplier {
            kappa: 1.0,
            order: -2.0,
        },
        sys.grid_size(),
    )
    .unwrap();
    let input = GrfSpec {
        order: 1.5,
        kappa: 1.0,
    };
    let ds = generate_dataset(&sys, 40, &op, input, None, 4, 23).unwrap();
    let learned = estimate(&sys, &ds, &exact_recovery_cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("learned.txt");
    waveop::estimator::io::save_learned(&path, &learned).unwrap();
    let back = waveop::estimator::io::load_learned(&path).unwrap();
    assert_eq!(learned.matrix.to_dense(), back.matrix.to_dense());
    assert_eq!(learned.selected, back.selected);
    assert_eq!(learned.config.t, back.config.t);
    assert_eq!(
        learned.target_mask.columns(),
        back.target_mask.columns()
    );
}
