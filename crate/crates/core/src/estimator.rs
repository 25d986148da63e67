//! Nested-support regression estimator.
//!
//! Each column of the truncated wavelet matrix is fit by ordinary least
//! squares on an enlarged regression support, then the concatenated columns
//! are restricted to the target support and symmetrized: entries with
//! j <= j' are taken in place, entries below the diagonal are copied from
//! their reflected position, which the support reflection property
//! guarantees was regressed (for t <= t'). Orientation t > t' runs on
//! swapped indices and returns the adjoint.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::compression::{build_mask, check_inclusion, CompressionParams, SupportMask};
use crate::fields::{Dataset, PreparedOperator};
use crate::galerkin::{
    assemble_matrix, compression_error, truncation_error_from_reference, weighted_opnorm,
    BlockMatrix,
};
use crate::linalg::Cholesky;
use crate::wavelets::{index_from_flat, num_indices, WaveletSystem};
use crate::{Error, Result};

/// How the truncation level J is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelMode {
    /// `J = ceil(log2 N / ((2 + rho)(t + t' - r)))`.
    Auto,
    /// User-fixed J; the enlarged level scales by the same ratio.
    Fixed(usize),
}

/// Regression-support policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionSupport {
    /// supp(J~, t~, t~') per the nested-support rule.
    Nested,
    /// All of Lambda_{J~} for every column; with noiseless band-limited
    /// data this makes the regression model exactly consistent.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub t: f64,
    pub t_prime: f64,
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub sigma: f64,
    pub dt: usize,
    pub a: f64,
    /// Ridge fallback for near-singular Gram matrices, in [0, 1e-6).
    pub jitter: f64,
    pub mode: LevelMode,
    pub regression: RegressionSupport,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > self.r / 2.0 && self.t_prime > self.r / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "need min(t, t') > r/2, got t = {}, t' = {}, r = {}",
                self.t, self.t_prime, self.r
            )));
        }
        if !(0.0..1e-6).contains(&self.jitter) {
            return Err(Error::InvalidParameter(format!(
                "jitter must lie in [0, 1e-6), got {}",
                self.jitter
            )));
        }
        Ok(())
    }

    /// Canonical orientation (t <= t'); returns whether a swap happened.
    fn oriented(&self) -> (EstimatorConfig, bool) {
        if self.t > self.t_prime {
            let mut c = *self;
            std::mem::swap(&mut c.t, &mut c.t_prime);
            (c, true)
        } else {
            (*self, false)
        }
    }

    pub fn compression_params(&self, j_top: usize) -> CompressionParams {
        CompressionParams {
            j_top,
            t: self.t,
            t_prime: self.t_prime,
            r: self.r,
            n_dim: 1,
            sigma: self.sigma,
            dt: self.dt,
            a: self.a,
        }
    }
}

/// Rate exponent rho: twice the largest of the four variance-driving
/// ratios, clipped at zero.
pub fn rho(cfg: &EstimatorConfig, n_dim: usize) -> f64 {
    let n = n_dim as f64;
    let t = cfg.t;
    let tp = cfg.t_prime;
    let r = cfg.r;
    let terms = [
        (-t - cfg.r2 + n / 2.0) / (cfg.sigma - n / 2.0 + t - r / 2.0),
        (-tp - cfg.r2 + n / 2.0) / (cfg.sigma - n / 2.0 + tp - r / 2.0),
        (-t - tp + cfg.r1 - cfg.r2 + n) / (t + tp + 2.0 * cfg.dt as f64),
        (-t - tp + cfg.r1 - cfg.r2) / (t + tp - r),
        0.0,
    ];
    2.0 * terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// The resolved levels and enlarged-metric indices of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedParams {
    pub j: usize,
    pub j_tilde: usize,
    pub t_tilde: f64,
    pub t_tilde_prime: f64,
    pub rho: f64,
    pub eps1: f64,
}

/// Resolves (J, J~, t~, t~') from the sample size.
///
/// The enlarged-level ratio can give J~ < J for tiny J; the support
/// monotonicity argument needs J~ >= J, so the value is clamped up.
pub fn select_parameters(
    n_samples: usize,
    cfg: &EstimatorConfig,
    n_dim: usize,
) -> Result<SelectedParams> {
    cfg.validate()?;
    let (cfg, _) = cfg.oriented();
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "parameter selection needs N >= 2, got {n_samples}"
        )));
    }
    let n = n_dim as f64;
    let rho_v = rho(&cfg, n_dim);
    let bias = cfg.t + cfg.t_prime - cfg.r;
    let j = match cfg.mode {
        LevelMode::Auto => {
            let raw = (n_samples as f64).log2() / ((2.0 + rho_v) * bias);
            raw.ceil().max(1.0) as usize
        }
        LevelMode::Fixed(j) => j.max(1),
    };
    let eps1 = n * bias / (cfg.sigma - n / 2.0 + cfg.t - cfg.r / 2.0);
    let ratio = (bias + eps1) / (cfg.t_prime.min(cfg.r1) + cfg.t - cfg.r);
    let j_tilde = ((ratio * j as f64).ceil() as usize).max(j);
    Ok(SelectedParams {
        j,
        j_tilde,
        t_tilde: cfg.t_prime,
        t_tilde_prime: cfg.t_prime.max(cfg.r1),
        rho: rho_v,
        eps1,
    })
}

/// Raw columnwise least-squares output: for each target column, the
/// regression support and the fitted coefficients on it.
#[derive(Debug, Clone)]
pub struct RawRegression {
    pub j_target: usize,
    pub j_reg: usize,
    /// Indexed by flat column in Lambda_J.
    pub columns: Vec<RegressedColumn>,
}

#[derive(Debug, Clone)]
pub struct RegressedColumn {
    /// Sorted flat indices into Lambda_{J~}.
    pub omega: Vec<usize>,
    pub coefs: Vec<f64>,
    pub condition: f64,
    pub jittered: bool,
}

impl RawRegression {
    /// Fitted value at (row, col), if the row was regressed for that column.
    pub fn value_at(&self, col: usize, row: usize) -> Option<f64> {
        let rc = &self.columns[col];
        rc.omega.binary_search(&row).ok().map(|i| rc.coefs[i])
    }
}

fn gather_gram(u: &ArrayView2<f64>, omega: &[usize]) -> Array2<f64> {
    let p = omega.len();
    let n = u.nrows();
    let mut sub = Array2::<f64>::zeros((n, p));
    for (c, &idx) in omega.iter().enumerate() {
        sub.column_mut(c).assign(&u.column(idx));
    }
    let mut g = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let v = sub.column(i).dot(&sub.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Columnwise least squares on the enlarged supports.
///
/// For each flat column `c` of Lambda_{j_target}, solves the normal
/// equations on the sub-design `U[:, Omega_c]` by Cholesky, falling back to
/// an additive `jitter * trace(G)/|Omega|` ridge when the factorization
/// fails. Gram factors are shared across columns with identical supports.
pub fn columnwise_regression(
    data: &Dataset,
    regression_mask: &SupportMask,
    j_target: usize,
    jitter: f64,
) -> Result<RawRegression> {
    let j_reg = regression_mask.j_top();
    if data.meta.j_tilde < j_reg {
        return Err(Error::Resolution(format!(
            "dataset carries levels up to {}, regression support needs {}",
            data.meta.j_tilde, j_reg
        )));
    }
    if j_target > j_reg {
        return Err(Error::InvalidParameter(format!(
            "target level {j_target} exceeds regression level {j_reg}"
        )));
    }
    let n = data.meta.n_samples;
    let cols_reg = num_indices(j_reg);
    let u = data.u.slice(ndarray::s![.., ..cols_reg]);
    if u.iter().any(|v| !v.is_finite()) || data.f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dataset contains non-finite entries".into()));
    }

    // Fail fast on the worst under-determined column.
    let n_target = num_indices(j_target);
    let mut worst = (0usize, 0usize);
    for c in 0..n_target {
        let len = regression_mask.column(c).len();
        if len > worst.1 {
            worst = (c, len);
        }
    }
    if worst.1 > n {
        let lam = index_from_flat(worst.0);
        return Err(Error::UnderDetermined {
            column: format!("(j={}, k={})", lam.j, lam.k),
            omega: worst.1,
            n,
        });
    }

    struct Shared {
        chol: Arc<Cholesky>,
        condition: f64,
        jittered: bool,
    }
    let cache: Mutex<HashMap<Vec<usize>, Arc<Shared>>> = Mutex::new(HashMap::new());

    let factor = |omega: &[usize]| -> Result<Arc<Shared>> {
        if let Some(hit) = cache.lock().unwrap().get(omega) {
            return Ok(hit.clone());
        }
        let g = gather_gram(&u, omega);
        let (chol, jittered) = match Cholesky::new(&g) {
            Ok(c) => (c, false),
            Err(e) => {
                if jitter <= 0.0 {
                    return Err(Error::LinearSolve(format!(
                        "gram matrix singular with no jitter configured: {e}"
                    )));
                }
                let p = omega.len() as f64;
                let trace: f64 = (0..omega.len()).map(|i| g[(i, i)]).sum();
                // floor at the bare jitter so identically-zero designs
                // still factor (and solve to zero)
                let ridge = (jitter * trace / p).max(jitter);
                let mut gj = g.clone();
                for i in 0..omega.len() {
                    gj[(i, i)] += ridge;
                }
                (
                    Cholesky::new(&gj).map_err(|e| {
                        Error::LinearSolve(format!("gram not factorizable even with ridge: {e}"))
                    })?,
                    true,
                )
            }
        };
        let shared = Arc::new(Shared {
            condition: chol.condition_estimate(),
            chol: Arc::new(chol),
            jittered,
        });
        cache
            .lock()
            .unwrap()
            .entry(omega.to_vec())
            .or_insert_with(|| shared.clone());
        Ok(shared)
    };

    let columns: Vec<RegressedColumn> = (0..n_target)
        .into_par_iter()
        .map(|c| -> Result<RegressedColumn> {
            let omega = regression_mask.column(c);
            if omega.is_empty() {
                return Ok(RegressedColumn {
                    omega: Vec::new(),
                    coefs: Vec::new(),
                    condition: 1.0,
                    jittered: false,
                });
            }
            let shared = factor(omega)?;
            let mut rhs = Array1::<f64>::zeros(omega.len());
            let f_col = data.f.column(c);
            for (i, &idx) in omega.iter().enumerate() {
                rhs[i] = u.column(idx).dot(&f_col);
            }
            let sol = shared.chol.solve(&rhs);
            if sol.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("regression column {c}")));
            }
            Ok(RegressedColumn {
                omega: omega.to_vec(),
                coefs: sol.to_vec(),
                condition: shared.condition,
                jittered: shared.jittered,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RawRegression {
        j_target,
        j_reg,
        columns,
    })
}

/// Restriction to the target support plus symmetrization: above or on the
/// diagonal (j <= j') entries are used in place, below it the reflected
/// regression value stands in.
pub fn restrict_symmetrize(
    raw: &RawRegression,
    target_mask: &SupportMask,
) -> Result<BlockMatrix> {
    if target_mask.j_top() != raw.j_target {
        return Err(Error::DimensionMismatch {
            expected: num_indices(raw.j_target),
            got: target_mask.dim(),
            context: "restrict_symmetrize target level",
        });
    }
    let n = target_mask.dim();
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for c in 0..n {
        let jc = index_from_flat(c).j;
        let mut col = Vec::with_capacity(target_mask.column(c).len());
        for &r in target_mask.column(c) {
            let jr = index_from_flat(r).j;
            let v = if jr <= jc {
                raw.value_at(c, r)
            } else {
                raw.value_at(r, c)
            };
            let v = v.ok_or_else(|| {
                Error::Invariant(format!(
                    "target entry ({r}, {c}) not covered by the regression support; \
                     the reflection property requires t <= t'"
                ))
            })?;
            col.push((r, v));
        }
        columns.push(col);
    }
    BlockMatrix::sparse(raw.j_target, columns)
}

/// The assembled estimator.
#[derive(Debug, Clone)]
pub struct LearnedOperator {
    /// Mask-sparse matrix over Lambda_J in the original (t, t') orientation.
    pub matrix: BlockMatrix,
    /// Support of the stored matrix.
    pub target_mask: SupportMask,
    /// Support used for the regressions (enlarged level), in the oriented
    /// frame actually regressed.
    pub regression_mask: SupportMask,
    pub selected: SelectedParams,
    pub config: EstimatorConfig,
    /// Whether the run was performed on swapped (t, t') and transposed back.
    pub adjoint_of_swapped: bool,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Per target column: Gram condition estimate.
    pub condition: Vec<f64>,
    /// Columns where the ridge fallback engaged.
    pub jittered_columns: Vec<usize>,
}

impl LearnedOperator {
    pub fn j_top(&self) -> usize {
        self.matrix.j_top()
    }

    /// Matrix-vector product in wavelet coordinates.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }
}

fn transpose_mask(mask: &SupportMask) -> SupportMask {
    let n = mask.dim();
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, rows) in mask.columns().iter().enumerate() {
        for &r in rows {
            cols[r].push(c);
        }
    }
    SupportMask::new(mask.j_top(), cols).expect("transpose preserves validity")
}

/// Runs the full pipeline: parameter selection, masks, columnwise
/// regression, restriction and symmetrization.
pub fn estimate(
    sys: &WaveletSystem,
    data: &Dataset,
    cfg: &EstimatorConfig,
) -> Result<LearnedOperator> {
    cfg.validate()?;
    let (oriented, swapped) = cfg.oriented();
    let selected = select_parameters(data.meta.n_samples, &oriented, 1)?;
    if data.meta.j_tilde < selected.j_tilde {
        return Err(Error::Resolution(format!(
            "run needs dataset levels up to J~ = {} but the dataset stops at {}; \
             regenerate with a finer grid or reduce N",
            selected.j_tilde, data.meta.j_tilde
        )));
    }

    let target_params = oriented.compression_params(selected.j);
    let target_mask = build_mask(sys, &target_params)?;

    let regression_mask = match oriented.regression {
        RegressionSupport::Full => SupportMask::full(selected.j_tilde),
        RegressionSupport::Nested => {
            let mut p = target_params;
            p.j_top = selected.j_tilde;
            p.t = selected.t_tilde;
            p.t_prime = selected.t_tilde_prime;
            build_mask(sys, &p)?
        }
    };
    if !check_inclusion(&target_mask, &regression_mask)? {
        return Err(Error::Invariant(
            "target support is not contained in the regression support".into(),
        ));
    }

    let raw = columnwise_regression(data, &regression_mask, selected.j, oriented.jitter)?;
    let estimate = restrict_symmetrize(&raw, &target_mask)?;

    let diagnostics = Diagnostics {
        condition: raw.columns.iter().map(|c| c.condition).collect(),
        jittered_columns: raw
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.jittered)
            .map(|(i, _)| i)
            .collect(),
    };

    let (matrix, mask) = if swapped {
        (estimate.transposed(), transpose_mask(&target_mask))
    } else {
        (estimate, target_mask)
    };

    Ok(LearnedOperator {
        matrix,
        target_mask: mask,
        regression_mask,
        selected,
        config: *cfg,
        adjoint_of_swapped: swapped,
        diagnostics,
    })
}

/// Solver-grade variant: both supports come from the eps-modified rule
/// (relaxed slopes and thresholds) at a truncation level balancing the
/// bias against the variance scale. The nested-inclusion guard still runs,
/// so an inconsistent relaxation surfaces as an error rather than a silent
/// reflection failure.
pub fn estimate_solver_grade(
    sys: &WaveletSystem,
    data: &Dataset,
    cfg: &EstimatorConfig,
    eps: f64,
) -> Result<LearnedOperator> {
    cfg.validate()?;
    let (oriented, swapped) = cfg.oriented();
    let selected = select_parameters(data.meta.n_samples, &oriented, 1)?;
    let j = match oriented.mode {
        LevelMode::Fixed(j) => j.max(1),
        LevelMode::Auto => {
            crate::solver::select_solver_level(
                data.meta.n_samples,
                oriented.t,
                oriented.t_prime,
                oriented.r,
                selected.rho,
                eps,
                sys.params().jmax,
            )?
            .j_star
        }
    };
    // keep the enlarged-level ratio of the standard rule
    let ratio = selected.j_tilde as f64 / selected.j.max(1) as f64;
    let j_tilde = ((ratio * j as f64).ceil() as usize).max(j);
    if data.meta.j_tilde < j_tilde {
        return Err(Error::Resolution(format!(
            "solver-grade run needs dataset levels up to {j_tilde}, have {}",
            data.meta.j_tilde
        )));
    }
    let mut target_params = oriented.compression_params(j);
    let target_mask = crate::compression::build_mask_new(sys, &target_params, eps)?;
    let regression_mask = match oriented.regression {
        RegressionSupport::Full => SupportMask::full(j_tilde),
        RegressionSupport::Nested => {
            target_params.j_top = j_tilde;
            target_params.t = selected.t_tilde;
            target_params.t_prime = selected.t_tilde_prime;
            crate::compression::build_mask_new(sys, &target_params, eps)?
        }
    };
    if !check_inclusion(&target_mask, &regression_mask)? {
        return Err(Error::Invariant(
            "solver-grade target support is not contained in the regression support".into(),
        ));
    }
    let raw = columnwise_regression(data, &regression_mask, j, oriented.jitter)?;
    let matrix = restrict_symmetrize(&raw, &target_mask)?;
    let diagnostics = Diagnostics {
        condition: raw.columns.iter().map(|c| c.condition).collect(),
        jittered_columns: raw
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.jittered)
            .map(|(i, _)| i)
            .collect(),
    };
    let selected = SelectedParams {
        j,
        j_tilde,
        ..selected
    };
    let (matrix, mask) = if swapped {
        (matrix.transposed(), transpose_mask(&target_mask))
    } else {
        (matrix, target_mask)
    };
    Ok(LearnedOperator {
        matrix,
        target_mask: mask,
        regression_mask,
        selected,
        config: *cfg,
        adjoint_of_swapped: swapped,
        diagnostics,
    })
}

/// Error components of a learned operator against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub total: f64,
    pub truncation: f64,
    pub compression: f64,
    /// Omitted-variable bias and variance, jointly (not separable from one
    /// realization).
    pub estimation: f64,
}

/// Weighted-norm error decomposition at a reference level `j_ref >= J + 2`.
pub fn error_report(
    sys: &WaveletSystem,
    truth: &PreparedOperator,
    learned: &LearnedOperator,
    j_ref: usize,
) -> Result<ErrorReport> {
    let a_ref = assemble_matrix(sys, truth, j_ref)?;
    error_report_from_reference(&a_ref, learned)
}

/// [`error_report`] against an already assembled reference matrix (sweeps
/// reuse one assembly across many runs).
pub fn error_report_from_reference(
    a_ref: &BlockMatrix,
    learned: &LearnedOperator,
) -> Result<ErrorReport> {
    let j = learned.j_top();
    let j_ref = a_ref.j_top();
    if j_ref < j + 2 {
        return Err(Error::InvalidParameter(format!(
            "reference level {j_ref} must be >= J + 2 = {}",
            j + 2
        )));
    }
    let (t, tp) = (learned.config.t, learned.config.t_prime);
    let a_j = a_ref.principal_block(j)?;

    let padded = learned.matrix.zero_padded(j_ref)?;
    let total = weighted_opnorm(&padded.sub(a_ref)?, tp, t).value;
    let truncation = truncation_error_from_reference(a_ref, j, t, tp);
    let compression = compression_error(&a_j, &learned.target_mask, t, tp)?;
    let masked_truth = a_j.on_mask(&learned.target_mask)?;
    let estimation = weighted_opnorm(&learned.matrix.sub(&masked_truth)?, tp, t).value;

    Ok(ErrorReport {
        total,
        truncation,
        compression,
        estimation,
    })
}

pub mod io {
    //! Learned-operator persistence: config header plus entry triplets.

    use std::fs;
    use std::path::Path;

    use super::{
        Diagnostics, EstimatorConfig, LearnedOperator, LevelMode, RegressionSupport,
        SelectedParams,
    };
    use crate::compression::SupportMask;
    use crate::galerkin::BlockMatrix;
    use crate::wavelets::num_indices;
    use crate::{Error, Result};

    pub fn save_learned(path: &Path, op: &LearnedOperator) -> Result<()> {
        let mut out = String::new();
        let c = &op.config;
        out.push_str(&format!("j_top = {}\n", op.j_top()));
        out.push_str(&format!(
            "config = t:{} t':{} r:{} r1:{} r2:{} sigma:{} dt:{} a:{} jitter:{}\n",
            c.t, c.t_prime, c.r, c.r1, c.r2, c.sigma, c.dt, c.a, c.jitter
        ));
        out.push_str(&format!(
            "mode = {}\n",
            match c.mode {
                LevelMode::Auto => "auto".to_string(),
                LevelMode::Fixed(j) => format!("fixed:{j}"),
            }
        ));
        out.push_str(&format!(
            "regression = {}\n",
            match c.regression {
                RegressionSupport::Nested => "nested",
                RegressionSupport::Full => "full",
            }
        ));
        let s = &op.selected;
        out.push_str(&format!(
            "selected = J:{} Jt:{} tt:{} ttp:{} rho:{} eps1:{}\n",
            s.j, s.j_tilde, s.t_tilde, s.t_tilde_prime, s.rho, s.eps1
        ));
        out.push_str(&format!("adjoint = {}\n", op.adjoint_of_swapped));
        let cols = op
            .matrix
            .sparse_columns()
            .expect("learned operators are mask-sparse");
        for (c, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out.push_str(&format!("{r} {c} {v:.16e}\n"));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load_learned(path: &Path) -> Result<LearnedOperator> {
        let text = fs::read_to_string(path)?;
        let file = path.display().to_string();
        let bad = |message: String| Error::Parse {
            file: file.clone(),
            message,
        };
        let mut j_top: Option<usize> = None;
        let mut config: Option<EstimatorConfig> = None;
        let mut mode = LevelMode::Auto;
        let mut regression = RegressionSupport::Nested;
        let mut selected: Option<SelectedParams> = None;
        let mut adjoint = false;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("j_top =") {
                j_top = Some(v.trim().parse().map_err(|e| bad(format!("j_top: {e}")))?);
            } else if let Some(v) = line.strip_prefix("config =") {
                let mut map = std::collections::HashMap::new();
                for tok in v.split_whitespace() {
                    let (k, val) = tok
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad config token {tok}")))?;
                    map.insert(k.to_string(), val.to_string());
                }
                let f = |k: &str| -> Result<f64> {
                    map.get(k)
                        .ok_or_else(|| bad(format!("missing config field {k}")))?
                        .parse()
                        .map_err(|e| bad(format!("{k}: {e}")))
                };
                config = Some(EstimatorConfig {
                    t: f("t")?,
                    t_prime: f("t'")?,
                    r: f("r")?,
                    r1: f("r1")?,
                    r2: f("r2")?,
                    sigma: f("sigma")?,
                    dt: f("dt")? as usize,
                    a: f("a")?,
                    jitter: f("jitter")?,
                    mode: LevelMode::Auto,
                    regression: RegressionSupport::Nested,
                });
            } else if let Some(v) = line.strip_prefix("mode =") {
                let v = v.trim();
                mode = if v == "auto" {
                    LevelMode::Auto
                } else if let Some(j) = v.strip_prefix("fixed:") {
                    LevelMode::Fixed(j.parse().map_err(|e| bad(format!("mode: {e}")))?)
                } else {
                    return Err(bad(format!("unknown mode {v}")));
                };
            } else if let Some(v) = line.strip_prefix("regression =") {
                regression = match v.trim() {
                    "nested" => RegressionSupport::Nested,
                    "full" => RegressionSupport::Full,
                    other => return Err(bad(format!("unknown regression policy {other}"))),
                };
            } else if let Some(v) = line.strip_prefix("selected =") {
                let mut map = std::collections::HashMap::new();
                for tok in v.split_whitespace() {
                    let (k, val) = tok
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad selected token {tok}")))?;
                    map.insert(k.to_string(), val.to_string());
                }
                let f = |k: &str| -> Result<f64> {
                    map.get(k)
                        .ok_or_else(|| bad(format!("missing selected field {k}")))?
                        .parse()
                        .map_err(|e| bad(format!("{k}: {e}")))
                };
                selected = Some(SelectedParams {
                    j: f("J")? as usize,
                    j_tilde: f("Jt")? as usize,
                    t_tilde: f("tt")?,
                    t_tilde_prime: f("ttp")?,
                    rho: f("rho")?,
                    eps1: f("eps1")?,
                });
            } else if let Some(v) = line.strip_prefix("adjoint =") {
                adjoint = v.trim() == "true";
            } else {
                let mut it = line.split_whitespace();
                let r: usize = it
                    .next()
                    .ok_or_else(|| bad("missing row".into()))?
                    .parse()
                    .map_err(|e| bad(format!("row: {e}")))?;
                let c: usize = it
                    .next()
                    .ok_or_else(|| bad("missing col".into()))?
                    .parse()
                    .map_err(|e| bad(format!("col: {e}")))?;
                let v: f64 = it
                    .next()
                    .ok_or_else(|| bad("missing value".into()))?
                    .parse()
                    .map_err(|e| bad(format!("value: {e}")))?;
                triplets.push((r, c, v));
            }
        }
        let j_top = j_top.ok_or_else(|| bad("missing j_top".into()))?;
        let mut config = config.ok_or_else(|| bad("missing config".into()))?;
        config.mode = mode;
        config.regression = regression;
        let selected = selected.ok_or_else(|| bad("missing selected".into()))?;
        let n = num_indices(j_top);
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut mask_cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(bad(format!("entry ({r}, {c}) out of range")));
            }
            cols[c].push((r, v));
            mask_cols[c].push(r);
        }
        for (col, mc) in cols.iter_mut().zip(mask_cols.iter_mut()) {
            col.sort_by_key(|e| e.0);
            mc.sort_unstable();
        }
        let matrix = BlockMatrix::sparse(j_top, cols)?;
        let target_mask = SupportMask::new(j_top, mask_cols)?;
        Ok(LearnedOperator {
            matrix,
            target_mask,
            regression_mask: SupportMask::empty(selected.j_tilde),
            selected,
            config,
            adjoint_of_swapped: adjoint,
            diagnostics: Diagnostics::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> EstimatorConfig {
        EstimatorConfig {
            t: 1.0,
            t_prime: 1.0,
            r: -2.0,
            r1: 1.5,
            r2: 1.5,
            sigma: 10.0,
            dt: 4,
            a: 2.0,
            jitter: 1e-10,
            mode: LevelMode::Auto,
            regression: RegressionSupport::Nested,
        }
    }

    /// rho = 0 in the parametric regime: min(t,t') >= -r2 + n/2 and
    /// t + t' >= r1 - r2 + n.
    #[test]
    fn rho_parametric_regime() {
        let cfg = base_cfg();
        assert_eq!(rho(&cfg, 1), 0.0);
    }

    /// Frozen evaluation: t=t'=0, r=-2, r1=2.5, r2=1.5, sigma=10, dt=4
    /// gives terms {-1/10.5, -1/10.5, 2/8, 1/2, 0}, so rho = 1.
    #[test]
    fn rho_nonparametric_frozen() {
        let mut cfg = base_cfg();
        cfg.t = 0.0;
        cfg.t_prime = 0.0;
        cfg.r1 = 2.5;
        cfg.r2 = 1.5;
        let v = rho(&cfg, 1);
        assert!((v - 1.0).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn rho_symmetric_in_t_t_prime() {
        let mut cfg = base_cfg();
        cfg.t = 0.3;
        cfg.t_prime = 1.2;
        let a = rho(&cfg, 1);
        std::mem::swap(&mut cfg.t, &mut cfg.t_prime);
        assert_eq!(a, rho(&cfg, 1));
    }

    /// Frozen from the parameter rule: rho = 0 config at N = 4096 gives
    /// J = ceil(12 / (2 * 4)) = 2.
    #[test]
    fn select_parameters_frozen() {
        let cfg = base_cfg();
        let sel = select_parameters(4096, &cfg, 1).unwrap();
        assert_eq!(sel.j, 2);
        assert_eq!(sel.t_tilde, 1.0);
        assert_eq!(sel.t_tilde_prime, 1.5); // r1 > t'
        assert!(sel.j_tilde >= sel.j);
    }

    #[test]
    fn doubling_n_increases_j_by_at_most_one() {
        let cfg = base_cfg();
        let mut prev = select_parameters(4, &cfg, 1).unwrap().j;
        let mut n = 8;
        while n <= 1 << 20 {
            let j = select_parameters(n, &cfg, 1).unwrap().j;
            assert!(j >= prev && j <= prev + 1, "N={n}: {prev} -> {j}");
            prev = j;
            n *= 2;
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_cfg();
        cfg.jitter = 1e-5;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.t = -2.0;
        assert!(cfg.validate().is_err());
    }
}
