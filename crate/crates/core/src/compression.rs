//! The learning-oriented compression support supp(J, t, t').
//!
//! An index pair (lambda, lambda') is kept when the support hulls are
//! closer than the threshold tau_{jj'} and both blockwise slope conditions
//! hold. Blocks failing a slope condition strictly form the discarded
//! regions D1/D2; the remaining blocks split into D3/D4 (threshold pinned
//! at the coarser scale), D5 (exponential threshold) and D6 (kept whole).
//! Boundary ties between the kept regions go to the lower-numbered region,
//! and a pair exactly on a slope or distance boundary is kept (inclusive
//! comparisons, with a 1e-12 relative slack so grid points never flip
//! nondeterministically).

use crate::wavelets::{
    flat_index, level_offset, level_size, num_indices, FamilyConstants, WaveletIndex,
    WaveletSystem,
};
use crate::{Error, Result};

/// Parameters of the support set supp(J, t, t').
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionParams {
    /// Truncation level J.
    pub j_top: usize,
    /// Sobolev indices (t, t') of the error metric, `t' >= t > r/2`.
    pub t: f64,
    pub t_prime: f64,
    /// Operator order r.
    pub r: f64,
    /// Spatial dimension (1 on the circle; kept symbolic in the formulas).
    pub n_dim: usize,
    /// Scale-separation decay exponent.
    pub sigma: f64,
    /// Dual approximation order (vanishing moments of the primal wavelet).
    pub dt: usize,
    /// Threshold constant a > 1.
    pub a: f64,
}

/// Relative slack used for all boundary comparisons.
const SLACK: f64 = 1e-12;

fn le_slack(a: f64, b: f64) -> bool {
    a <= b + SLACK * a.abs().max(b.abs()).max(1.0)
}

fn lt_strict(a: f64, b: f64) -> bool {
    !le_slack(b, a)
}

impl CompressionParams {
    /// Structural validation; the finer Assumption-window checks are
    /// reported by [`sigma_window_warnings`] instead of failing.
    pub fn validate(&self) -> Result<()> {
        if self.n_dim != 1 {
            return Err(Error::InvalidParameter(format!(
                "only n = 1 is exercised, got {}",
                self.n_dim
            )));
        }
        if !(self.t_prime >= self.t && self.t > self.r / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "need t' >= t > r/2, got t = {}, t' = {}, r = {}",
                self.t, self.t_prime, self.r
            )));
        }
        if self.a <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "threshold constant a must exceed 1, got {}",
                self.a
            )));
        }
        if 2.0 * self.dt as f64 + self.r <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "2 dt + r = {} must be positive (dual order too small for this operator)",
                2.0 * self.dt as f64 + self.r
            )));
        }
        if self.slope2_denominator() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma - n/2 + t - r/2 = {} must be positive",
                self.slope2_denominator()
            )));
        }
        Ok(())
    }

    fn half_n(&self) -> f64 {
        self.n_dim as f64 / 2.0
    }

    /// sigma - n/2 + t' - r/2, the denominator of the first slope line.
    fn slope1_denominator(&self) -> f64 {
        self.sigma - self.half_n() + self.t_prime - self.r / 2.0
    }

    /// sigma - n/2 + t - r/2, the denominator of the second slope line.
    fn slope2_denominator(&self) -> f64 {
        self.sigma - self.half_n() + self.t - self.r / 2.0
    }

    fn bias_exponent(&self) -> f64 {
        self.t + self.t_prime - self.r
    }

    /// Right-hand side of `j <= ...` (first slope condition), shifted by
    /// `log_shift / (sigma - n/2 + t' - r/2)` in the modified variant.
    fn slope1_rhs(&self, j_prime: usize, log_shift: f64) -> f64 {
        let den = self.slope1_denominator();
        (self.bias_exponent() * self.j_top as f64
            + (self.sigma - self.half_n() - (self.t - self.r / 2.0)) * j_prime as f64
            + log_shift)
            / den
    }

    /// Right-hand side of `j' <= ...` (second slope condition).
    fn slope2_rhs(&self, j: usize, log_shift: f64) -> f64 {
        let den = self.slope2_denominator();
        (self.bias_exponent() * self.j_top as f64
            + (self.sigma - self.half_n() - (self.t_prime - self.r / 2.0)) * j as f64
            + log_shift)
            / den
    }

    fn slope1_holds(&self, j: usize, j_prime: usize, log_shift: f64) -> bool {
        le_slack(j as f64, self.slope1_rhs(j_prime, log_shift))
    }

    fn slope2_holds(&self, j: usize, j_prime: usize, log_shift: f64) -> bool {
        le_slack(j_prime as f64, self.slope2_rhs(j, log_shift))
    }

    /// Exponent of the second threshold branch,
    /// `(J(t+t'-r) - j t' - j' t - (j+j') dt + log_shift) / (2 dt + r)`.
    fn tau_exponent(&self, j: usize, j_prime: usize, log_shift: f64) -> f64 {
        (self.bias_exponent() * self.j_top as f64
            - j as f64 * self.t_prime
            - j_prime as f64 * self.t
            - (j + j_prime) as f64 * self.dt as f64
            + log_shift)
            / (2.0 * self.dt as f64 + self.r)
    }

    fn tau_shifted(&self, j: usize, j_prime: usize, log_shift: f64) -> f64 {
        let coarse = (2.0f64).powi(-(j.min(j_prime) as i32));
        let exponential = (2.0f64).powf(self.tau_exponent(j, j_prime, log_shift));
        self.a * coarse.max(exponential)
    }
}

/// Distance threshold tau_{jj'} of the standard compression rule.
pub fn tau(j: usize, j_prime: usize, p: &CompressionParams) -> Result<f64> {
    p.validate()?;
    Ok(p.tau_shifted(j, j_prime, 0.0))
}

/// The six blockwise regions of the (j, j') plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::D1 => "D1",
            Region::D2 => "D2",
            Region::D3 => "D3",
            Region::D4 => "D4",
            Region::D5 => "D5",
            Region::D6 => "D6",
        }
    }
}

/// Classifies a block. D1/D2 are exactly the blocks discarded by the slope
/// conditions (strict failure, matching the inclusive mask); among the kept
/// regions the checks run in increasing region number, so boundary ties
/// resolve toward the lower-numbered region.
pub fn classify_region(j: usize, j_prime: usize, p: &CompressionParams) -> Region {
    debug_assert!(j <= p.j_top && j_prime <= p.j_top);
    if j > j_prime && !p.slope1_holds(j, j_prime, 0.0) {
        return Region::D1;
    }
    if j_prime > j && !p.slope2_holds(j, j_prime, 0.0) {
        return Region::D2;
    }
    // D3's lower line says the coarse-scale branch 2^{-j'} dominates the
    // exponential branch of tau; ditto D4 with 2^{-j}.
    if j > j_prime {
        let line = (p.bias_exponent() * p.j_top as f64
            + (p.dt as f64 + p.r - p.t) * j_prime as f64)
            / (p.dt as f64 + p.t_prime);
        if le_slack(line, j as f64) {
            return Region::D3;
        }
    }
    if j_prime > j {
        let line = (p.bias_exponent() * p.j_top as f64
            + (p.dt as f64 + p.r - p.t_prime) * j as f64)
            / (p.dt as f64 + p.t);
        if le_slack(line, j_prime as f64) {
            return Region::D4;
        }
    }
    let expr = p.bias_exponent() * p.j_top as f64
        - j as f64 * p.t_prime
        - j_prime as f64 * p.t
        - (j + j_prime) as f64 * p.dt as f64;
    if lt_strict(expr, 0.0) {
        Region::D5
    } else {
        Region::D6
    }
}

/// The sparse index set supp(J, t, t'), stored per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMask {
    j_top: usize,
    /// Sorted, duplicate-free flat row indices per flat column.
    columns: Vec<Vec<usize>>,
}

impl SupportMask {
    pub fn new(j_top: usize, columns: Vec<Vec<usize>>) -> Result<Self> {
        let n = num_indices(j_top);
        if columns.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: columns.len(),
                context: "SupportMask columns",
            });
        }
        for col in &columns {
            let mut prev = None;
            for &r in col {
                if r >= n || prev.is_some_and(|p: usize| p >= r) {
                    return Err(Error::Invariant(
                        "mask column must be sorted, duplicate-free, in range".into(),
                    ));
                }
                prev = Some(r);
            }
        }
        Ok(SupportMask { j_top, columns })
    }

    /// All-ones mask over Lambda_J.
    pub fn full(j_top: usize) -> Self {
        let n = num_indices(j_top);
        SupportMask {
            j_top,
            columns: vec![(0..n).collect(); n],
        }
    }

    pub fn empty(j_top: usize) -> Self {
        SupportMask {
            j_top,
            columns: vec![Vec::new(); num_indices(j_top)],
        }
    }

    pub fn j_top(&self) -> usize {
        self.j_top
    }

    pub fn dim(&self) -> usize {
        num_indices(self.j_top)
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn column(&self, c: usize) -> &[usize] {
        &self.columns[c]
    }

    pub fn contains_flat(&self, row: usize, col: usize) -> bool {
        self.columns[col].binary_search(&row).is_ok()
    }

    pub fn contains(&self, row: WaveletIndex, col: WaveletIndex) -> bool {
        self.contains_flat(flat_index(row), flat_index(col))
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }
}

/// Column enumeration cost of a mask build, for complexity assertions.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildStats {
    /// Candidate (row, column) pairs whose distance was actually tested.
    pub pairs_examined: usize,
}

fn build_mask_shifted(
    sys: &WaveletSystem,
    p: &CompressionParams,
    log_shift_slope1: f64,
    log_shift_slope2: f64,
    log_shift_tau: f64,
) -> Result<(SupportMask, BuildStats)> {
    p.validate()?;
    if p.j_top > sys.params().jmax {
        return Err(Error::LevelOutOfRange {
            level: p.j_top,
            min: 0,
            max: sys.params().jmax,
        });
    }
    if p.dt != sys.params().dt {
        return Err(Error::InvalidParameter(format!(
            "compression dt = {} does not match wavelet family dt = {}",
            p.dt,
            sys.params().dt
        )));
    }
    let mut stats = BuildStats::default();
    let n = num_indices(p.j_top);
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n];

    // Geometry per level: hull of psi_{j,0} plus the location shift.
    let base: Vec<_> = (0..=p.j_top)
        .map(|j| sys.support_interval(WaveletIndex::new(j, 0)))
        .collect();
    let shift = |j: usize| -> f64 {
        if j == 0 {
            0.5
        } else {
            (2.0f64).powi(-(j as i32))
        }
    };

    for j_prime in 0..=p.j_top {
        for kp in 0..level_size(j_prime) {
            let col_flat = level_offset(j_prime) + kp;
            let s_col = sys.support_interval(WaveletIndex::new(j_prime, kp));
            for (j, base_j) in base.iter().enumerate() {
                if !p.slope1_holds(j, j_prime, log_shift_slope1)
                    || !p.slope2_holds(j, j_prime, log_shift_slope2)
                {
                    continue;
                }
                let tau = p.tau_shifted(j, j_prime, log_shift_tau);
                let size = level_size(j);
                let reach = tau + base_j.half_width + s_col.half_width;
                let rows = &mut columns[col_flat];
                if reach >= 0.5 {
                    // every pair at this block passes the distance test
                    stats.pairs_examined += size;
                    rows.extend((0..size).map(|k| level_offset(j) + k));
                    continue;
                }
                // Candidate window: centers within `reach` of the column's
                // center, padded by one index against rounding.
                let step = shift(j);
                let c0 = base_j.center;
                let lo = ((s_col.center - reach - c0) / step).floor() as i64 - 1;
                let hi = ((s_col.center + reach - c0) / step).ceil() as i64 + 1;
                if hi - lo + 1 >= size as i64 {
                    for k in 0..size {
                        stats.pairs_examined += 1;
                        let s_row = sys.support_interval(WaveletIndex::new(j, k));
                        if le_slack(s_row.distance(&s_col), tau) {
                            rows.push(level_offset(j) + k);
                        }
                    }
                } else {
                    let mut ks: Vec<usize> = (lo..=hi)
                        .map(|k| k.rem_euclid(size as i64) as usize)
                        .collect();
                    ks.sort_unstable();
                    ks.dedup();
                    for k in ks {
                        stats.pairs_examined += 1;
                        let s_row = sys.support_interval(WaveletIndex::new(j, k));
                        if le_slack(s_row.distance(&s_col), tau) {
                            rows.push(level_offset(j) + k);
                        }
                    }
                }
            }
        }
    }
    for col in columns.iter_mut() {
        col.sort_unstable();
        col.dedup();
    }
    Ok((SupportMask::new(p.j_top, columns)?, stats))
}

/// Builds the standard support mask (distance threshold plus both
/// slope conditions).
pub fn build_mask(sys: &WaveletSystem, p: &CompressionParams) -> Result<SupportMask> {
    build_mask_shifted(sys, p, 0.0, 0.0, 0.0).map(|(m, _)| m)
}

/// [`build_mask`] with the candidate-pair counter exposed.
pub fn build_mask_instrumented(
    sys: &WaveletSystem,
    p: &CompressionParams,
) -> Result<(SupportMask, BuildStats)> {
    build_mask_shifted(sys, p, 0.0, 0.0, 0.0)
}

/// The solver-grade variant: slope conditions relaxed by
/// `log2(J/eps) / (sigma - n/2 + {t', t} - r/2)` and the threshold exponent
/// shifted by `log2(J/eps) / (2 dt + r)`.
pub fn build_mask_new(
    sys: &WaveletSystem,
    p: &CompressionParams,
    eps: f64,
) -> Result<SupportMask> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    // eps in (0, 1] is the intended range; eps = J is also meaningful (the
    // shift vanishes and the mask coincides with the standard one).
    let log_shift = (p.j_top.max(1) as f64 / eps).log2().max(0.0);
    build_mask_shifted(sys, p, log_shift, log_shift, log_shift).map(|(m, _)| m)
}

/// Sparsity statistics of a mask.
#[derive(Debug, Clone)]
pub struct SparsityStats {
    pub global_nnz: usize,
    /// nnz per (j, j') block, rows = j, cols = j'.
    pub per_block_nnz: ndarray::Array2<usize>,
    /// Max nonzeros in any full row of the mask.
    pub max_row_nnz: usize,
    /// Max nonzeros in any full column.
    pub max_col_nnz: usize,
    /// Per-block maximum row occupancy.
    pub per_block_max_row: ndarray::Array2<usize>,
    /// Per-block maximum column occupancy.
    pub per_block_max_col: ndarray::Array2<usize>,
}

pub fn sparsity_stats(mask: &SupportMask) -> SparsityStats {
    let levels = mask.j_top() + 1;
    let n = mask.dim();
    let mut per_block = ndarray::Array2::<usize>::zeros((levels, levels));
    let mut row_counts = vec![0usize; n];
    let mut per_block_col = ndarray::Array2::<usize>::zeros((levels, levels));
    let mut per_block_row = ndarray::Array2::<usize>::zeros((levels, levels));

    let level_of = |flat: usize| crate::wavelets::index_from_flat(flat).j;

    let mut max_col = 0usize;
    for (c, rows) in mask.columns().iter().enumerate() {
        max_col = max_col.max(rows.len());
        let jp = level_of(c);
        let mut block_count = vec![0usize; levels];
        for &r in rows {
            let j = level_of(r);
            per_block[(j, jp)] += 1;
            row_counts[r] += 1;
            block_count[j] += 1;
        }
        for (j, &cnt) in block_count.iter().enumerate() {
            if cnt > per_block_col[(j, jp)] {
                per_block_col[(j, jp)] = cnt;
            }
        }
    }
    // per-block max row occupancy: count (row, j') pairs
    let mut block_row_counts = vec![0usize; n * levels];
    for (c, rows) in mask.columns().iter().enumerate() {
        let jp = level_of(c);
        for &r in rows {
            block_row_counts[r * levels + jp] += 1;
        }
    }
    for r in 0..n {
        let j = level_of(r);
        for jp in 0..levels {
            let cnt = block_row_counts[r * levels + jp];
            if cnt > per_block_row[(j, jp)] {
                per_block_row[(j, jp)] = cnt;
            }
        }
    }
    SparsityStats {
        global_nnz: mask.nnz(),
        per_block_nnz: per_block,
        max_row_nnz: row_counts.iter().copied().max().unwrap_or(0),
        max_col_nnz: max_col,
        per_block_max_row: per_block_row,
        per_block_max_col: per_block_col,
    }
}

/// True iff every pair of `small` also lies in `big` (column layouts are
/// nested, so flat indices are directly comparable).
pub fn check_inclusion(small: &SupportMask, big: &SupportMask) -> Result<bool> {
    if small.j_top() > big.j_top() {
        return Err(Error::InvalidParameter(format!(
            "inclusion requires small.J = {} <= big.J = {}",
            small.j_top(),
            big.j_top()
        )));
    }
    for (c, rows) in small.columns().iter().enumerate() {
        let big_rows = big.column(c);
        let mut it = big_rows.iter();
        'outer: for &r in rows {
            for &b in it.by_ref() {
                if b == r {
                    continue 'outer;
                }
                if b > r {
                    return Ok(false);
                }
            }
            return Ok(false);
        }
    }
    Ok(true)
}

/// Warnings for the admissible-sigma window of the wavelet assumption;
/// `r1` (input regularity) sharpens the lower bound when known.
pub fn sigma_window_warnings(
    p: &CompressionParams,
    r1: Option<f64>,
    constants: &FamilyConstants,
) -> Vec<String> {
    let mut warnings = Vec::new();
    let n2 = p.half_n();
    let mut lower = (n2 + p.t.max(p.t_prime) - p.r / 2.0).max(3.0 * n2 - p.t + p.r / 2.0);
    let mut lower_name = if n2 + p.t.max(p.t_prime) - p.r / 2.0 >= 3.0 * n2 - p.t + p.r / 2.0 {
        "n/2 + max(t,t') - r/2"
    } else {
        "3n/2 - t + r/2"
    };
    if let Some(r1) = r1 {
        let third = p.n_dim as f64 * (p.t_prime + p.t_prime.max(r1) - p.r)
            / (p.t_prime.min(r1) + p.t - p.r);
        if third > lower {
            lower = third;
            lower_name = "n(t' + max(t',r1) - r)/(min(t',r1) + t - r)";
        }
    }
    let uppers = [
        (constants.gamma - p.r / 2.0, "gamma - r/2"),
        (constants.gamma_tilde + p.r / 2.0, "gamma~ + r/2"),
        (p.dt as f64 + n2 + p.r / 2.0, "dt + n/2 + r/2"),
    ];
    let (upper, upper_name) = uppers
        .iter()
        .cloned()
        .fold((f64::INFINITY, ""), |acc, x| if x.0 < acc.0 { x } else { acc });
    if p.sigma <= lower {
        warnings.push(format!(
            "sigma = {} at or below the admissible lower bound {lower:.4} (binding: {lower_name})",
            p.sigma
        ));
    }
    if p.sigma >= upper {
        warnings.push(format!(
            "sigma = {} at or above the admissible upper bound {upper:.4} (binding: {upper_name})",
            p.sigma
        ));
    }
    warnings
}

pub mod io {
    //! Mask persistence: parameter header plus one line of row indices per
    //! column.

    use std::fs;
    use std::path::Path;

    use super::{CompressionParams, SupportMask};
    use crate::{Error, Result};

    pub fn save_mask(path: &Path, mask: &SupportMask, p: Option<&CompressionParams>) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("j_top = {}\n", mask.j_top()));
        if let Some(p) = p {
            out.push_str(&format!(
                "params = t:{} t':{} r:{} n:{} sigma:{} dt:{} a:{}\n",
                p.t, p.t_prime, p.r, p.n_dim, p.sigma, p.dt, p.a
            ));
        }
        for (c, rows) in mask.columns().iter().enumerate() {
            out.push_str(&format!("col {c}:"));
            for r in rows {
                out.push_str(&format!(" {r}"));
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load_mask(path: &Path) -> Result<SupportMask> {
        let text = fs::read_to_string(path)?;
        let file = path.display().to_string();
        let mut j_top = None;
        let mut columns: Vec<Vec<usize>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("params") {
                continue;
            }
            if let Some(v) = line.strip_prefix("j_top =") {
                let j: usize = v.trim().parse().map_err(|e| Error::Parse {
                    file: file.clone(),
                    message: format!("j_top: {e}"),
                })?;
                j_top = Some(j);
                columns = vec![Vec::new(); crate::wavelets::num_indices(j)];
            } else if let Some(rest) = line.strip_prefix("col ") {
                let (idx, rows) = rest.split_once(':').ok_or_else(|| Error::Parse {
                    file: file.clone(),
                    message: format!("bad column line '{line}'"),
                })?;
                let c: usize = idx.trim().parse().map_err(|e| Error::Parse {
                    file: file.clone(),
                    message: format!("column index: {e}"),
                })?;
                if c >= columns.len() {
                    return Err(Error::Parse {
                        file: file.clone(),
                        message: format!("column {c} out of range"),
                    });
                }
                for tok in rows.split_whitespace() {
                    columns[c].push(tok.parse().map_err(|e| Error::Parse {
                        file: file.clone(),
                        message: format!("row index: {e}"),
                    })?);
                }
            }
        }
        let j_top = j_top.ok_or_else(|| Error::Parse {
            file,
            message: "missing j_top header".into(),
        })?;
        SupportMask::new(j_top, columns)
    }
}
