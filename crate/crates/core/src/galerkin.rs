//! Reference Galerkin matrices over Lambda_J and weighted operator norms.
//!
//! A [`BlockMatrix`] is indexed by the canonical level-major ordering of
//! Lambda_J (see [`crate::wavelets::flat_index`]), dense or column-sparse.
//! Because the ordering is nested, the matrix truncated to a coarser level
//! is simply a leading principal block.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::compression::SupportMask;
use crate::fields::PreparedOperator;
use crate::wavelets::{
    flat_index, index_from_flat, indices_up_to, level_offset, level_size, num_indices, CoefVector,
    Flavor, WaveletIndex, WaveletSystem,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Array2<f64>),
    /// Per column, strictly increasing row indices with values.
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// A matrix over Lambda_J x Lambda_J addressable by (j, j') blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    j_top: usize,
    storage: Storage,
}

impl BlockMatrix {
    pub fn dense(j_top: usize, data: Array2<f64>) -> Result<Self> {
        let n = num_indices(j_top);
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.nrows().max(data.ncols()),
                context: "BlockMatrix::dense",
            });
        }
        Ok(BlockMatrix {
            j_top,
            storage: Storage::Dense(data),
        })
    }

    pub fn zeros(j_top: usize) -> Self {
        let n = num_indices(j_top);
        BlockMatrix {
            j_top,
            storage: Storage::Dense(Array2::zeros((n, n))),
        }
    }

    /// Builds column-sparse storage; each column's entries must have
    /// strictly increasing row indices.
    pub fn sparse(j_top: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = num_indices(j_top);
        if columns.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: columns.len(),
                context: "BlockMatrix::sparse columns",
            });
        }
        for col in &columns {
            let mut prev: Option<usize> = None;
            for &(row, _) in col {
                if row >= n || prev.is_some_and(|p| p >= row) {
                    return Err(Error::Invariant(
                        "sparse column rows must be strictly increasing and in range".into(),
                    ));
                }
                prev = Some(row);
            }
        }
        Ok(BlockMatrix {
            j_top,
            storage: Storage::Sparse(columns),
        })
    }

    pub fn j_top(&self) -> usize {
        self.j_top
    }

    pub fn dim(&self) -> usize {
        num_indices(self.j_top)
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.iter().filter(|v| **v != 0.0).count(),
            Storage::Sparse(cols) => cols.iter().map(|c| c.len()).sum(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a[(row, col)],
            Storage::Sparse(cols) => cols[col]
                .binary_search_by_key(&row, |e| e.0)
                .map(|i| cols[col][i].1)
                .unwrap_or(0.0),
        }
    }

    pub fn entry(&self, row: WaveletIndex, col: WaveletIndex) -> f64 {
        self.get(flat_index(row), flat_index(col))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Sparse(cols) => {
                let n = self.dim();
                let mut a = Array2::zeros((n, n));
                for (c, col) in cols.iter().enumerate() {
                    for &(r, v) in col {
                        a[(r, c)] = v;
                    }
                }
                a
            }
        }
    }

    /// Sparse column access (empty for off-column queries on dense storage).
    pub fn sparse_columns(&self) -> Option<&[Vec<(usize, f64)>]> {
        match &self.storage {
            Storage::Sparse(cols) => Some(cols),
            Storage::Dense(_) => None,
        }
    }

    /// The (j, j') block as a dense copy, rows at level j, columns at j'.
    pub fn block(&self, j: usize, j_prime: usize) -> Array2<f64> {
        let (r0, nr) = (level_offset(j), level_size(j));
        let (c0, nc) = (level_offset(j_prime), level_size(j_prime));
        match &self.storage {
            Storage::Dense(a) => a
                .slice(ndarray::s![r0..r0 + nr, c0..c0 + nc])
                .to_owned(),
            Storage::Sparse(cols) => {
                let mut out = Array2::zeros((nr, nc));
                for c in 0..nc {
                    for &(r, v) in &cols[c0 + c] {
                        if r >= r0 && r < r0 + nr {
                            out[(r - r0, c)] = v;
                        }
                    }
                }
                out
            }
        }
    }

    /// Leading principal block over Lambda_{j_sub}, j_sub <= j_top.
    pub fn principal_block(&self, j_sub: usize) -> Result<BlockMatrix> {
        if j_sub > self.j_top {
            return Err(Error::LevelOutOfRange {
                level: j_sub,
                min: 0,
                max: self.j_top,
            });
        }
        let n = num_indices(j_sub);
        match &self.storage {
            Storage::Dense(a) => {
                BlockMatrix::dense(j_sub, a.slice(ndarray::s![..n, ..n]).to_owned())
            }
            Storage::Sparse(cols) => BlockMatrix::sparse(
                j_sub,
                cols[..n]
                    .iter()
                    .map(|c| c.iter().cloned().filter(|&(r, _)| r < n).collect())
                    .collect(),
            ),
        }
    }

    /// Zero-pads into Lambda_{j_big} (this matrix becomes the leading
    /// principal block).
    pub fn zero_padded(&self, j_big: usize) -> Result<BlockMatrix> {
        if j_big < self.j_top {
            return Err(Error::LevelOutOfRange {
                level: j_big,
                min: self.j_top,
                max: usize::MAX,
            });
        }
        let n_small = self.dim();
        let n = num_indices(j_big);
        match &self.storage {
            Storage::Dense(a) => {
                let mut out = Array2::zeros((n, n));
                out.slice_mut(ndarray::s![..n_small, ..n_small]).assign(a);
                BlockMatrix::dense(j_big, out)
            }
            Storage::Sparse(cols) => {
                let mut out = cols.clone();
                out.resize(n, Vec::new());
                BlockMatrix::sparse(j_big, out)
            }
        }
    }

    pub fn transposed(&self) -> BlockMatrix {
        match &self.storage {
            Storage::Dense(a) => BlockMatrix {
                j_top: self.j_top,
                storage: Storage::Dense(a.t().to_owned()),
            },
            Storage::Sparse(cols) => {
                let n = self.dim();
                let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                for (c, col) in cols.iter().enumerate() {
                    for &(r, v) in col {
                        out[r].push((c, v));
                    }
                }
                // columns built in increasing r, entries arrive in increasing c
                BlockMatrix {
                    j_top: self.j_top,
                    storage: Storage::Sparse(out),
                }
            }
        }
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        match &self.storage {
            Storage::Dense(a) => {
                let mut y = vec![0.0; n];
                for (r, out) in y.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (c, v) in a.row(r).iter().enumerate() {
                        s += v * x[c];
                    }
                    *out = s;
                }
                y
            }
            Storage::Sparse(cols) => {
                let mut y = vec![0.0; n];
                for (c, col) in cols.iter().enumerate() {
                    let xc = x[c];
                    if xc != 0.0 {
                        for &(r, v) in col {
                            y[r] += v * xc;
                        }
                    }
                }
                y
            }
        }
    }

    /// `y = M^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        match &self.storage {
            Storage::Dense(a) => {
                let mut y = vec![0.0; n];
                for c in 0..n {
                    let mut s = 0.0;
                    for r in 0..n {
                        s += a[(r, c)] * x[r];
                    }
                    y[c] = s;
                }
                y
            }
            Storage::Sparse(cols) => cols
                .iter()
                .map(|col| col.iter().map(|&(r, v)| v * x[r]).sum())
                .collect(),
        }
    }

    /// Difference `self - other` as dense.
    pub fn sub(&self, other: &BlockMatrix) -> Result<BlockMatrix> {
        if other.j_top != self.j_top {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
                context: "BlockMatrix::sub",
            });
        }
        let mut a = self.to_dense();
        a -= &other.to_dense();
        BlockMatrix::dense(self.j_top, a)
    }

    /// Entries of `self` off the mask (i.e. `self - mask (.) self`), dense.
    pub fn off_mask(&self, mask: &SupportMask) -> Result<BlockMatrix> {
        if mask.j_top() != self.j_top {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: num_indices(mask.j_top()),
                context: "BlockMatrix::off_mask",
            });
        }
        let mut a = self.to_dense();
        for (col, rows) in mask.columns().iter().enumerate() {
            for &r in rows {
                a[(r, col)] = 0.0;
            }
        }
        BlockMatrix::dense(self.j_top, a)
    }

    /// Restriction of `self` to the mask, kept sparse.
    pub fn on_mask(&self, mask: &SupportMask) -> Result<BlockMatrix> {
        if mask.j_top() != self.j_top {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: num_indices(mask.j_top()),
                context: "BlockMatrix::on_mask",
            });
        }
        let cols = mask
            .columns()
            .iter()
            .enumerate()
            .map(|(c, rows)| rows.iter().map(|&r| (r, self.get(r, c))).collect())
            .collect();
        BlockMatrix::sparse(self.j_top, cols)
    }
}

/// Assembles the Galerkin matrix `A[lambda, lambda'] = <A psi_lambda',
/// psi_lambda>` by applying the operator to each synthesized primal wavelet
/// and testing with a primal-test analysis. Columns run in parallel.
pub fn assemble_matrix(
    sys: &WaveletSystem,
    op: &PreparedOperator,
    j_top: usize,
) -> Result<BlockMatrix> {
    let jmax = sys.params().jmax;
    if j_top + 3 > jmax {
        return Err(Error::Resolution(format!(
            "assembly at level {j_top} needs jmax >= {} (quadrature guard), have {jmax}",
            j_top + 3
        )));
    }
    if op.grid_size() != sys.grid_size() {
        return Err(Error::DimensionMismatch {
            expected: sys.grid_size(),
            got: op.grid_size(),
            context: "operator grid vs wavelet grid",
        });
    }
    let n = num_indices(j_top);
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let lam = index_from_flat(c);
            let mut e = CoefVector::zeros(Flavor::DualTest, j_top);
            e.set(lam, 1.0);
            let samples = sys.synthesis(&e)?;
            let image = op.apply(&samples)?;
            Ok(sys.analysis(&image, Flavor::PrimalTest, j_top)?.to_flat())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut a = Array2::zeros((n, n));
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            a[(r, c)] = v;
        }
    }
    BlockMatrix::dense(j_top, a)
}

/// Result of a power-iteration norm estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNorm {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

const OPNORM_TOL: f64 = 1e-8;
const OPNORM_MAX_ITER: usize = 10_000;

fn weights(j_top: usize, s: f64) -> Vec<f64> {
    indices_up_to(j_top)
        .map(|lam| (2.0f64).powf(s * lam.j as f64))
        .collect()
}

/// Spectral norm of `diag(2^{-j t_left}) M diag(2^{-j t_right})` by power
/// iteration on the normal operator, with a fixed seeded start vector.
pub fn weighted_opnorm(m: &BlockMatrix, t_left: f64, t_right: f64) -> OpNorm {
    let n = m.dim();
    let wl = weights(m.j_top(), -t_left);
    let wr = weights(m.j_top(), -t_right);
    let apply = |x: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = x.iter().zip(&wr).map(|(v, w)| v * w).collect();
        let mut y = m.matvec(&scaled);
        for (v, w) in y.iter_mut().zip(&wl) {
            *v *= w;
        }
        y
    };
    let apply_t = |x: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = x.iter().zip(&wl).map(|(v, w)| v * w).collect();
        let mut y = m.matvec_transpose(&scaled);
        for (v, w) in y.iter_mut().zip(&wr) {
            *v *= w;
        }
        y
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut sigma = 0.0f64;
    for it in 1..=OPNORM_MAX_ITER {
        let w = apply(&v);
        let s = norm(&w);
        if s == 0.0 || !s.is_finite() {
            return OpNorm {
                value: 0.0,
                converged: s == 0.0,
                iterations: it,
            };
        }
        let mut u = apply_t(&w);
        let nu = norm(&u);
        for x in u.iter_mut() {
            *x /= nu;
        }
        v = u;
        if (s - sigma).abs() <= OPNORM_TOL * s.max(f64::MIN_POSITIVE) {
            return OpNorm {
                value: s,
                converged: true,
                iterations: it,
            };
        }
        sigma = s;
    }
    OpNorm {
        value: sigma,
        converged: false,
        iterations: OPNORM_MAX_ITER,
    }
}

/// Matrix of blockwise spectral norms `N(M)[j, j'] = ||M_{j,j'}||`.
pub fn block_norm_compression(m: &BlockMatrix) -> Array2<f64> {
    let levels = m.j_top() + 1;
    let mut out = Array2::zeros((levels, levels));
    for j in 0..levels {
        for jp in 0..levels {
            out[(j, jp)] = dense_spectral_norm(&m.block(j, jp));
        }
    }
    out
}

/// Spectral norm of a small dense rectangular matrix (power iteration with
/// a tight tolerance; exact enough for desk-scale blocks).
pub fn dense_spectral_norm(a: &Array2<f64>) -> f64 {
    let (rows, cols) = a.dim();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5bd1_e995);
    let mut v: Vec<f64> = (0..cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut sigma = 0.0f64;
    for _ in 0..20_000 {
        let mut w = vec![0.0; rows];
        for (r, wr) in w.iter_mut().enumerate() {
            let mut s = 0.0;
            for c in 0..cols {
                s += a[(r, c)] * v[c];
            }
            *wr = s;
        }
        let s = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s == 0.0 {
            return 0.0;
        }
        let mut u = vec![0.0; cols];
        for (c, uc) in u.iter_mut().enumerate() {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += a[(r, c)] * w[r];
            }
            *uc = acc;
        }
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 {
            return s;
        }
        for x in u.iter_mut() {
            *x /= nu;
        }
        v = u;
        if (s - sigma).abs() <= 1e-12 * s {
            return s;
        }
        sigma = s;
    }
    sigma
}

/// Weighted norm of the frame discarded when truncating from `j_ref` down
/// to `j`: `||D^{-t'} (pad(A_{Lambda_j}) - A_{Lambda_jref}) D^{-t}||`,
/// the finite-reference proxy for the truncation error.
pub fn truncation_error(
    sys: &WaveletSystem,
    op: &PreparedOperator,
    j: usize,
    j_ref: usize,
    t: f64,
    t_prime: f64,
) -> Result<f64> {
    if j_ref < j + 2 {
        return Err(Error::InvalidParameter(format!(
            "truncation reference level {j_ref} must be >= {} (j + 2)",
            j + 2
        )));
    }
    let a_ref = assemble_matrix(sys, op, j_ref)?;
    Ok(truncation_error_from_reference(&a_ref, j, t, t_prime))
}

/// Same as [`truncation_error`] but reusing an assembled reference matrix.
pub fn truncation_error_from_reference(
    a_ref: &BlockMatrix,
    j: usize,
    t: f64,
    t_prime: f64,
) -> f64 {
    if j >= a_ref.j_top() {
        return 0.0;
    }
    let mut diff = a_ref.to_dense();
    let n_small = num_indices(j);
    diff.slice_mut(ndarray::s![..n_small, ..n_small]).fill(0.0);
    let m = BlockMatrix::dense(a_ref.j_top(), diff).expect("same shape");
    weighted_opnorm(&m, t_prime, t).value
}

/// `||D^{-t'} (A_J - mask (.) A_J) D^{-t}||`.
pub fn compression_error(a: &BlockMatrix, mask: &SupportMask, t: f64, t_prime: f64) -> Result<f64> {
    let off = a.off_mask(mask)?;
    Ok(weighted_opnorm(&off, t_prime, t).value)
}

/// Extremal eigenvalues of the symmetrized, diagonally preconditioned
/// matrix `D^{-r/2} (A + A^T)/2 D^{-r/2}`.
pub fn preconditioned_spectrum(a: &BlockMatrix, r: f64) -> Result<(f64, f64)> {
    let n = a.dim();
    let dense = a.to_dense();
    let w = weights(a.j_top(), -r / 2.0);
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (dense[(i, j)] + dense[(j, i)]) * w[i] * w[j];
        }
    }
    let eig = m.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        if !l.is_finite() {
            return Err(Error::Eigen("non-finite eigenvalue".into()));
        }
        lo = lo.min(l);
        hi = hi.max(l);
    }
    Ok((lo, hi))
}

pub mod io {
    //! Triplet text + dense binary persistence for matrices.

    use std::fs;
    use std::io::Write;
    use std::path::Path;

    use super::BlockMatrix;
    use crate::{Error, Result};

    /// Header line plus `row col value` triplets (flat Lambda_J indices).
    pub fn save_triplets(path: &Path, m: &BlockMatrix) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("j_top = {}\n", m.j_top()));
        match m.sparse_columns() {
            Some(cols) => {
                for (c, col) in cols.iter().enumerate() {
                    for &(r, v) in col {
                        out.push_str(&format!("{r} {c} {v:.16e}\n"));
                    }
                }
            }
            None => {
                let a = m.to_dense();
                for c in 0..m.dim() {
                    for r in 0..m.dim() {
                        let v = a[(r, c)];
                        if v != 0.0 {
                            out.push_str(&format!("{r} {c} {v:.16e}\n"));
                        }
                    }
                }
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load_triplets(path: &Path) -> Result<BlockMatrix> {
        let text = fs::read_to_string(path)?;
        let file = path.display().to_string();
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            file: file.clone(),
            message: "empty file".into(),
        })?;
        let j_top: usize = header
            .trim()
            .strip_prefix("j_top =")
            .ok_or_else(|| Error::Parse {
                file: file.clone(),
                message: "first line must be 'j_top = <J>'".into(),
            })?
            .trim()
            .parse()
            .map_err(|e| Error::Parse {
                file: file.clone(),
                message: format!("j_top: {e}"),
            })?;
        let n = crate::wavelets::num_indices(j_top);
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse_err = |message: String| Error::Parse {
                file: file.clone(),
                message,
            };
            let r: usize = it
                .next()
                .ok_or_else(|| parse_err("missing row".into()))?
                .parse()
                .map_err(|e| parse_err(format!("row: {e}")))?;
            let c: usize = it
                .next()
                .ok_or_else(|| parse_err("missing col".into()))?
                .parse()
                .map_err(|e| parse_err(format!("col: {e}")))?;
            let v: f64 = it
                .next()
                .ok_or_else(|| parse_err("missing value".into()))?
                .parse()
                .map_err(|e| parse_err(format!("value: {e}")))?;
            if r >= n || c >= n {
                return Err(parse_err(format!("index ({r}, {c}) out of range for n = {n}")));
            }
            cols[c].push((r, v));
        }
        for col in cols.iter_mut() {
            col.sort_by_key(|e| e.0);
        }
        BlockMatrix::sparse(j_top, cols)
    }

    /// Row-major little-endian f64 dump of the dense matrix.
    pub fn save_dense_binary(path: &Path, m: &BlockMatrix) -> Result<()> {
        let a = m.to_dense();
        let mut file = fs::File::create(path)?;
        let mut bytes = Vec::with_capacity(a.len() * 8);
        for v in a.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&bytes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_matrix(j_top: usize, f: impl Fn(usize) -> f64) -> BlockMatrix {
        let n = num_indices(j_top);
        let mut a = Array2::zeros((n, n));
        for (i, lam) in indices_up_to(j_top).enumerate() {
            a[(i, i)] = f(lam.j);
        }
        BlockMatrix::dense(j_top, a).unwrap()
    }

    /// Diagonal entries 2^{j (tl + tr)} are exactly cancelled by the
    /// weights, so the weighted norm is 1.
    #[test]
    fn weighted_opnorm_cancels_diagonal_weights() {
        let (tl, tr) = (1.5, 0.5);
        let m = diag_matrix(4, |j| (2.0f64).powf((tl + tr) * j as f64));
        let res = weighted_opnorm(&m, tl, tr);
        assert!(res.converged);
        assert!((res.value - 1.0).abs() < 1e-7, "got {}", res.value);
    }

    #[test]
    fn weighted_opnorm_zero_matrix() {
        let m = BlockMatrix::zeros(3);
        let res = weighted_opnorm(&m, 1.0, 1.0);
        assert_eq!(res.value, 0.0);
        assert!(res.converged);
    }

    /// 2x2 cross-check against the closed-form largest singular value.
    #[test]
    fn weighted_opnorm_matches_exact_svd_2x2() {
        // Use j_top = 0 so Lambda has exactly two indices, both at level 0:
        // weights are all 1 and the norm is the plain spectral norm.
        let a = ndarray::array![[3.0, 1.0], [-2.0, 4.0]];
        let m = BlockMatrix::dense(0, a.clone()).unwrap();
        let res = weighted_opnorm(&m, 0.7, -0.3);
        // singular values of [[3,1],[-2,4]]
        let g = a.t().dot(&a);
        let tr = g[(0, 0)] + g[(1, 1)];
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let s_max = ((tr + (tr * tr - 4.0 * det).sqrt()) / 2.0).sqrt();
        assert!((res.value - s_max).abs() < 1e-7 * s_max);
    }

    #[test]
    fn adjoint_symmetry_of_weighted_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = num_indices(3);
        let mut a = Array2::zeros((n, n));
        for v in a.iter_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let m = BlockMatrix::dense(3, a).unwrap();
        let x = weighted_opnorm(&m, 1.0, 0.5).value;
        let y = weighted_opnorm(&m.transposed(), 0.5, 1.0).value;
        assert!((x - y).abs() < 1e-8 * x.max(y));
    }

    #[test]
    fn block_norm_compression_diagonal_blocks() {
        let m = diag_matrix(2, |j| (j + 1) as f64);
        let n = block_norm_compression(&m);
        for j in 0..=2 {
            for jp in 0..=2 {
                let want = if j == jp { (j + 1) as f64 } else { 0.0 };
                assert!((n[(j, jp)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sparse_dense_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let j_top = 3;
        let n = num_indices(j_top);
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        for _ in 0..n {
            let mut col: Vec<(usize, f64)> = Vec::new();
            for r in 0..n {
                if rng.gen::<f64>() < 0.3 {
                    col.push((r, rng.gen::<f64>() - 0.5));
                }
            }
            cols.push(col);
        }
        let sp = BlockMatrix::sparse(j_top, cols).unwrap();
        let de = BlockMatrix::dense(j_top, sp.to_dense()).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let ys = sp.matvec(&x);
        let yd = de.matvec(&x);
        for (a, b) in ys.iter().zip(&yd) {
            assert!((a - b).abs() < 1e-14);
        }
        let ys = sp.matvec_transpose(&x);
        let yd = de.matvec_transpose(&x);
        for (a, b) in ys.iter().zip(&yd) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(sp.principal_block(2).unwrap().to_dense(), de.principal_block(2).unwrap().to_dense());
    }
}
