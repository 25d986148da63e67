//! Data-driven wavelet-Galerkin solver on the learned operator.
//!
//! `A_hat u_hat = f~` is solved in wavelet coordinates after verifying
//! V_J-ellipticity of the symmetrized, preconditioned matrix. Mask-sparse
//! systems above the dense-fallback size go through a left-looking sparse
//! LU with partial pivoting; small or dense systems use dense LU.

use crate::galerkin::{preconditioned_spectrum, BlockMatrix};
use crate::linalg::lu_solve;
use crate::wavelets::{CoefVector, Flavor, WaveletSystem};
use crate::{Error, Result};

/// Below this dimension a dense factorization is used even for sparse
/// operators.
const DENSE_FALLBACK_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub elliptic: bool,
}

/// Extremal eigenvalues of `D^{-r/2} (M + M^T)/2 D^{-r/2}`; elliptic iff
/// the smallest is at least 1e-8.
pub fn ellipticity_check(m: &BlockMatrix, r: f64) -> Result<EllipticityReport> {
    let (lambda_min, lambda_max) = preconditioned_spectrum(m, r)?;
    Ok(EllipticityReport {
        lambda_min,
        lambda_max,
        elliptic: lambda_min >= 1e-8,
    })
}

#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    /// Solution coefficients (primal expansion / dual-test flavor).
    pub coefs: CoefVector,
    /// Solution samples on the grid.
    pub samples: Vec<f64>,
    /// Set when the ellipticity check failed and the solve proceeded
    /// unsymmetrically anyway.
    pub warning: Option<String>,
}

/// Solves `A_hat u = f~_{Lambda_J*}` with `f~` the primal-test analysis of
/// the right-hand side, then synthesizes the solution samples.
pub fn galerkin_solve(
    sys: &WaveletSystem,
    a_hat: &BlockMatrix,
    f_samples: &[f64],
    r: f64,
) -> Result<GalerkinSolution> {
    let j_star = a_hat.j_top();
    let rhs = sys.analysis(f_samples, Flavor::PrimalTest, j_star)?.to_flat();

    let ell = ellipticity_check(a_hat, r)?;
    let warning = if ell.elliptic {
        None
    } else {
        Some(format!(
            "system is not V_J-elliptic (lambda_min = {:.3e}); proceeding with an \
             unsymmetric direct solve",
            ell.lambda_min
        ))
    };

    let x = if a_hat.is_sparse() && a_hat.dim() >= DENSE_FALLBACK_DIM {
        let cols = a_hat.sparse_columns().expect("checked sparse");
        sparse_lu_solve(a_hat.dim(), cols, &rhs)?
    } else {
        lu_solve(a_hat.to_dense(), &rhs)?
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("non-finite solution".into()));
    }
    let coefs = CoefVector::from_flat(Flavor::DualTest, j_star, &x)?;
    let samples = sys.synthesis(&coefs)?;
    Ok(GalerkinSolution {
        coefs,
        samples,
        warning,
    })
}

/// `H^s` distance between the computed coefficients and the exact solution
/// analyzed at the finest representable level.
pub fn solve_error(sys: &WaveletSystem, u_hat: &CoefVector, u_exact: &[f64], s: f64) -> Result<f64> {
    let j_ref = sys.params().jmax;
    let mut exact = sys.analysis(u_exact, u_hat.flavor, j_ref)?;
    for j in 0..=u_hat.j_top() {
        let level = exact.level_mut(j);
        for (e, h) in level.iter_mut().zip(u_hat.level(j)) {
            *e -= h;
        }
    }
    Ok(WaveletSystem::sobolev_norm(&exact, s))
}

/// Bias/variance balance for the solver-grade level choice: the bias side
/// `eps 2^{-J(t+t'-r)}` against the variance side
/// `sqrt(log(1/delta)/N) (J/eps)^kappa 2^{rho J (t+t'-r)/2}` with
/// kappa = 1 and delta fixed at 0.1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverLevel {
    pub j_star: usize,
    pub bias_side: f64,
    pub variance_side: f64,
}

/// Integer scan of the balance equation over `J* in [1, jmax - 3]`.
pub fn select_solver_level(
    n_samples: usize,
    t: f64,
    t_prime: f64,
    r: f64,
    rho: f64,
    eps: f64,
    jmax: usize,
) -> Result<SolverLevel> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "solver-grade eps must be positive, got {eps}"
        )));
    }
    if jmax < 4 {
        return Err(Error::Resolution(format!(
            "jmax = {jmax} leaves no admissible solver level"
        )));
    }
    let bias_rate = t + t_prime - r;
    let delta: f64 = 0.1;
    let noise = ((1.0f64 / delta).ln() / n_samples as f64).sqrt();
    let mut best: Option<SolverLevel> = None;
    for j in 1..=jmax - 3 {
        let bias = eps * (2.0f64).powf(-(j as f64) * bias_rate);
        let var = noise * (j as f64 / eps) * (2.0f64).powf(rho * j as f64 * bias_rate / 2.0);
        let gap = (bias.ln() - var.ln()).abs();
        let better = match best {
            None => true,
            Some(b) => gap < (b.bias_side.ln() - b.variance_side.ln()).abs(),
        };
        if better {
            best = Some(SolverLevel {
                j_star: j,
                bias_side: bias,
                variance_side: var,
            });
        }
    }
    Ok(best.expect("range is non-empty"))
}

/// Left-looking sparse LU with partial pivoting (Gilbert-Peierls). Columns
/// of L and U are built through a depth-first reachability pass per column,
/// so fill-in is discovered without dense intermediates.
pub fn sparse_lu_solve(n: usize, cols: &[Vec<(usize, f64)>], b: &[f64]) -> Result<Vec<f64>> {
    if cols.len() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cols.len().max(b.len()),
            context: "sparse_lu_solve",
        });
    }
    const UNPIVOTED: usize = usize::MAX;
    // L columns hold (original_row, value) below the pivot (unit diagonal
    // implicit); U columns hold (pivot_position, value) including the
    // diagonal at position k.
    let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    // pinv[orig_row] = pivot position, or UNPIVOTED
    let mut pinv = vec![UNPIVOTED; n];
    let mut p_row = vec![0usize; n]; // pivot position -> original row

    let mut x = vec![0.0f64; n];
    let mut visited = vec![false; n];
    let mut pattern: Vec<usize> = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for k in 0..n {
        // Symbolic: rows reachable from the pattern of column k through
        // pivoted columns of L, in topological (reverse-post) order.
        pattern.clear();
        for &(row, _) in &cols[k] {
            if !visited[row] {
                // iterative DFS
                stack.push((row, 0));
                visited[row] = true;
                while let Some((node, child)) = stack.pop() {
                    let deps: &[(usize, f64)] = if pinv[node] != UNPIVOTED {
                        &l_cols[pinv[node]]
                    } else {
                        &[]
                    };
                    let mut pushed = false;
                    let mut ci = child;
                    while ci < deps.len() {
                        let next = deps[ci].0;
                        if !visited[next] {
                            visited[next] = true;
                            stack.push((node, ci + 1));
                            stack.push((next, 0));
                            pushed = true;
                            break;
                        }
                        ci += 1;
                    }
                    if !pushed {
                        pattern.push(node);
                    }
                }
            }
        }
        // Numeric: x = L^{-1} a_k on the discovered pattern (topological
        // order is the reverse of `pattern`).
        for &row in &pattern {
            x[row] = 0.0;
        }
        for &(row, v) in &cols[k] {
            x[row] = v;
        }
        for idx in (0..pattern.len()).rev() {
            let row = pattern[idx];
            let pk = pinv[row];
            if pk != UNPIVOTED {
                let xv = x[row];
                if xv != 0.0 {
                    for &(r2, lv) in &l_cols[pk] {
                        x[r2] -= lv * xv;
                    }
                }
            }
        }
        // Partial pivot among unpivoted rows.
        let mut pivot_row = UNPIVOTED;
        let mut pivot_abs = 0.0f64;
        for &row in &pattern {
            if pinv[row] == UNPIVOTED {
                let a = x[row].abs();
                if a > pivot_abs {
                    pivot_abs = a;
                    pivot_row = row;
                }
            }
        }
        if pivot_row == UNPIVOTED || pivot_abs == 0.0 {
            for &row in &pattern {
                visited[row] = false;
            }
            return Err(Error::LinearSolve(format!(
                "sparse LU: structurally or numerically singular at column {k}"
            )));
        }
        let pivot_val = x[pivot_row];
        pinv[pivot_row] = k;
        p_row[k] = pivot_row;

        let mut ucol: Vec<(usize, f64)> = Vec::new();
        let mut lcol: Vec<(usize, f64)> = Vec::new();
        for &row in &pattern {
            visited[row] = false;
            let v = x[row];
            if row == pivot_row {
                continue;
            }
            if pinv[row] != UNPIVOTED && pinv[row] < k {
                if v != 0.0 {
                    ucol.push((pinv[row], v));
                }
            } else if v != 0.0 {
                lcol.push((row, v / pivot_val));
            }
        }
        ucol.push((k, pivot_val));
        ucol.sort_unstable_by_key(|e| e.0);
        l_cols.push(lcol);
        u_cols.push(ucol);
    }

    // Forward solve L y = P b (y indexed by pivot position).
    let mut y = vec![0.0f64; n];
    let mut borig = b.to_vec();
    for k in 0..n {
        let v = borig[p_row[k]];
        y[k] = v;
        if v != 0.0 {
            for &(row, lv) in &l_cols[k] {
                borig[row] -= lv * v;
            }
        }
    }
    // Back substitution U x = y, column-oriented.
    let mut sol = y;
    for k in (0..n).rev() {
        let ucol = &u_cols[k];
        let &(dk, dv) = ucol.last().expect("diagonal present");
        debug_assert_eq!(dk, k);
        let xk = sol[k] / dv;
        sol[k] = xk;
        if xk != 0.0 {
            for &(pos, uv) in &ucol[..ucol.len() - 1] {
                sol[pos] -= uv * xk;
            }
        }
    }
    Ok(sol)
}
