//! Small dense kernels shared across modules: Cholesky and LU solves.
//!
//! Sizes here are desk-scale (a few thousand at most), so plain
//! triple-loop factorizations are fine and keep the dependency surface
//! small. Symmetric eigenproblems go through nalgebra instead.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factors `a = L L^T`. Fails if a pivot is nonpositive or negligible
    /// relative to the matrix scale (exact rank deficiency shows up as a
    /// roundoff-sized pivot, not a negative one).
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
                context: "cholesky: square matrix",
            });
        }
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max);
        let floor = 1e-13 * scale;
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= floor || !sum.is_finite() {
                        return Err(Error::LinearSolve(format!(
                            "cholesky pivot {sum:.3e} at index {i} (scale {scale:.3e})"
                        )));
                    }
                    l[(i, i)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        debug_assert_eq!(b.len(), n);
        let mut y = b.clone();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[(i, k)] * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= self.l[(k, i)] * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        y
    }

    /// Crude condition estimate from the squared ratio of extreme diagonal
    /// entries of L; cheap and adequate for diagnostics.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.l.nrows();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let v = self.l[(i, i)];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (hi / lo).powi(2)
    }
}

/// Dense LU solve with partial pivoting, `a x = b`. `a` is consumed.
pub fn lu_solve(mut a: Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
            context: "lu_solve dimensions",
        });
    }
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[(col, col)].abs();
        for row in col + 1..n {
            let v = a[(row, col)].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::LinearSolve(format!("singular at column {col}")));
        }
        if pivot != col {
            for k in 0..n {
                let tmp = a[(col, k)];
                a[(col, k)] = a[(pivot, k)];
                a[(pivot, k)] = tmp;
            }
            x.swap(col, pivot);
            perm.swap(col, pivot);
        }
        let inv = 1.0 / a[(col, col)];
        for row in col + 1..n {
            let f = a[(row, col)] * inv;
            if f != 0.0 {
                a[(row, col)] = f;
                for k in col + 1..n {
                    a[(row, k)] -= f * a[(col, k)];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= a[(i, k)] * x[k];
        }
        x[i] = v / a[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let ch = Cholesky::new(&a).unwrap();
        let b = array![1.0, -2.0, 0.5];
        let x = ch.solve(&b);
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!(ch.condition_estimate() >= 1.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(Cholesky::new(&a).is_err());
    }

    #[test]
    fn lu_solves_general_system() {
        let a = array![[0.0, 2.0, 1.0], [1.0, -1.0, 3.0], [4.0, 0.5, -2.0]];
        let b = [3.0, 1.0, -1.0];
        let x = lu_solve(a.clone(), &b).unwrap();
        for i in 0..3 {
            let got: f64 = (0..3).map(|j| a[(i, j)] * x[j]).sum();
            assert!((got - b[i]).abs() < 1e-12);
        }
    }
}
