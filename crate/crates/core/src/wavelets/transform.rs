//! Periodized two-channel filter bank transforms.
//!
//! Signals live on dyadic grids over [0,1). A decomposition step maps the
//! scale-(j+1) single-scale coefficients (length 2^{j+1}) to scale-j
//! scaling + detail coefficients (length 2^j each):
//!
//!   c[m] = sum_k lo[k - 2m] x[k],    d[m] = sum_k hi[k - 2m] x[k],
//!
//! with periodic wraparound; reconstruction is the adjoint with the other
//! bank of the biorthogonal pair. Filters may be longer than the signal at
//! coarse scales, which the modular indexing handles by multiple wraps.

use super::filters::Filter;

/// One decimating decomposition step; `x.len()` must be even.
pub(crate) fn decompose_step(x: &[f64], lo: &Filter, hi: &Filter) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as isize;
    debug_assert!(n >= 2 && n % 2 == 0);
    let half = (n / 2) as usize;
    let mut c = vec![0.0; half];
    let mut d = vec![0.0; half];
    for m in 0..half {
        let base = 2 * m as isize;
        let mut acc_c = 0.0;
        for (i, t) in lo.taps.iter().enumerate() {
            let k = (base + lo.offset + i as isize).rem_euclid(n) as usize;
            acc_c += t * x[k];
        }
        c[m] = acc_c;
        let mut acc_d = 0.0;
        for (i, t) in hi.taps.iter().enumerate() {
            let k = (base + hi.offset + i as isize).rem_euclid(n) as usize;
            acc_d += t * x[k];
        }
        d[m] = acc_d;
    }
    (c, d)
}

/// One upsampling reconstruction step, the adjoint of [`decompose_step`]
/// with the dual bank: `x[k] = sum_m lo[k-2m] c[m] + sum_m hi[k-2m] d[m]`.
pub(crate) fn reconstruct_step(c: &[f64], d: &[f64], lo: &Filter, hi: &Filter) -> Vec<f64> {
    debug_assert_eq!(c.len(), d.len());
    let half = c.len();
    let n = (2 * half) as isize;
    let mut x = vec![0.0; 2 * half];
    for m in 0..half {
        let base = 2 * m as isize;
        let cm = c[m];
        for (i, t) in lo.taps.iter().enumerate() {
            let k = (base + lo.offset + i as isize).rem_euclid(n) as usize;
            x[k] += t * cm;
        }
        let dm = d[m];
        for (i, t) in hi.taps.iter().enumerate() {
            let k = (base + hi.offset + i as isize).rem_euclid(n) as usize;
            x[k] += t * dm;
        }
    }
    x
}
