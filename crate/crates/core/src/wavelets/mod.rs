//! Periodized biorthogonal spline wavelets on the unit circle.
//!
//! Levels are indexed `j0 = 0, 1, ..., jmax` with the convention that the
//! level-0 block is the coarse single-scale basis Phi_1 (two functions), so
//! level j holds 2 locations for j = 0 and 2^j locations for j >= 1, and
//! the index set Lambda_J has exactly 2^{J+1} members. Functions are
//! represented by their samples on the 2^{jmax+1}-point dyadic grid; the
//! finest-level single-scale coefficients are identified with
//! `samples / sqrt(grid_size)`, which makes every transform identity below
//! exact at the discrete level (quadrature error enters only when discrete
//! coefficients are read as integrals against the continuous basis).

mod filters;
mod transform;

pub use filters::{build_filter_bank, FamilyConstants, Filter, FilterBank};

use crate::{Error, Result};

/// Which continuous pairing a coefficient vector represents.
///
/// `DualTest` entries are `<u, psi~_lambda>` (the expansion of `u` in the
/// primal basis); `PrimalTest` entries are `<f, psi_lambda>` (the expansion
/// of `f` in the dual basis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    PrimalTest,
    DualTest,
}

/// Scale-location label lambda = (j, k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveletIndex {
    pub j: usize,
    pub k: usize,
}

impl WaveletIndex {
    pub fn new(j: usize, k: usize) -> Self {
        WaveletIndex { j, k }
    }
}

/// Number of locations at level `j`.
pub fn level_size(j: usize) -> usize {
    if j == 0 {
        2
    } else {
        1 << j
    }
}

/// Flat offset of level `j` in the canonical level-major ordering.
/// Levels are nested: the layout of Lambda_J is a prefix of Lambda_{J'}
/// for J <= J'.
pub fn level_offset(j: usize) -> usize {
    if j == 0 {
        0
    } else {
        1 << j
    }
}

/// |Lambda_J| = 2^{J+1}.
pub fn num_indices(j_top: usize) -> usize {
    1 << (j_top + 1)
}

/// Canonical flat index of lambda.
pub fn flat_index(lambda: WaveletIndex) -> usize {
    level_offset(lambda.j) + lambda.k
}

/// Inverse of [`flat_index`].
pub fn index_from_flat(i: usize) -> WaveletIndex {
    if i < 2 {
        return WaveletIndex::new(0, i);
    }
    let j = usize::BITS as usize - 1 - i.leading_zeros() as usize;
    WaveletIndex::new(j, i - (1 << j))
}

/// All indices of Lambda_J in canonical order.
pub fn indices_up_to(j_top: usize) -> impl Iterator<Item = WaveletIndex> {
    (0..=j_top).flat_map(|j| (0..level_size(j)).map(move |k| WaveletIndex::new(j, k)))
}

/// Static parameters of a wavelet discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletParams {
    pub d: usize,
    pub dt: usize,
    pub j0: usize,
    pub jmax: usize,
    pub grid_size: usize,
}

/// Coefficients over Lambda_J, stored per level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVector {
    pub flavor: Flavor,
    levels: Vec<Vec<f64>>,
}

impl CoefVector {
    pub fn zeros(flavor: Flavor, j_top: usize) -> Self {
        CoefVector {
            flavor,
            levels: (0..=j_top).map(|j| vec![0.0; level_size(j)]).collect(),
        }
    }

    /// Builds from a flat slice in canonical Lambda_J order.
    pub fn from_flat(flavor: Flavor, j_top: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != num_indices(j_top) {
            return Err(Error::DimensionMismatch {
                expected: num_indices(j_top),
                got: flat.len(),
                context: "CoefVector::from_flat",
            });
        }
        let mut v = CoefVector::zeros(flavor, j_top);
        for (i, &x) in flat.iter().enumerate() {
            let lam = index_from_flat(i);
            v.levels[lam.j][lam.k] = x;
        }
        Ok(v)
    }

    pub fn j_top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    pub fn level_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.levels[j]
    }

    pub fn get(&self, lambda: WaveletIndex) -> f64 {
        self.levels[lambda.j][lambda.k]
    }

    pub fn set(&mut self, lambda: WaveletIndex, v: f64) {
        self.levels[lambda.j][lambda.k] = v;
    }

    /// Flattens into canonical Lambda_J order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(num_indices(self.j_top()));
        for l in &self.levels {
            out.extend_from_slice(l);
        }
        out
    }

    /// Truncates to Lambda_{j_top} (drops finer levels).
    pub fn truncated(&self, j_top: usize) -> CoefVector {
        CoefVector {
            flavor: self.flavor,
            levels: self.levels[..=j_top].to_vec(),
        }
    }
}

/// Periodic interval hull of a wavelet's support, as an arc of the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    pub center: f64,
    pub half_width: f64,
}

impl SupportInterval {
    /// Geodesic gap between two closed arcs on the unit circle:
    /// `max(0, circular center distance - half_width_1 - half_width_2)`.
    pub fn distance(&self, other: &SupportInterval) -> f64 {
        let d = (self.center - other.center).rem_euclid(1.0);
        let circ = d.min(1.0 - d);
        (circ - self.half_width - other.half_width).max(0.0)
    }
}

/// A concrete periodized wavelet discretization: filters plus grid geometry
/// and cached support hulls. All methods are pure; the struct is safe to
/// share across threads read-only.
#[derive(Debug, Clone)]
pub struct WaveletSystem {
    params: WaveletParams,
    bank: FilterBank,
    /// Support of psi_{j,0} per level; translates to (j,k) by k * shift(j).
    base_supports: Vec<SupportInterval>,
}

impl WaveletSystem {
    pub fn new(d: usize, dt: usize, jmax: usize) -> Result<Self> {
        if !(1..=24).contains(&jmax) {
            return Err(Error::InvalidParameter(format!(
                "jmax = {jmax} outside [1, 24]"
            )));
        }
        let bank = build_filter_bank(d, dt)?;
        let params = WaveletParams {
            d,
            dt,
            j0: 0,
            jmax,
            grid_size: 1 << (jmax + 1),
        };
        let mut sys = WaveletSystem {
            params,
            bank,
            base_supports: Vec::new(),
        };
        sys.base_supports = (0..=jmax).map(|j| sys.scan_support(j)).collect();
        Ok(sys)
    }

    pub fn params(&self) -> &WaveletParams {
        &self.params
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn grid_size(&self) -> usize {
        self.params.grid_size
    }

    /// Grid abscissae i / grid_size.
    pub fn grid_points(&self) -> Vec<f64> {
        let m = self.params.grid_size;
        (0..m).map(|i| i as f64 / m as f64).collect()
    }

    fn analysis_filters(&self, flavor: Flavor) -> (&Filter, &Filter) {
        match flavor {
            // <u, psi~_lambda> comes from decomposing primal-basis
            // coefficients with the dual taps, and vice versa.
            Flavor::DualTest => (&self.bank.dual_lo, &self.bank.dual_hi),
            Flavor::PrimalTest => (&self.bank.primal_lo, &self.bank.primal_hi),
        }
    }

    fn synthesis_filters(&self, flavor: Flavor) -> (&Filter, &Filter) {
        match flavor {
            Flavor::DualTest => (&self.bank.primal_lo, &self.bank.primal_hi),
            Flavor::PrimalTest => (&self.bank.dual_lo, &self.bank.dual_hi),
        }
    }

    /// Wavelet coefficients of the sampled function up to level `j_top`.
    pub fn analysis(&self, samples: &[f64], flavor: Flavor, j_top: usize) -> Result<CoefVector> {
        let m = self.params.grid_size;
        if samples.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: samples.len(),
                context: "analysis samples",
            });
        }
        if j_top > self.params.jmax {
            return Err(Error::LevelOutOfRange {
                level: j_top,
                min: self.params.j0,
                max: self.params.jmax,
            });
        }
        let (lo, hi) = self.analysis_filters(flavor);
        let scale = 1.0 / (m as f64).sqrt();
        let mut current: Vec<f64> = samples.iter().map(|x| x * scale).collect();
        let mut out = CoefVector::zeros(flavor, j_top);
        for j in (1..=self.params.jmax).rev() {
            let (c, d) = transform::decompose_step(&current, lo, hi);
            if j <= j_top {
                out.level_mut(j).copy_from_slice(&d);
            }
            current = c;
        }
        out.level_mut(0).copy_from_slice(&current);
        Ok(out)
    }

    /// Grid samples of the function with the given coefficients (finer
    /// levels implicitly zero).
    pub fn synthesis(&self, coefs: &CoefVector) -> Result<Vec<f64>> {
        let j_top = coefs.j_top();
        if j_top > self.params.jmax {
            return Err(Error::LevelOutOfRange {
                level: j_top,
                min: self.params.j0,
                max: self.params.jmax,
            });
        }
        let (lo, hi) = self.synthesis_filters(coefs.flavor);
        let mut current = coefs.level(0).to_vec();
        for j in 1..=self.params.jmax {
            let zeros;
            let detail: &[f64] = if j <= j_top {
                coefs.level(j)
            } else {
                zeros = vec![0.0; level_size(j)];
                &zeros
            };
            current = transform::reconstruct_step(&current, detail, lo, hi);
        }
        let scale = (self.params.grid_size as f64).sqrt();
        Ok(current.iter().map(|x| x * scale).collect())
    }

    /// Diagonal Sobolev weights 2^{s j} over Lambda_J in canonical order.
    pub fn diag_weight(s: f64, j_top: usize) -> Vec<f64> {
        indices_up_to(j_top)
            .map(|lam| (2.0f64).powf(s * lam.j as f64))
            .collect()
    }

    /// `(sum_lambda 2^{2 s j} c_lambda^2)^{1/2}`.
    pub fn sobolev_norm(coefs: &CoefVector, s: f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..=coefs.j_top() {
            let w = (2.0f64).powf(2.0 * s * j as f64);
            for &c in coefs.level(j) {
                acc += w * c * c;
            }
        }
        acc.sqrt()
    }

    /// Location shift between neighbouring indices at level `j`.
    fn location_shift(j: usize) -> f64 {
        if j == 0 {
            0.5
        } else {
            (2.0f64).powi(-(j as i32))
        }
    }

    fn scan_support(&self, j: usize) -> SupportInterval {
        let mut coefs = CoefVector::zeros(Flavor::DualTest, j);
        coefs.set(WaveletIndex::new(j, 0), 1.0);
        let samples = self.synthesis(&coefs).expect("level within range");
        let m = samples.len();
        let active: Vec<usize> = (0..m).filter(|&i| samples[i].abs() > 1e-14).collect();
        if active.is_empty() {
            return SupportInterval {
                center: 0.0,
                half_width: 0.0,
            };
        }
        if active.len() == m {
            return SupportInterval {
                center: 0.5,
                half_width: 0.5,
            };
        }
        // Largest circular gap of inactive points; the hull is its complement.
        let mut best_gap = 0usize;
        let mut gap_start = 0usize; // index into `active` after which the gap opens
        for w in 0..active.len() {
            let next = active[(w + 1) % active.len()];
            let gap = (next + m - active[w]) % m;
            if gap > best_gap {
                best_gap = gap;
                gap_start = w;
            }
        }
        let first = active[(gap_start + 1) % active.len()];
        let last = active[gap_start];
        let span = ((last + m - first) % m) as f64 / m as f64;
        SupportInterval {
            center: (first as f64 / m as f64 + span / 2.0).rem_euclid(1.0),
            half_width: span / 2.0,
        }
    }

    /// Convex-hull arc of supp(psi_{j,k}), from a one-time grid scan per
    /// level plus translation invariance within the level.
    pub fn support_interval(&self, lambda: WaveletIndex) -> SupportInterval {
        let base = self.base_supports[lambda.j];
        SupportInterval {
            center: (base.center + lambda.k as f64 * Self::location_shift(lambda.j)).rem_euclid(1.0),
            half_width: base.half_width,
        }
    }
}
