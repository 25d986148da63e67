//! Ground-truth operators and Gaussian random data.
//!
//! Operators act on grid samples: Fourier multipliers go through the FFT,
//! fractional Schroedinger powers through a dense symmetric
//! eigendecomposition of the grid operator (exact at desk scale, done once
//! per [`PreparedOperator`]). Random fields are Whittle-Matern draws
//! synthesized in Fourier space with conjugate symmetry, deterministic per
//! seed.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::wavelets::{num_indices, CoefVector, Flavor, WaveletSystem};
use crate::{Error, Result};

/// Potential of a Schroedinger operator, kept analytic so specs serialize
/// into plain-text headers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Constant(f64),
    /// `V(x) = mean + amplitude * cos(2 pi frequency x)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        frequency: u32,
    },
}

impl Potential {
    pub fn min_value(&self) -> f64 {
        match *self {
            Potential::Constant(c) => c,
            Potential::Cosine { mean, amplitude, .. } => mean - amplitude.abs(),
        }
    }

    pub fn sample(&self, x: f64) -> f64 {
        match *self {
            Potential::Constant(c) => c,
            Potential::Cosine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * frequency as f64 * x).cos(),
        }
    }
}

/// A ground-truth pseudo-differential operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec {
    /// Symbol `m(xi) = (kappa + |2 pi xi|^2)^{order/2}`, `kappa > 0`.
    FourierMultiplier { kappa: f64, order: f64 },
    /// `A = (-Laplace + V)^exponent`; operator order is `2 * exponent`.
    SchrodingerPower { potential: Potential, exponent: f64 },
}

impl OperatorSpec {
    /// Declared pseudo-differential order r.
    pub fn order(&self) -> f64 {
        match *self {
            OperatorSpec::FourierMultiplier { order, .. } => order,
            OperatorSpec::SchrodingerPower { exponent, .. } => 2.0 * exponent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OperatorSpec::FourierMultiplier { kappa, .. } => {
                if kappa <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "fourier multiplier requires kappa > 0, got {kappa}"
                    )));
                }
            }
            OperatorSpec::SchrodingerPower { potential, .. } => {
                let vmin = potential.min_value();
                if vmin <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "schroedinger potential must be uniformly positive, min = {vmin}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Whittle-Matern covariance `(kappa - Laplace)^{-order}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfSpec {
    pub order: f64,
    pub kappa: f64,
}

impl GrfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grf kappa must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Signed integer frequency of DFT bin `q` on an `m`-point grid.
fn bin_frequency(q: usize, m: usize) -> i64 {
    if q <= m / 2 {
        q as i64
    } else {
        q as i64 - m as i64
    }
}

/// An operator bound to a grid size, with transforms or eigendecompositions
/// precomputed. Cheap to apply repeatedly; immutable and Sync.
pub struct PreparedOperator {
    spec: OperatorSpec,
    grid_size: usize,
    kind: PreparedKind,
}

enum PreparedKind {
    Multiplier {
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
        symbol: Vec<f64>,
    },
    Schrodinger {
        /// Orthonormal eigenvectors (columns) of the grid Hamiltonian.
        q: DMatrix<f64>,
        /// Eigenvalues raised to the fractional exponent.
        powers: Vec<f64>,
    },
}

impl PreparedOperator {
    pub fn new(spec: OperatorSpec, grid_size: usize) -> Result<Self> {
        spec.validate()?;
        if !grid_size.is_power_of_two() || grid_size < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two >= 4, got {grid_size}"
            )));
        }
        let kind = match spec {
            OperatorSpec::FourierMultiplier { kappa, order } => {
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(grid_size);
                let inv = planner.plan_fft_inverse(grid_size);
                let symbol = (0..grid_size)
                    .map(|q| {
                        let xi = 2.0 * std::f64::consts::PI * bin_frequency(q, grid_size) as f64;
                        (kappa + xi * xi).powf(order / 2.0)
                    })
                    .collect();
                PreparedKind::Multiplier { fwd, inv, symbol }
            }
            OperatorSpec::SchrodingerPower {
                potential,
                exponent,
            } => {
                let m = grid_size;
                // Spectral Laplacian as a symmetric circulant: first row via
                // inverse DFT of the symbol |2 pi xi|^2.
                let mut planner = FftPlanner::new();
                let inv = planner.plan_fft_inverse(m);
                let mut row: Vec<Complex64> = (0..m)
                    .map(|q| {
                        let xi = 2.0 * std::f64::consts::PI * bin_frequency(q, m) as f64;
                        Complex64::new(xi * xi / m as f64, 0.0)
                    })
                    .collect();
                inv.process(&mut row);
                let mut h = DMatrix::<f64>::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        h[(i, j)] = row[(i + m - j) % m].re;
                    }
                    h[(i, i)] += potential.sample(i as f64 / m as f64);
                }
                // kill asymmetric roundoff before factoring
                for i in 0..m {
                    for j in 0..i {
                        let v = 0.5 * (h[(i, j)] + h[(j, i)]);
                        h[(i, j)] = v;
                        h[(j, i)] = v;
                    }
                }
                let eig = h.symmetric_eigen();
                let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                if !min.is_finite() {
                    return Err(Error::Eigen("non-finite eigenvalue".into()));
                }
                if min <= 0.0 {
                    return Err(Error::Eigen(format!(
                        "grid Hamiltonian not positive definite (lambda_min = {min:.3e})"
                    )));
                }
                let powers = eig.eigenvalues.iter().map(|l| l.powf(exponent)).collect();
                PreparedKind::Schrodinger {
                    q: eig.eigenvectors,
                    powers,
                }
            }
        };
        Ok(PreparedOperator {
            spec,
            grid_size,
            kind,
        })
    }

    pub fn spec(&self) -> OperatorSpec {
        self.spec
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn order(&self) -> f64 {
        self.spec.order()
    }

    /// Applies the operator to grid samples.
    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.grid_size {
            return Err(Error::DimensionMismatch {
                expected: self.grid_size,
                got: samples.len(),
                context: "apply_operator samples",
            });
        }
        match &self.kind {
            PreparedKind::Multiplier { fwd, inv, symbol } => {
                let m = self.grid_size as f64;
                let mut buf: Vec<Complex64> =
                    samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fwd.process(&mut buf);
                for (b, s) in buf.iter_mut().zip(symbol) {
                    *b *= s / m; // fold in the 1/m DFT normalization
                }
                inv.process(&mut buf);
                Ok(buf.iter().map(|c| c.re).collect())
            }
            PreparedKind::Schrodinger { q, powers } => {
                let x = nalgebra::DVector::from_column_slice(samples);
                let mut y = q.transpose() * x;
                for (v, p) in y.iter_mut().zip(powers) {
                    *v *= p;
                }
                let out = q * y;
                Ok(out.iter().cloned().collect())
            }
        }
    }
}

/// One-shot operator application (prefer [`PreparedOperator`] when applying
/// repeatedly, the Schroedinger preparation is an O(m^3) eigendecomposition).
pub fn apply_operator(spec: OperatorSpec, samples: &[f64]) -> Result<Vec<f64>> {
    PreparedOperator::new(spec, samples.len())?.apply(samples)
}

/// Spectral Sobolev norm oracle on grid samples:
/// `(sum_xi (1 + |2 pi xi|^2)^s |u_hat(xi)|^2)^{1/2}` with the DFT
/// normalized so that the s = 0 case is the L2([0,1)) norm.
pub fn spectral_sobolev_norm(samples: &[f64], s: f64) -> f64 {
    let m = samples.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft.process(&mut buf);
    let mf = m as f64;
    let mut acc = 0.0;
    for (q, c) in buf.iter().enumerate() {
        let xi = 2.0 * std::f64::consts::PI * bin_frequency(q, m) as f64;
        acc += (1.0 + xi * xi).powf(s) * (c.norm_sqr() / (mf * mf));
    }
    acc.sqrt()
}

/// Draws one Whittle-Matern field on an `m`-point grid, deterministically in
/// the seed. Fourier modes are independent centered Gaussians with
/// `E |u_hat(xi)|^2 = (kappa + |2 pi xi|^2)^{-order}`, real/imaginary parts
/// split evenly and conjugate symmetry enforced; DC and Nyquist modes are
/// real.
pub fn sample_grf(spec: GrfSpec, grid_size: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !grid_size.is_power_of_two() || grid_size < 4 {
        return Err(Error::InvalidParameter(format!(
            "grid size must be a power of two >= 4, got {grid_size}"
        )));
    }
    let m = grid_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variance = |xi: f64| -> f64 {
        let w = 2.0 * std::f64::consts::PI * xi;
        (spec.kappa + w * w).powf(-spec.order)
    };
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
    let g = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    spectrum[0] = Complex64::new(variance(0.0).sqrt() * g(&mut rng), 0.0);
    for q in 1..m / 2 {
        let sd = (variance(q as f64) / 2.0).sqrt();
        let re = sd * g(&mut rng);
        let im = sd * g(&mut rng);
        spectrum[q] = Complex64::new(re, im);
        spectrum[m - q] = Complex64::new(re, -im);
    }
    spectrum[m / 2] = Complex64::new(variance((m / 2) as f64).sqrt() * g(&mut rng), 0.0);

    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(m).process(&mut spectrum);
    Ok(spectrum.iter().map(|c| c.re).collect())
}

/// Row matrices of the regression model `F = U A + W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N x |Lambda_Jt| dual-test input coefficients.
    pub u: Array2<f64>,
    /// N x |Lambda_Jt| primal-test output coefficients.
    pub f: Array2<f64>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub n_samples: usize,
    pub j_tilde: usize,
    pub seed: u64,
    pub d: usize,
    pub dt: usize,
    pub jmax: usize,
    pub op: OperatorSpec,
    pub input: GrfSpec,
    pub noise: Option<GrfSpec>,
}

/// Checks the standing model assumptions (`r1 > n/2 + max(0, r)` and
/// `r2 > n/2`, n = 1). Violations are reported, not fatal.
pub fn assumption_warnings(op_order: f64, input: GrfSpec, noise: Option<GrfSpec>) -> Vec<String> {
    let mut warnings = Vec::new();
    let need = 0.5 + op_order.max(0.0);
    if input.order <= need {
        warnings.push(format!(
            "input regularity r1 = {} should exceed n/2 + max(0, r) = {}",
            input.order, need
        ));
    }
    if let Some(noise) = noise {
        if noise.order <= 0.5 {
            warnings.push(format!(
                "noise regularity r2 = {} should exceed n/2 = 0.5",
                noise.order
            ));
        }
    }
    warnings
}

/// SplitMix64 step, used to derive independent per-row streams.
fn mix_seed(seed: u64, salt: u64, row: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(row);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

const INPUT_SALT: u64 = 0x1;
const NOISE_SALT: u64 = 0x2;

/// Generates `F = U A + W` rows.
///
/// Inputs are band-limited to `V_{j_tilde}` (the Matern draw is projected
/// onto Lambda_{j_tilde} before the operator is applied), so the stored
/// coefficients describe the data exactly and a full-support regression on
/// noiseless data is a consistent model. Outputs and noise are formed in
/// function space on the grid and then analyzed.
pub fn generate_dataset(
    sys: &WaveletSystem,
    n_samples: usize,
    op: &PreparedOperator,
    input: GrfSpec,
    noise: Option<GrfSpec>,
    j_tilde: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("dataset needs N >= 1".into()));
    }
    let jmax = sys.params().jmax;
    if j_tilde + 3 > jmax {
        return Err(Error::Resolution(format!(
            "j_tilde = {j_tilde} needs jmax >= {} (quadrature guard), have {jmax}",
            j_tilde + 3
        )));
    }
    if op.grid_size() != sys.grid_size() {
        return Err(Error::DimensionMismatch {
            expected: sys.grid_size(),
            got: op.grid_size(),
            context: "operator grid vs wavelet grid",
        });
    }
    input.validate()?;
    if let Some(ns) = noise {
        ns.validate()?;
    }

    let cols = num_indices(j_tilde);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, Vec<f64>)> {
            let u_raw = sample_grf(input, sys.grid_size(), mix_seed(seed, INPUT_SALT, i as u64))?;
            let u_coefs = sys.analysis(&u_raw, Flavor::DualTest, j_tilde)?;
            let u_band = sys.synthesis(&u_coefs)?;
            let mut f_samples = op.apply(&u_band)?;
            if let Some(ns) = noise {
                let w = sample_grf(ns, sys.grid_size(), mix_seed(seed, NOISE_SALT, i as u64))?;
                for (f, w) in f_samples.iter_mut().zip(&w) {
                    *f += w;
                }
            }
            let f_coefs = sys.analysis(&f_samples, Flavor::PrimalTest, j_tilde)?;
            Ok((u_coefs.to_flat(), f_coefs.to_flat()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut u = Array2::<f64>::zeros((n_samples, cols));
    let mut f = Array2::<f64>::zeros((n_samples, cols));
    for (i, (ur, fr)) in rows.into_iter().enumerate() {
        u.row_mut(i).assign(&ndarray::ArrayView1::from(&ur));
        f.row_mut(i).assign(&ndarray::ArrayView1::from(&fr));
    }
    let params = sys.params();
    Ok(Dataset {
        u,
        f,
        meta: DatasetMeta {
            n_samples,
            j_tilde,
            seed,
            d: params.d,
            dt: params.dt,
            jmax: params.jmax,
            op: op.spec(),
            input,
            noise,
        },
    })
}

impl Dataset {
    /// Dual-test coefficients of row `i` as a CoefVector.
    pub fn input_coefs(&self, i: usize) -> CoefVector {
        CoefVector::from_flat(
            Flavor::DualTest,
            self.meta.j_tilde,
            self.u.row(i).as_slice().expect("contiguous row"),
        )
        .expect("dataset shape is validated")
    }
}

pub mod io {
    //! Dataset persistence: a plain-text header plus two row-major
    //! little-endian f64 binaries for U and F.

    use std::fs;
    use std::io::{Read, Write};
    use std::path::Path;

    use ndarray::Array2;

    use super::{Dataset, DatasetMeta, GrfSpec, OperatorSpec, Potential};
    use crate::wavelets::num_indices;
    use crate::{Error, Result};

    pub fn format_operator(op: &OperatorSpec) -> Vec<String> {
        match *op {
            OperatorSpec::FourierMultiplier { kappa, order } => vec![
                "op_kind = fourier_multiplier".into(),
                format!("op_kappa = {kappa:.16e}"),
                format!("op_order = {order:.16e}"),
            ],
            OperatorSpec::SchrodingerPower {
                potential,
                exponent,
            } => {
                let pot = match potential {
                    Potential::Constant(c) => format!("constant:{c:.16e}"),
                    Potential::Cosine {
                        mean,
                        amplitude,
                        frequency,
                    } => format!("cosine:{mean:.16e}:{amplitude:.16e}:{frequency}"),
                };
                vec![
                    "op_kind = schrodinger_power".into(),
                    format!("op_potential = {pot}"),
                    format!("op_exponent = {exponent:.16e}"),
                ]
            }
        }
    }

    pub fn parse_operator(
        get: &dyn Fn(&str) -> Option<String>,
        file: &str,
    ) -> Result<OperatorSpec> {
        let bad = |message: String| Error::Parse {
            file: file.into(),
            message,
        };
        let kind = get("op_kind").ok_or_else(|| bad("missing op_kind".into()))?;
        match kind.as_str() {
            "fourier_multiplier" => Ok(OperatorSpec::FourierMultiplier {
                kappa: get("op_kappa")
                    .ok_or_else(|| bad("missing op_kappa".into()))?
                    .parse()
                    .map_err(|e| bad(format!("op_kappa: {e}")))?,
                order: get("op_order")
                    .ok_or_else(|| bad("missing op_order".into()))?
                    .parse()
                    .map_err(|e| bad(format!("op_order: {e}")))?,
            }),
            "schrodinger_power" => {
                let pot = get("op_potential").ok_or_else(|| bad("missing op_potential".into()))?;
                let parts: Vec<&str> = pot.split(':').collect();
                let potential = match parts.as_slice() {
                    ["constant", c] => Potential::Constant(
                        c.parse().map_err(|e| bad(format!("potential: {e}")))?,
                    ),
                    ["cosine", mean, amp, freq] => Potential::Cosine {
                        mean: mean.parse().map_err(|e| bad(format!("potential: {e}")))?,
                        amplitude: amp.parse().map_err(|e| bad(format!("potential: {e}")))?,
                        frequency: freq.parse().map_err(|e| bad(format!("potential: {e}")))?,
                    },
                    _ => return Err(bad(format!("unrecognized potential '{pot}'"))),
                };
                Ok(OperatorSpec::SchrodingerPower {
                    potential,
                    exponent: get("op_exponent")
                        .ok_or_else(|| bad("missing op_exponent".into()))?
                        .parse()
                        .map_err(|e| bad(format!("op_exponent: {e}")))?,
                })
            }
            other => Err(bad(format!("unknown op_kind '{other}'"))),
        }
    }

    fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for v in m.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&bytes)?;
        Ok(())
    }

    fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != rows * cols * 8 {
            return Err(Error::Parse {
                file: path.display().to_string(),
                message: format!(
                    "expected {} bytes for {rows} x {cols} f64 matrix, found {}",
                    rows * cols * 8,
                    bytes.len()
                ),
            });
        }
        let mut m = Array2::<f64>::zeros((rows, cols));
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            m[(i / cols, i % cols)] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(m)
    }

    /// Writes `<base>.header`, `<base>.u.bin`, `<base>.f.bin`.
    pub fn save_dataset(base: &Path, ds: &Dataset) -> Result<()> {
        if let Some(parent) = base.parent() {
            fs::create_dir_all(parent)?;
        }
        let meta = &ds.meta;
        let mut header = String::new();
        header.push_str(&format!("n_samples = {}\n", meta.n_samples));
        header.push_str(&format!("j_tilde = {}\n", meta.j_tilde));
        header.push_str(&format!("seed = {}\n", meta.seed));
        header.push_str(&format!("d = {}\n", meta.d));
        header.push_str(&format!("dt = {}\n", meta.dt));
        header.push_str(&format!("jmax = {}\n", meta.jmax));
        for line in format_operator(&meta.op) {
            header.push_str(&line);
            header.push('\n');
        }
        header.push_str(&format!("input_order = {:.16e}\n", meta.input.order));
        header.push_str(&format!("input_kappa = {:.16e}\n", meta.input.kappa));
        match meta.noise {
            Some(ns) => {
                header.push_str(&format!("noise_order = {:.16e}\n", ns.order));
                header.push_str(&format!("noise_kappa = {:.16e}\n", ns.kappa));
            }
            None => header.push_str("noise = none\n"),
        }
        fs::write(base.with_extension("header"), header)?;
        write_matrix(&base.with_extension("u.bin"), &ds.u)?;
        write_matrix(&base.with_extension("f.bin"), &ds.f)?;
        Ok(())
    }

    /// Loads a dataset saved by [`save_dataset`], validating shapes against
    /// the header.
    pub fn load_dataset(base: &Path) -> Result<Dataset> {
        let header_path = base.with_extension("header");
        let text = fs::read_to_string(&header_path)?;
        let file = header_path.display().to_string();
        let mut map = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                file: file.clone(),
                message: format!("missing '=' in '{line}'"),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| map.get(key).cloned();
        let req = |key: &str| -> Result<String> {
            get(key).ok_or_else(|| Error::Parse {
                file: file.clone(),
                message: format!("missing key '{key}'"),
            })
        };
        let parse_usize = |key: &str| -> Result<usize> {
            req(key)?.parse().map_err(|e| Error::Parse {
                file: file.clone(),
                message: format!("{key}: {e}"),
            })
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            req(key)?.parse().map_err(|e| Error::Parse {
                file: file.clone(),
                message: format!("{key}: {e}"),
            })
        };
        let meta = DatasetMeta {
            n_samples: parse_usize("n_samples")?,
            j_tilde: parse_usize("j_tilde")?,
            seed: req("seed")?.parse().map_err(|e| Error::Parse {
                file: file.clone(),
                message: format!("seed: {e}"),
            })?,
            d: parse_usize("d")?,
            dt: parse_usize("dt")?,
            jmax: parse_usize("jmax")?,
            op: parse_operator(&get, &file)?,
            input: GrfSpec {
                order: parse_f64("input_order")?,
                kappa: parse_f64("input_kappa")?,
            },
            noise: if map.contains_key("noise_order") {
                Some(GrfSpec {
                    order: parse_f64("noise_order")?,
                    kappa: parse_f64("noise_kappa")?,
                })
            } else {
                None
            },
        };
        let cols = num_indices(meta.j_tilde);
        let u = read_matrix(&base.with_extension("u.bin"), meta.n_samples, cols)?;
        let f = read_matrix(&base.with_extension("f.bin"), meta.n_samples, cols)?;
        Ok(Dataset { u, f, meta })
    }
}
