//! CDF biorthogonal B-spline filter banks.
//!
//! The primal lowpass is the binomial (B-spline) filter of order `d`; the
//! dual lowpass is the Cohen-Daubechies-Feauveau completion with `dt`
//! vanishing moments, computed here by exact Laurent-polynomial algebra in
//! dyadic rationals (so the tap values are exact in f64 before the final
//! sqrt(2) scaling). Highpass filters come from the alternating flip.

use std::fmt::Write as _;

use crate::{Error, Result};

/// A finite filter `f[k]`, `k = offset .. offset + taps.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub taps: Vec<f64>,
    pub offset: isize,
}

impl Filter {
    fn new(taps: Vec<f64>, offset: isize) -> Self {
        Filter { taps, offset }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Tap value at absolute index `k` (zero outside the support).
    pub fn at(&self, k: isize) -> f64 {
        let i = k - self.offset;
        if i >= 0 && (i as usize) < self.taps.len() {
            self.taps[i as usize]
        } else {
            0.0
        }
    }

    /// Alternating flip `g[k] = (-1)^k f[1 - k]`, the biorthogonal
    /// lowpass-to-highpass map.
    fn alternating_flip(&self) -> Filter {
        let a = self.offset;
        let b = self.offset + self.taps.len() as isize - 1;
        // g supported on [1 - b, 1 - a]
        let taps = (1 - b..=1 - a)
            .map(|k| {
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * self.at(1 - k)
            })
            .collect();
        Filter::new(taps, 1 - b)
    }
}

/// Wavelet family constants recorded per implemented `(d, dt)` pair.
///
/// `gamma` is exact for B-splines (`d - 1/2`). `gamma_tilde` is the Sobolev
/// exponent of the dual scaling function, estimated numerically from the
/// dyadic-band energy decay of `|phi_dual_hat|^2` (two decimals kept; used
/// only to validate user-supplied decay exponents, never in the numerics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyConstants {
    pub gamma: f64,
    pub gamma_tilde: f64,
}

/// The four filters of a periodized biorthogonal bank, plus family metadata.
///
/// Conventions: all lowpass filters sum to sqrt(2) (so scaling functions have
/// unit integral and the transform is L2-normalized). Analysis of dual-test
/// coefficients uses `(dual_lo, dual_hi)`; analysis of primal-test
/// coefficients uses `(primal_lo, primal_hi)`; synthesis swaps the pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub d: usize,
    pub dt: usize,
    pub primal_lo: Filter,
    pub primal_hi: Filter,
    pub dual_lo: Filter,
    pub dual_hi: Filter,
    pub constants: FamilyConstants,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut v = 1.0;
    for i in 0..k.min(n - k) {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Laurent polynomial with f64 coefficients, `coeffs[i]` at power `low + i`.
#[derive(Clone)]
struct Laurent {
    low: isize,
    coeffs: Vec<f64>,
}

impl Laurent {
    fn mul(&self, other: &Laurent) -> Laurent {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Laurent {
            low: self.low + other.low,
            coeffs: out,
        }
    }

    fn add_scaled(&mut self, other: &Laurent, s: f64) {
        let new_low = self.low.min(other.low);
        let new_high = (self.low + self.coeffs.len() as isize)
            .max(other.low + other.coeffs.len() as isize);
        let mut out = vec![0.0; (new_high - new_low) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            out[(self.low - new_low) as usize + i] += a;
        }
        for (j, b) in other.coeffs.iter().enumerate() {
            out[(other.low - new_low) as usize + j] += s * b;
        }
        self.low = new_low;
        self.coeffs = out;
    }
}

/// Numerically estimated dual Sobolev exponents for the implemented set.
fn family_constants(d: usize, dt: usize) -> FamilyConstants {
    let gamma = d as f64 - 0.5;
    let gamma_tilde = match (d, dt) {
        (2, 2) => 0.44,
        (2, 4) => 1.18,
        (3, 5) => 0.79,
        _ => unreachable!("validated before construction"),
    };
    FamilyConstants { gamma, gamma_tilde }
}

/// Builds the CDF`(d, dt)` filter bank.
///
/// Errors with [`Error::UnsupportedOrder`] outside the implemented set
/// {(2,2), (2,4), (3,5)}.
pub fn build_filter_bank(d: usize, dt: usize) -> Result<FilterBank> {
    if !matches!((d, dt), (2, 2) | (2, 4) | (3, 5)) {
        return Err(Error::UnsupportedOrder { d, dt });
    }
    let sqrt2 = std::f64::consts::SQRT_2;

    // Primal lowpass: h[k] = sqrt(2) 2^{-d} C(d, k+s), s = floor(d/2).
    let s = (d / 2) as isize;
    let primal_lo = Filter::new(
        (0..=d)
            .map(|i| sqrt2 * binomial(d, i) / (1u64 << d) as f64)
            .collect(),
        -s,
    );

    // Dual lowpass via the CDF completion:
    //   m~0(w) = cos^{dt}(w/2) e^{-i kappa w/2} P_L(sin^2(w/2)),
    // kappa = d mod 2, L = (d + dt)/2. In z = e^{-iw}:
    //   cos^{dt}(w/2) e^{-i kappa w/2} has coefficient 2^{-dt} C(dt, m) at
    //   power m - (dt - kappa)/2, and sin^2(w/2) = (2 - z - z^{-1})/4.
    let kappa = d % 2;
    let st = ((dt - kappa) / 2) as isize;
    let cos_part = Laurent {
        low: -st,
        coeffs: (0..=dt)
            .map(|m| binomial(dt, m) / (1u64 << dt) as f64)
            .collect(),
    };
    let sin2 = Laurent {
        low: -1,
        coeffs: vec![-0.25, 0.5, -0.25],
    };
    let big_l = (d + dt) / 2;
    let mut p = Laurent {
        low: 0,
        coeffs: vec![0.0],
    };
    let mut sin2_pow = Laurent {
        low: 0,
        coeffs: vec![1.0],
    };
    for l in 0..big_l {
        p.add_scaled(&sin2_pow, binomial(big_l - 1 + l, l));
        sin2_pow = sin2_pow.mul(&sin2);
    }
    let product = cos_part.mul(&p);
    let dual_lo = Filter::new(product.coeffs.iter().map(|c| sqrt2 * c).collect(), product.low);

    let primal_hi = dual_lo.alternating_flip();
    let dual_hi = primal_lo.alternating_flip();

    Ok(FilterBank {
        d,
        dt,
        primal_lo,
        primal_hi,
        dual_lo,
        dual_hi,
        constants: family_constants(d, dt),
    })
}

impl FilterBank {
    /// Serializes the bank as plain-text key-value lines, taps printed with
    /// 17 significant digits for cross-language comparison.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "d = {}", self.d).unwrap();
        writeln!(out, "dt = {}", self.dt).unwrap();
        writeln!(out, "gamma = {}", self.constants.gamma).unwrap();
        writeln!(out, "gamma_tilde = {}", self.constants.gamma_tilde).unwrap();
        for (name, f) in [
            ("primal_lo", &self.primal_lo),
            ("primal_hi", &self.primal_hi),
            ("dual_lo", &self.dual_lo),
            ("dual_hi", &self.dual_hi),
        ] {
            writeln!(out, "{name}_offset = {}", f.offset).unwrap();
            let taps: Vec<String> = f.taps.iter().map(|t| format!("{t:.16e}")).collect();
            writeln!(out, "{name}_taps = {}", taps.join(" ")).unwrap();
        }
        out
    }

    /// Parses the format produced by [`FilterBank::to_text`].
    pub fn from_text(text: &str) -> Result<FilterBank> {
        let mut d = None;
        let mut dt = None;
        let mut filters: std::collections::HashMap<String, (Option<isize>, Option<Vec<f64>>)> =
            std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                file: "filter bank".into(),
                message: format!("missing '=' in line: {line}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |message: String| Error::Parse {
                file: "filter bank".into(),
                message,
            };
            match key {
                "d" => d = Some(value.parse().map_err(|e| bad(format!("d: {e}")))?),
                "dt" => dt = Some(value.parse().map_err(|e| bad(format!("dt: {e}")))?),
                "gamma" | "gamma_tilde" => {}
                _ if key.ends_with("_offset") => {
                    let name = key.trim_end_matches("_offset").to_string();
                    filters.entry(name).or_default().0 =
                        Some(value.parse().map_err(|e| bad(format!("{key}: {e}")))?);
                }
                _ if key.ends_with("_taps") => {
                    let name = key.trim_end_matches("_taps").to_string();
                    let taps = value
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{key}: {e}"))))
                        .collect::<Result<Vec<f64>>>()?;
                    filters.entry(name).or_default().1 = Some(taps);
                }
                _ => {
                    return Err(bad(format!("unknown key {key}")));
                }
            }
        }
        let d = d.ok_or_else(|| Error::Parse {
            file: "filter bank".into(),
            message: "missing d".into(),
        })?;
        let dt = dt.ok_or_else(|| Error::Parse {
            file: "filter bank".into(),
            message: "missing dt".into(),
        })?;
        let mut get = |name: &str| -> Result<Filter> {
            let (off, taps) = filters.remove(name).ok_or_else(|| Error::Parse {
                file: "filter bank".into(),
                message: format!("missing filter {name}"),
            })?;
            match (off, taps) {
                (Some(offset), Some(taps)) => Ok(Filter { taps, offset }),
                _ => Err(Error::Parse {
                    file: "filter bank".into(),
                    message: format!("incomplete filter {name}"),
                }),
            }
        };
        Ok(FilterBank {
            d,
            dt,
            primal_lo: get("primal_lo")?,
            primal_hi: get("primal_hi")?,
            dual_lo: get("dual_lo")?,
            dual_hi: get("dual_hi")?,
            constants: family_constants(d, dt),
        })
    }
}
