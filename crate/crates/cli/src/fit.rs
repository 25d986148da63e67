//! Log-log slope fitting on sweep CSVs: per-x medians, then ordinary
//! least squares in log2 coordinates.

use std::path::Path;

use waveop::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Reads `(x, y)` pairs from the named columns of a CSV file.
pub fn read_xy(path: &Path, x_column: &str, y_column: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            file: path.display().to_string(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                file: path.display().to_string(),
                message: format!("no column named '{name}' (have {headers:?})"),
            })
    };
    let xi = col(x_column)?;
    let yi = col(y_column)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::Parse {
                    file: path.display().to_string(),
                    message: "short record".into(),
                })?
                .parse()
                .map_err(|e| Error::Parse {
                    file: path.display().to_string(),
                    message: format!("bad number: {e}"),
                })
        };
        out.push((parse(xi)?, parse(yi)?));
    }
    Ok(out)
}

/// Collapses repeated x values to their median y.
pub fn per_x_medians(mut pairs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        let mut ys: Vec<f64> = Vec::new();
        while i < pairs.len() && pairs[i].0 == x {
            ys.push(pairs[i].1);
            i += 1;
        }
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = ys.len();
        let median = if m % 2 == 1 {
            ys[m / 2]
        } else {
            0.5 * (ys[m / 2 - 1] + ys[m / 2])
        };
        out.push((x, median));
    }
    out
}

/// OLS on (log2 x, log2 median-y).
pub fn fit_slope(path: &Path, x_column: &str, y_column: &str) -> Result<SlopeFit> {
    let pairs = read_xy(path, x_column, y_column)?;
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs at least 3 rows, found {}",
            pairs.len()
        )));
    }
    let medians = per_x_medians(pairs);
    fit_loglog(&medians)
}

/// OLS fit on already log-ready positive data.
pub fn fit_loglog(medians: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = medians
        .iter()
        .map(|&(x, y)| -> Result<(f64, f64)> {
            if x <= 0.0 || y <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "log-log fit needs positive data, got ({x}, {y})"
                )));
            }
            Ok((x.log2(), y.log2()))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate fit: all x values coincide".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn exact_power_law_recovers_slope() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "n,err").unwrap();
        for n in [16u32, 32, 64, 128, 256] {
            writeln!(f, "{n},{}", (n as f64).powf(-0.5)).unwrap();
        }
        let fit = fit_slope(&path, "n", "err").unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12, "{fit:?}");
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_gives_zero_slope() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "n,err").unwrap();
        for n in [16u32, 32, 64] {
            writeln!(f, "{n},2.5").unwrap();
        }
        let fit = fit_slope(&path, "n", "err").unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn medians_absorb_seed_noise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "n,err").unwrap();
        // three seeds per n; one wild outlier per group
        for n in [16u32, 64, 256] {
            let base = (n as f64).powf(-0.5);
            writeln!(f, "{n},{}", base * 0.97).unwrap();
            writeln!(f, "{n},{}", base).unwrap();
            writeln!(f, "{n},{}", base * 50.0).unwrap();
        }
        let fit = fit_slope(&path, "n", "err").unwrap();
        assert!((fit.slope + 0.5).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn degenerate_x_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "n,err\n8,1.0\n8,2.0\n8,3.0").unwrap();
        assert!(fit_slope(&path, "n", "err").is_err());
    }
}
