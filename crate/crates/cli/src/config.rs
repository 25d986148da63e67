//! Flat key-value experiment configuration with typed parsing and
//! unknown-key rejection.

use std::collections::HashMap;
use std::path::Path;

use waveop::estimator::{EstimatorConfig, LevelMode, RegressionSupport};
use waveop::fields::{io as fields_io, GrfSpec, OperatorSpec};
use waveop::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    RateSweep,
    SparsitySweep,
    NoiselessSweep,
    SolverSweep,
    OvbProbe,
}

impl SweepMode {
    pub fn label(&self) -> &'static str {
        match self {
            SweepMode::RateSweep => "rate-sweep",
            SweepMode::SparsitySweep => "sparsity-sweep",
            SweepMode::NoiselessSweep => "noiseless-sweep",
            SweepMode::SolverSweep => "solver-sweep",
            SweepMode::OvbProbe => "ovb-probe",
        }
    }
}

/// Everything a run needs: wavelet family, estimator scalars, data model,
/// sweep grids.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: SweepMode,
    pub d: usize,
    pub dt: usize,
    pub jmax: usize,
    pub estimator: EstimatorConfig,
    pub op: OperatorSpec,
    pub input: GrfSpec,
    pub noise: Option<GrfSpec>,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub j_ref: usize,
    pub j_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub n_samples: usize,
    pub j_tilde: Option<usize>,
    pub solver_eps: f64,
    /// Manufactured-solution smoothness for solver sweeps.
    pub manufactured_t: f64,
    /// Wall-clock column in rate sweeps; off keeps outputs byte-stable.
    pub timing: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "d",
    "dt",
    "jmax",
    "t",
    "t_prime",
    "r",
    "r1",
    "r2",
    "sigma",
    "a",
    "jitter",
    "j_mode",
    "regression",
    "op_kind",
    "op_kappa",
    "op_order",
    "op_potential",
    "op_exponent",
    "input_order",
    "input_kappa",
    "noise",
    "noise_order",
    "noise_kappa",
    "n_grid",
    "seeds",
    "j_ref",
    "j_grid",
    "alpha_grid",
    "n_samples",
    "j_tilde",
    "solver_eps",
    "manufactured_t",
    "timing",
];

fn parse_err(file: &str, message: String) -> Error {
    Error::Parse {
        file: file.to_string(),
        message,
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn from_text(text: &str, file: &str) -> Result<Self> {
        let mut map: HashMap<String, String> = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                parse_err(file, format!("line {}: missing '='", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(parse_err(file, format!("unknown key '{key}'")));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(parse_err(file, format!("duplicate key '{key}'")));
            }
        }
        Self::from_map(&map, file)
    }

    fn from_map(map: &HashMap<String, String>, file: &str) -> Result<Self> {
        let get = |key: &str| map.get(key).cloned();
        let req = |key: &str| -> Result<String> {
            get(key).ok_or_else(|| parse_err(file, format!("missing key '{key}'")))
        };
        let f64_of = |key: &str| -> Result<f64> {
            req(key)?
                .parse()
                .map_err(|e| parse_err(file, format!("{key}: {e}")))
        };
        let f64_or = |key: &str, default: f64| -> Result<f64> {
            match get(key) {
                Some(v) => v.parse().map_err(|e| parse_err(file, format!("{key}: {e}"))),
                None => Ok(default),
            }
        };
        let usize_of = |key: &str| -> Result<usize> {
            req(key)?
                .parse()
                .map_err(|e| parse_err(file, format!("{key}: {e}")))
        };
        let usize_or = |key: &str, default: usize| -> Result<usize> {
            match get(key) {
                Some(v) => v.parse().map_err(|e| parse_err(file, format!("{key}: {e}"))),
                None => Ok(default),
            }
        };
        let list_usize = |key: &str| -> Result<Vec<usize>> {
            match get(key) {
                None => Ok(Vec::new()),
                Some(v) => v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|e| parse_err(file, format!("{key}: {e}")))
                    })
                    .collect(),
            }
        };
        let list_f64 = |key: &str| -> Result<Vec<f64>> {
            match get(key) {
                None => Ok(Vec::new()),
                Some(v) => v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|e| parse_err(file, format!("{key}: {e}")))
                    })
                    .collect(),
            }
        };

        let mode = match req("mode")?.as_str() {
            "rate-sweep" => SweepMode::RateSweep,
            "sparsity-sweep" => SweepMode::SparsitySweep,
            "noiseless-sweep" => SweepMode::NoiselessSweep,
            "solver-sweep" => SweepMode::SolverSweep,
            "ovb-probe" => SweepMode::OvbProbe,
            other => return Err(parse_err(file, format!("unknown mode '{other}'"))),
        };

        let j_mode = match get("j_mode").as_deref() {
            None | Some("auto") => LevelMode::Auto,
            Some(v) => match v.strip_prefix("fixed:") {
                Some(j) => LevelMode::Fixed(
                    j.parse()
                        .map_err(|e| parse_err(file, format!("j_mode: {e}")))?,
                ),
                None => return Err(parse_err(file, format!("j_mode must be auto or fixed:<J>, got '{v}'"))),
            },
        };
        let regression = match get("regression").as_deref() {
            None | Some("nested") => RegressionSupport::Nested,
            Some("full") => RegressionSupport::Full,
            Some(other) => {
                return Err(parse_err(
                    file,
                    format!("regression must be nested or full, got '{other}'"),
                ))
            }
        };

        let dt = usize_of("dt")?;
        let estimator = EstimatorConfig {
            t: f64_of("t")?,
            t_prime: f64_of("t_prime")?,
            r: f64_of("r")?,
            r1: f64_of("r1")?,
            r2: f64_of("r2")?,
            sigma: f64_of("sigma")?,
            dt,
            a: f64_or("a", 2.0)?,
            jitter: f64_or("jitter", 0.0)?,
            mode: j_mode,
            regression,
        };

        let op = fields_io::parse_operator(&|k| get(k), file)?;
        let input = GrfSpec {
            order: f64_of("input_order")?,
            kappa: f64_or("input_kappa", 1.0)?,
        };
        let noise = match get("noise").as_deref() {
            Some("none") => None,
            _ => {
                if map.contains_key("noise_order") {
                    Some(GrfSpec {
                        order: f64_of("noise_order")?,
                        kappa: f64_or("noise_kappa", 1.0)?,
                    })
                } else {
                    None
                }
            }
        };

        let seeds: Vec<u64> = match get("seeds") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| parse_err(file, format!("seeds: {e}")))
                })
                .collect::<Result<Vec<u64>>>()?,
        };

        let cfg = ExperimentConfig {
            mode,
            d: usize_of("d")?,
            dt,
            jmax: usize_of("jmax")?,
            estimator,
            op,
            input,
            noise,
            n_grid: list_usize("n_grid")?,
            seeds,
            j_ref: usize_or("j_ref", 0)?,
            j_grid: list_usize("j_grid")?,
            alpha_grid: list_f64("alpha_grid")?,
            n_samples: usize_or("n_samples", 0)?,
            j_tilde: match get("j_tilde") {
                Some(v) => Some(
                    v.parse()
                        .map_err(|e| parse_err(file, format!("j_tilde: {e}")))?,
                ),
                None => None,
            },
            solver_eps: f64_or("solver_eps", 0.25)?,
            manufactured_t: f64_or("manufactured_t", 1.0)?,
            timing: match get("timing").as_deref() {
                None | Some("off") => false,
                Some("on") => true,
                Some(other) => {
                    return Err(parse_err(file, format!("timing must be on or off, got '{other}'")))
                }
            },
        };
        cfg.validate(file)?;
        Ok(cfg)
    }

    fn validate(&self, file: &str) -> Result<()> {
        self.estimator.validate()?;
        self.op.validate()?;
        self.input.validate()?;
        if let Some(n) = self.noise {
            n.validate()?;
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(parse_err(file, "n_grid must be strictly increasing".into()));
        }
        match self.mode {
            SweepMode::RateSweep => {
                if self.n_grid.is_empty() {
                    return Err(parse_err(file, "rate-sweep needs a non-empty n_grid".into()));
                }
                if self.seeds.len() < 3 {
                    return Err(parse_err(file, "rate sweeps need at least 3 seeds".into()));
                }
                if self.j_ref == 0 {
                    return Err(parse_err(file, "rate-sweep needs j_ref".into()));
                }
            }
            SweepMode::SparsitySweep => {
                if self.j_grid.is_empty() {
                    return Err(parse_err(file, "sparsity-sweep needs j_grid".into()));
                }
            }
            SweepMode::NoiselessSweep => {
                if self.j_grid.is_empty() && self.n_grid.is_empty() {
                    return Err(parse_err(
                        file,
                        "noiseless-sweep needs j_grid or n_grid".into(),
                    ));
                }
                if self.seeds.is_empty() {
                    return Err(parse_err(file, "noiseless-sweep needs seeds".into()));
                }
                if self.j_ref == 0 {
                    return Err(parse_err(file, "noiseless-sweep needs j_ref".into()));
                }
            }
            SweepMode::SolverSweep => {
                if self.j_grid.is_empty() {
                    return Err(parse_err(file, "solver-sweep needs j_grid".into()));
                }
                if self.alpha_grid.is_empty() {
                    return Err(parse_err(file, "solver-sweep needs alpha_grid".into()));
                }
            }
            SweepMode::OvbProbe => {
                if self.n_grid.is_empty() || self.seeds.is_empty() {
                    return Err(parse_err(file, "ovb-probe needs n_grid and seeds".into()));
                }
                if self.noise.is_none() {
                    return Err(parse_err(file, "ovb-probe needs a noise model".into()));
                }
                if self.j_ref == 0 {
                    return Err(parse_err(file, "ovb-probe needs j_ref".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "mode = sparsity-sweep\nd = 2\ndt = 4\njmax = 9\n\
        t = 0.25\nt_prime = 0.25\nr = 0.25\nr1 = 1.5\nr2 = 1.5\nsigma = 1.4\n\
        op_kind = fourier_multiplier\nop_kappa = 1\nop_order = 0.25\n\
        input_order = 1.5\nj_grid = 4,5,6\n";

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_text(BASE, "test").unwrap();
        assert_eq!(cfg.mode, SweepMode::SparsitySweep);
        assert_eq!(cfg.j_grid, vec![4, 5, 6]);
        assert_eq!(cfg.estimator.a, 2.0);
        assert!(cfg.noise.is_none());
    }

    #[test]
    fn rejects_unknown_key() {
        let text = format!("{BASE}frobnicate = 7\n");
        let err = ExperimentConfig::from_text(&text, "test").unwrap_err();
        assert!(err.to_string().contains("frobnicate"), "{err}");
    }

    #[test]
    fn rejects_duplicate_key() {
        let text = format!("{BASE}d = 3\n");
        assert!(ExperimentConfig::from_text(&text, "test").is_err());
    }

    #[test]
    fn rejects_unsorted_n_grid() {
        let text = BASE.replace("mode = sparsity-sweep", "mode = rate-sweep")
            + "n_grid = 64,32\nseeds = 1,2,3\nj_ref = 5\n";
        assert!(ExperimentConfig::from_text(&text, "test").is_err());
    }

    #[test]
    fn rate_sweep_needs_three_seeds() {
        let text = BASE.replace("mode = sparsity-sweep", "mode = rate-sweep")
            + "n_grid = 32,64\nseeds = 1,2\nj_ref = 5\n";
        assert!(ExperimentConfig::from_text(&text, "test").is_err());
    }

    #[test]
    fn empty_n_grid_is_a_config_error() {
        let text = BASE.replace("mode = sparsity-sweep", "mode = rate-sweep")
            + "seeds = 1,2,3\nj_ref = 5\n";
        assert!(ExperimentConfig::from_text(&text, "test").is_err());
    }
}
