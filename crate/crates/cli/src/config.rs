//! Run configuration: a single TOML file, every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use waveguide_core::eigensolve::{Preconditioner, SolverOptions};
use waveguide_core::geometry::ProfileKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub curve: ProfileKind,
    pub epsilon: f64,
    /// Physical mass `m`; `transverse` and `dispersion` read it as the dimensionless transverse mass.
    pub mass: f64,
    pub bands: BandRange,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub sweep: Option<SweepConfig>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            curve: ProfileKind::PolynomialBump { kappa0: 1.0, length: 1.0 },
            epsilon: 0.1,
            mass: 50.0,
            bands: BandRange::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            sweep: None,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandRange {
    pub first: usize,
    pub last: usize,
}

impl Default for BandRange {
    fn default() -> Self {
        Self { first: 1, last: 4 }
    }
}

impl BandRange {
    /// `"a..b"` (inclusive) or a single index.
    pub fn parse(text: &str) -> Result<Self, String> {
        let index = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("bad band index {s:?}"));
        let range = match text.split_once("..") {
            Some((a, b)) => Self { first: index(a)?, last: index(b.trim_start_matches('='))? },
            None => {
                let p = index(text)?;
                Self { first: p, last: p }
            }
        };
        Ok(range)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Half-length `S` of the truncated strip; defaults to the support plus ten decay lengths.
    pub s_override: Option<f64>,
    pub n_s: usize,
    pub n_t: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { s_override: None, n_s: 2021, n_t: 21 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub count: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { count: 4, tol: 1e-9, max_iter: 500, seed: 0, preconditioner: Preconditioner::ShiftInvert { shift: None } }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            count: self.count,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            preconditioner: self.preconditioner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Epsilon,
    Mass,
    K,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("waveguide-out"), formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("epsilon", self.epsilon)?;
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return Err(format!("mass must be non-negative, got {}", self.mass));
        }
        if self.bands.first == 0 || self.bands.last < self.bands.first {
            return Err(format!("band range {}..{} must satisfy 1 <= first <= last", self.bands.first, self.bands.last));
        }
        if let Some(s) = self.grid.s_override {
            positive("grid.s_override", s)?;
        }
        if self.grid.n_s < 3 || self.grid.n_t < 3 || self.grid.n_t % 2 == 0 {
            return Err(format!("grid needs n_s >= 3 and odd n_t >= 3, got ({}, {})", self.grid.n_s, self.grid.n_t));
        }
        if self.solver.count == 0 || self.solver.max_iter == 0 {
            return Err("solver.count and solver.max_iter must be positive".into());
        }
        positive("solver.tol", self.solver.tol)?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() || sweep.values.iter().any(|v| !v.is_finite()) {
                return Err("sweep.values must be a non-empty list of finite numbers".into());
            }
            if sweep.values.windows(2).any(|w| w[1] < w[0]) {
                return Err("sweep.values must be sorted ascending".into());
            }
            if sweep.variable != SweepVariable::K && sweep.values.iter().any(|&v| !(v > 0.0)) {
                return Err("epsilon and mass sweep values must be positive".into());
            }
        }
        Ok(())
    }

    /// Sweep values for `variable`, or `default` when no sweep is configured.
    pub fn sweep_values(&self, variable: SweepVariable, default: Vec<f64>) -> Result<Vec<f64>, String> {
        match &self.sweep {
            None => Ok(default),
            Some(s) if s.variable == variable => Ok(s.values.clone()),
            Some(s) => Err(format!("sweep over {:?} does not apply here (expected {variable:?})", s.variable)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn parses_full_file() {
        let c: RunConfig = toml::from_str(
            r#"
            epsilon = 0.05
            mass = 3.0
            curve = { kind = "gaussian_bump", kappa0 = 1.0, sigma = 0.5 }
            [grid]
            s_override = 12.0
            n_s = 101
            n_t = 11
            [solver]
            count = 2
            preconditioner = { kind = "jacobi" }
            [sweep]
            variable = "epsilon"
            values = [0.01, 0.02]
            [output]
            dir = "out"
            formats = ["csv"]
            "#,
        )
        .unwrap();
        assert_eq!(c.grid.s_override, Some(12.0));
        assert_eq!(c.solver.preconditioner, Preconditioner::Jacobi);
        assert_eq!(c.output.formats, vec![Format::Csv]);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<RunConfig>("epsilonn = 0.1").is_err());
        let mut c = RunConfig { epsilon: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        c.epsilon = 0.1;
        c.sweep = Some(SweepConfig { variable: SweepVariable::Mass, values: vec![2.0, 1.0] });
        assert!(c.validate().is_err());
        c.grid.n_t = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn band_ranges() {
        assert_eq!(BandRange::parse("1..4").unwrap(), BandRange { first: 1, last: 4 });
        assert_eq!(BandRange::parse("1..=3").unwrap(), BandRange { first: 1, last: 3 });
        assert_eq!(BandRange::parse("2").unwrap(), BandRange { first: 2, last: 2 });
        assert!(BandRange::parse("a..2").is_err());
    }
}
