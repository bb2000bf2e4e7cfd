//! Run configuration: defaults, an optional JSON file, then command-line
//! flags, each layer overriding the previous one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zonal_kriging::classify::VariogramPooling;
use zonal_kriging::dense::DEFAULT_DENSE_LIMIT;
use zonal_kriging::{DriftOrder, WeightPolicy, ZonalConfig};

use crate::error::CliError;

/// Acceptance thresholds used by `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest tolerated |zonal − dense| for single-axis problems.
    pub agreement: f64,
    /// Largest tolerated MSE(zonal) / MSE(dense).
    pub mse_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            agreement: 1e-8,
            mse_ratio: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Secondary JSON output (fit report, variogram models, simulation truth).
    pub report: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Target column; `y` for regression, `class` for classification.
    pub target: Option<String>,
    pub zonal: ZonalConfig,
    pub pooling: VariogramPooling,
    pub dense_limit: usize,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub tolerances: Tolerances,
    /// Shifts of the working sill probed by `validate`.
    pub sill_shifts: Vec<f64>,
    /// Training sizes timed by `validate`; empty skips the scaling table.
    pub scaling_sizes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            model: None,
            queries: None,
            spec: None,
            output: None,
            report: None,
            manifest: None,
            target: None,
            zonal: ZonalConfig::default(),
            pooling: VariogramPooling::default(),
            dense_limit: DEFAULT_DENSE_LIMIT,
            seed: None,
            n: None,
            threads: 0,
            tolerances: Tolerances::default(),
            sill_shifts: vec![1.0, 10.0, 1000.0],
            scaling_sizes: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Rejects settings no command can run with.
    pub fn check(&self) -> Result<(), CliError> {
        let z = &self.zonal;
        if z.n_bins == 0 {
            return Err(CliError::Usage("n_bins must be at least 1".into()));
        }
        if !(z.max_lag_fraction > 0.0 && z.max_lag_fraction <= 1.0) {
            return Err(CliError::Usage(format!(
                "max_lag_fraction must lie in (0, 1], got {}",
                z.max_lag_fraction
            )));
        }
        if self.dense_limit == 0 {
            return Err(CliError::Usage("dense_limit must be positive".into()));
        }
        if self.sill_shifts.iter().any(|s| !s.is_finite()) {
            return Err(CliError::Usage("sill shifts must be finite".into()));
        }
        let t = &self.tolerances;
        if !(t.agreement >= 0.0 && t.mse_ratio > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The path stored under `field`, or a usage error naming the flag.
    pub fn require<'a>(field: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        field.as_deref().ok_or_else(|| {
            CliError::Usage(format!("missing --{flag} (or `{flag}` in the config file)"))
        })
    }

    pub fn target_or(&self, default: &str) -> String {
        self.target.clone().unwrap_or_else(|| default.to_owned())
    }
}

/// Command-line spelling of the drift order.
#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum DriftArg {
    #[value(alias = "0")]
    Constant,
    #[value(alias = "1")]
    Linear,
    #[value(alias = "2")]
    Quadratic,
}

impl From<DriftArg> for DriftOrder {
    fn from(d: DriftArg) -> Self {
        match d {
            DriftArg::Constant => DriftOrder::Constant,
            DriftArg::Linear => DriftOrder::Linear,
            DriftArg::Quadratic => DriftOrder::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum WeightArg {
    Unit,
    InverseStddev,
}

impl From<WeightArg> for WeightPolicy {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Unit => WeightPolicy::Unit,
            WeightArg::InverseStddev => WeightPolicy::InverseStddev,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PoolingArg {
    PooledIncrements,
    AverageOfFits,
}

impl From<PoolingArg> for VariogramPooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::PooledIncrements => VariogramPooling::PooledIncrements,
            PoolingArg::AverageOfFits => VariogramPooling::AverageOfFits,
        }
    }
}
