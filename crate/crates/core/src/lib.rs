//! Universal kriging under zonal anisotropy.
//!
//! A d-dimensional prediction is assembled from d one-dimensional krigings
//! (one per axis) whose weights are recombined without forming any N×N
//! system. A dense exact solver is kept for small problems and as an oracle.

// Index loops mirror the matrix algebra; negated comparisons let NaN fail checks.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod classify;
pub mod datamodel;
pub mod dense;
pub mod error;
pub mod kriging1d;
pub mod simulate;
pub mod variogram;
pub mod zonal;

pub use classify::{ClassModel, ClassPrediction, ClassPredictor, ClassifierConfig};
pub use datamodel::{AxisWeights, Dataset, LabeledDataset, QueryTable, WeightPolicy};
pub use dense::{DenseKriging, ZonalCovariance};
pub use error::{Error, Result};
pub use kriging1d::{AxisKrigeResult, DriftCoefficients, DriftOrder, Regime};
pub use simulate::{simulate_zonal, AxisSpec, ResidualKind, SimSpec, Simulation};
pub use variogram::{EmpiricalVariogram, FitConfig, VariogramKind, VariogramModel};
pub use zonal::{Prediction, ZonalConfig, ZonalModel, ZonalPredictor};
