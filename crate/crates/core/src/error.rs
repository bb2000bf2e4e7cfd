use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants fall into three families that the CLI maps to distinct exit codes:
/// input/model validation, numerical breakdown (singular or indefinite
/// systems), and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric value in data row {row}, column `{column}`")]
    NonNumericCell { row: usize, column: String },
    #[error("need at least {required} data rows, found {found}")]
    TooFewRows { required: usize, found: usize },
    #[error("axis `{0}` is constant across all samples")]
    ConstantAxis(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("query schema does not match the model: {0}")]
    SchemaMismatch(String),

    #[error("no sample pair on axis {axis} falls inside the lag window")]
    NoPairsInRange { axis: usize },
    #[error(
        "empirical variogram is identically zero; the target is deterministic along this axis"
    )]
    DegenerateFit,

    #[error("duplicate abscissa {0} is not allowed for this variogram regime")]
    DuplicateAbscissa(f64),
    #[error("abscissae are not a regular grid")]
    IrregularGrid,
    #[error("nugget variance must be strictly positive, got {0}")]
    NonPositiveNugget(f64),
    #[error("least-squares normal matrix is singular (collinear design)")]
    SingularNormalMatrix,
    #[error("kriging system is singular (relative pivot {pivot:e})")]
    SingularSystem { pivot: f64 },
    #[error("covariance matrix is not positive definite")]
    SingularCovariance,
    #[error("kriging variance {0:e} is negative beyond round-off")]
    NegativeVariance(f64),
    #[error("dense solver limited to {limit} samples, got {n}")]
    DenseLimitExceeded { n: usize, limit: usize },
    #[error("tau denominator vanishes at sample {0}")]
    ZeroTauDenominator(usize),
    #[error("model is not fitted: {0}")]
    UnfittedModel(String),

    #[error("class `{0}` has fewer than two samples")]
    EmptyClass(String),
    #[error("indicator variance is zero for class `{0}`")]
    DegenerateIndicatorVariance(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by singular or indefinite linear algebra.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularNormalMatrix
                | Error::SingularSystem { .. }
                | Error::SingularCovariance
                | Error::NegativeVariance(_)
        )
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
