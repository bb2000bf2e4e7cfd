//! Synthetic zonal random fields with known structure.
//!
//! Generator: ChaCha8 seeded from the master seed. Axis `s` draws its
//! coordinates from stream `2s` and its residual process from stream `2s + 1`,
//! so editing one axis never perturbs another axis's draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{Error, Result};

/// Residual process along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResidualKind {
    /// Brownian motion with semivariogram slope·|h|.
    Brownian { slope: f64 },
    /// Independent Gaussian values of variance `sill`.
    White { sill: f64 },
    /// Stationary Gaussian process with covariance sill·exp(−|h|/range).
    ShortRange { sill: f64, range: f64 },
}

impl ResidualKind {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Brownian { slope } => slope >= 0.0 && slope.is_finite(),
            Self::White { sill } => sill >= 0.0 && sill.is_finite(),
            Self::ShortRange { sill, range } => {
                sill >= 0.0 && sill.is_finite() && range > 0.0 && range.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid residual parameters {self:?}"
            )))
        }
    }
}

fn default_weight() -> f64 {
    1.0
}

fn default_box() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub residual: ResidualKind,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Sampling interval [lo, hi].
    #[serde(default = "default_box")]
    pub bounds: [f64; 2],
}

impl AxisSpec {
    pub fn new(residual: ResidualKind) -> Self {
        Self {
            name: None,
            residual,
            a1: 0.0,
            a2: 0.0,
            weight: 1.0,
            bounds: default_box(),
        }
    }
}

/// y = a0 + Σ_s w_s (a1_s x_s + a2_s x_s² + z_s(x_s)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n: usize,
    #[serde(default)]
    pub a0: f64,
    pub axes: Vec<AxisSpec>,
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target_name: String,
}

fn default_target() -> String {
    "y".into()
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.axes.is_empty() {
            return Err(Error::InvalidInput(
                "a simulation needs n ≥ 2 and at least one axis".into(),
            ));
        }
        for a in &self.axes {
            a.residual.validate()?;
            let [lo, hi] = a.bounds;
            if !(lo.is_finite() && hi.is_finite() && lo < hi)
                || !(a.weight > 0.0 && a.weight.is_finite())
            {
                return Err(Error::InvalidInput(format!(
                    "invalid axis specification {a:?}"
                )));
            }
            if !(self.a0.is_finite() && a.a1.is_finite() && a.a2.is_finite()) {
                return Err(Error::InvalidInput(
                    "drift coefficients must be finite".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn axis_names(&self) -> Vec<String> {
        self.axes
            .iter()
            .enumerate()
            .map(|(s, a)| a.name.clone().unwrap_or_else(|| format!("x{}", s + 1)))
            .collect()
    }
}

/// A simulated dataset with its ground-truth decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub dataset: Dataset,
    /// Drift surface at each sample.
    pub drift: Vec<f64>,
    /// Unweighted residual z_s(x_s) per axis and sample.
    pub residuals: Vec<Vec<f64>>,
}

impl Simulation {
    /// First `n_train` samples for training, the rest held out.
    pub fn split(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        let n = self.dataset.n();
        if n_train < 2 || n_train + 2 > n {
            return Err(Error::InvalidInput(format!(
                "cannot split {n} samples at {n_train}"
            )));
        }
        let train: Vec<usize> = (0..n_train).collect();
        let test: Vec<usize> = (n_train..n).collect();
        Ok((self.dataset.subset(&train)?, self.dataset.subset(&test)?))
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Residual values at sorted abscissae, drawn from `rng`.
pub fn simulate_axis_with(
    kind: ResidualKind,
    xs: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    kind.validate()?;
    if xs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("abscissae must be sorted".into()));
    }
    let mut out = Vec::with_capacity(xs.len());
    match kind {
        ResidualKind::Brownian { slope } => {
            let mut z = 0.0;
            for (k, &x) in xs.iter().enumerate() {
                if k > 0 {
                    // Increment variance 2·slope·Δx gives semivariogram slope·|h|.
                    z += (2.0 * slope * (x - xs[k - 1])).sqrt() * normal(rng);
                }
                out.push(z);
            }
        }
        ResidualKind::White { sill } => out.extend(xs.iter().map(|_| sill.sqrt() * normal(rng))),
        ResidualKind::ShortRange { sill, range } => {
            let mut z = sill.sqrt() * normal(rng);
            for (k, &x) in xs.iter().enumerate() {
                if k > 0 {
                    let rho = (-(x - xs[k - 1]) / range).exp();
                    z = rho * z + (sill * (1.0 - rho * rho)).sqrt() * normal(rng);
                }
                out.push(z);
            }
        }
    }
    Ok(out)
}

pub fn simulate_axis(kind: ResidualKind, xs: &[f64], seed: u64) -> Result<Vec<f64>> {
    simulate_axis_with(kind, xs, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn simulate_zonal(spec: &SimSpec) -> Result<Simulation> {
    spec.validate()?;
    let n = spec.n;
    let mut columns = Vec::with_capacity(spec.axes.len());
    let mut residuals = Vec::with_capacity(spec.axes.len());
    let mut drift = vec![spec.a0; n];
    let mut y = vec![spec.a0; n];
    for (s, axis) in spec.axes.iter().enumerate() {
        let [lo, hi] = axis.bounds;
        let mut coords = stream(spec.seed, 2 * s as u64);
        let xs: Vec<f64> = (0..n).map(|_| coords.random_range(lo..hi)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
        let sorted: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
        let z_sorted = simulate_axis_with(
            axis.residual,
            &sorted,
            &mut stream(spec.seed, 2 * s as u64 + 1),
        )?;
        let mut z = vec![0.0; n];
        for (k, &i) in order.iter().enumerate() {
            z[i] = z_sorted[k];
        }
        for i in 0..n {
            let trend = axis.a1 * xs[i] + axis.a2 * xs[i] * xs[i];
            drift[i] += axis.weight * trend;
            y[i] += axis.weight * (trend + z[i]);
        }
        columns.push(xs);
        residuals.push(z);
    }
    let dataset = Dataset::new(spec.axis_names(), spec.target_name.clone(), columns, y)?;
    Ok(Simulation {
        dataset,
        drift,
        residuals,
    })
}
