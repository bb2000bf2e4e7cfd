//! Classification by kriging one-hot class indicators.
//!
//! All indicators are assumed to share one spatial structure up to a scale
//! per class pair, so one set of kriging weights serves every class.

use serde::{Deserialize, Serialize};

use crate::datamodel::LabeledDataset;
use crate::error::{Error, Result};
use crate::variogram::{VariogramKind, VariogramModel};
use crate::zonal::{fit_structure, AxisOrigin, ZonalConfig, ZonalModel, ZonalPredictor};

/// How the shared variogram is obtained from the class indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariogramPooling {
    /// One fit on the increments of all indicators pooled together.
    #[default]
    PooledIncrements,
    /// One fit per class; slopes, nuggets and sills are then averaged.
    AverageOfFits,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub zonal: ZonalConfig,
    pub pooling: VariogramPooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassModel {
    pub class_names: Vec<String>,
    /// Covariance of the indicator pairs over the training set (N denominator).
    pub k: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Shared structure; its training target holds the label index.
    pub zonal: ZonalModel,
}

/// Raw and clipped class estimates at one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrediction {
    pub raw: Vec<f64>,
    pub clipped: Vec<f64>,
    pub class: usize,
    /// Σ_i λ_i of the shared weights; the raw estimates sum to it.
    pub weight_sum: f64,
    /// Estimation variance per class, scaled from the shared one by K_pp.
    pub variance: Vec<f64>,
}

/// One-hot indicator columns, class-major.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    (0..n_classes)
        .map(|p| {
            labels
                .iter()
                .map(|&l| f64::from(u8::from(l == p)))
                .collect()
        })
        .collect()
}

/// Population covariance of the indicator columns.
pub fn indicator_covariance(indicators: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = indicators.first().map_or(0, Vec::len) as f64;
    let means: Vec<f64> = indicators
        .iter()
        .map(|c| c.iter().sum::<f64>() / n)
        .collect();
    let p = indicators.len();
    let mut k = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..=a {
            let c = indicators[a]
                .iter()
                .zip(&indicators[b])
                .map(|(x, y)| (x - means[a]) * (y - means[b]))
                .sum::<f64>()
                / n;
            k[a][b] = c;
            k[b][a] = c;
        }
    }
    k
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn average_models(models: &[VariogramModel]) -> Result<VariogramModel> {
    let m = models.len() as f64;
    let slope = models.iter().map(VariogramModel::slope).sum::<f64>() / m;
    let nugget = models.iter().map(VariogramModel::nugget).sum::<f64>() / m;
    let sill = models.iter().map(|v| v.working_sill).sum::<f64>() / m;
    let kind = match (slope > 0.0, nugget > 0.0) {
        (true, true) => VariogramKind::LinearNugget { slope, nugget },
        (true, false) => VariogramKind::Linear { slope },
        _ => VariogramKind::PureNugget { sill: nugget },
    };
    VariogramModel::with_working_sill(kind, sill)
}

impl ClassModel {
    pub fn fit(ld: &LabeledDataset, cfg: &ClassifierConfig) -> Result<Self> {
        let p = ld.class_names.len();
        let mut counts = vec![0usize; p];
        for &l in &ld.labels {
            counts[l] += 1;
        }
        if p < 2 {
            return Err(Error::EmptyClass(format!(
                "every sample is {:?}; a second class",
                ld.class_names.first().cloned().unwrap_or_default()
            )));
        }
        if let Some(c) = counts.iter().position(|&c| c < 2) {
            return Err(Error::EmptyClass(ld.class_names[c].clone()));
        }
        let indicators = one_hot(&ld.labels, p);
        let k = indicator_covariance(&indicators);
        if let Some(c) = (0..p).find(|&c| !(k[c][c] > 0.0)) {
            return Err(Error::DegenerateIndicatorVariance(
                ld.class_names[c].clone(),
            ));
        }
        let ds = &ld.dataset;
        let (models, origins, weights) = match cfg.pooling {
            VariogramPooling::PooledIncrements => {
                let refs: Vec<&[f64]> = indicators.iter().map(Vec::as_slice).collect();
                fit_structure(ds, &cfg.zonal, &refs)?
            }
            VariogramPooling::AverageOfFits => {
                let per_class = indicators
                    .iter()
                    .map(|ind| fit_structure(ds, &cfg.zonal, &[ind]))
                    .collect::<Result<Vec<_>>>()?;
                let models = (0..ds.d())
                    .map(|s| average_models(&per_class.iter().map(|c| c.0[s]).collect::<Vec<_>>()))
                    .collect::<Result<_>>()?;
                let weights = per_class[0].2.clone();
                (models, vec![AxisOrigin::Given; ds.d()], weights)
            }
        };
        let mut zonal =
            ZonalModel::from_models(ds.clone(), models, weights, cfg.zonal.drift_order)?;
        zonal.axis_origins = origins;
        Ok(Self {
            class_names: ld.class_names.clone(),
            k,
            labels: ld.labels.clone(),
            zonal,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Same classifier with K multiplied by `c`.
    pub fn with_scaled_k(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.k.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.zonal.validate()?;
        let p = self.n_classes();
        if p < 2
            || self.k.len() != p
            || self.k.iter().any(|r| r.len() != p)
            || self.labels.len() != self.zonal.training.n()
            || self.labels.iter().any(|&l| l >= p)
        {
            return Err(Error::UnfittedModel("inconsistent classifier".into()));
        }
        Ok(())
    }

    pub fn predictor(&self) -> Result<ClassPredictor> {
        self.validate()?;
        let targets = one_hot(&self.labels, self.n_classes());
        let mean_diag =
            (0..self.n_classes()).map(|p| self.k[p][p]).sum::<f64>() / self.n_classes() as f64;
        Ok(ClassPredictor {
            inner: ZonalPredictor::with_targets(&self.zonal, targets)?,
            variance_scale: (0..self.n_classes())
                .map(|p| self.k[p][p] / mean_diag)
                .collect(),
        })
    }
}

/// Immutable per-model precomputation; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ClassPredictor {
    inner: ZonalPredictor,
    variance_scale: Vec<f64>,
}

impl ClassPredictor {
    pub fn predict_proba(&self, x0: &[f64]) -> Result<ClassPrediction> {
        let sp = self.inner.predict_shared(x0)?;
        let raw = sp.estimates;
        Ok(ClassPrediction {
            clipped: raw.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            class: argmax(&raw),
            raw,
            weight_sum: sp.diagnostics.weight_sum,
            variance: self
                .variance_scale
                .iter()
                .map(|s| s * sp.variance)
                .collect(),
        })
    }

    pub fn predict_class(&self, x0: &[f64]) -> Result<usize> {
        Ok(self.predict_proba(x0)?.class)
    }

    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<ClassPrediction>> {
        use rayon::prelude::*;
        queries.par_iter().map(|q| self.predict_proba(q)).collect()
    }
}
