//! d-dimensional prediction assembled from d one-dimensional krigings.
//!
//! Each axis is kriged on its own coordinate. Per-sample weights from the
//! axes are averaged with weights proportional to τ_s(j), the total working
//! covariance that sample j carries on axis s. Nothing of size N×N is ever
//! formed: every per-query quantity is a sparse vector plus a multiple of the
//! uniform vector, and all sample-dependent sums are precomputed once.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{compute_axis_weights, AxisWeights, Dataset, WeightPolicy};
use crate::dense::{Basis, ZonalCovariance};
use crate::error::{Error, Result};
use crate::kriging1d::kriger::AxisKriger;
use crate::kriging1d::{DriftCoefficients, DriftMethod, DriftOrder, Regime};
use crate::variogram::{
    fit_variogram, pooled_marginal_variogram, FitConfig, FitReport, VariogramKind, VariogramModel,
};

pub const FORMAT_VERSION: u32 = 1;

/// Options for fitting a zonal model from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZonalConfig {
    pub drift_order: DriftOrder,
    pub weight_policy: WeightPolicy,
    pub n_bins: usize,
    pub max_lag_fraction: f64,
    pub fit: FitConfig,
    /// Per-axis structures that bypass fitting, keyed by axis name. Given in
    /// the units of the weighted axis contribution w_s²γ_s.
    pub overrides: BTreeMap<String, VariogramKind>,
}

impl Default for ZonalConfig {
    fn default() -> Self {
        Self {
            drift_order: DriftOrder::Linear,
            weight_policy: WeightPolicy::Unit,
            n_bins: 20,
            max_lag_fraction: 0.5,
            fit: FitConfig::default(),
            overrides: BTreeMap::new(),
        }
    }
}

/// How an axis model was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AxisOrigin {
    Fitted(FitReport),
    /// Every empirical semivariance was zero; a negligible pure nugget stands in.
    Degenerate,
    Override,
    Given,
}

/// A fitted zonal structure together with the data it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZonalModel {
    pub format_version: u32,
    /// γ_s per axis; the axis contributes w_s²γ_s to the zonal variogram.
    pub axis_models: Vec<VariogramModel>,
    pub axis_weights: AxisWeights,
    pub drift_order: DriftOrder,
    /// One-dimensional drift of the target along each axis.
    pub axis_drifts: Vec<DriftCoefficients>,
    pub axis_origins: Vec<AxisOrigin>,
    pub training: Dataset,
}

fn distinct_count(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn axis_kriger(xs: &[f64], effective: VariogramModel, order: DriftOrder) -> Result<AxisKriger> {
    AxisKriger::new(xs, effective, order.capped(distinct_count(xs)))
}

/// Per-axis structures fitted to the increments of `targets` pooled
/// together, divided by w_s² so that the weighted contribution reproduces
/// the fitted marginal structure.
pub(crate) fn fit_structure(
    ds: &Dataset,
    cfg: &ZonalConfig,
    targets: &[&[f64]],
) -> Result<(Vec<VariogramModel>, Vec<AxisOrigin>, AxisWeights)> {
    for name in cfg.overrides.keys() {
        if !ds.axis_names().contains(name) {
            return Err(Error::InvalidInput(format!(
                "override for unknown axis {name:?}"
            )));
        }
    }
    let weights = compute_axis_weights(ds, cfg.weight_policy);
    let fitted: Vec<(VariogramModel, AxisOrigin)> = (0..ds.d())
        .into_par_iter()
        .map(|s| {
            let ev = pooled_marginal_variogram(
                ds.axis(s),
                targets,
                s,
                cfg.n_bins,
                cfg.max_lag_fraction,
            )?;
            if let Some(kind) = cfg.overrides.get(&ds.axis_names()[s]) {
                return Ok((
                    VariogramModel::new(*kind, ev.axis_range)?,
                    AxisOrigin::Override,
                ));
            }
            match fit_variogram(&ev, &cfg.fit) {
                Ok((m, report)) => Ok((m, AxisOrigin::Fitted(report))),
                Err(Error::DegenerateFit) => Ok((
                    VariogramModel::pure_nugget(f64::EPSILON)?,
                    AxisOrigin::Degenerate,
                )),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let (models, origins) = fitted
        .into_iter()
        .enumerate()
        .map(|(s, (m, o))| {
            let w = weights.get(s);
            (m.scaled(1.0 / (w * w)), o)
        })
        .unzip();
    Ok((models, origins, weights))
}

impl ZonalModel {
    /// Fits one marginal variogram per axis and divides it by w_s², so that
    /// the weighted contribution reproduces the fitted marginal structure.
    pub fn fit(ds: &Dataset, cfg: &ZonalConfig) -> Result<Self> {
        let (models, origins, weights) = fit_structure(ds, cfg, &[ds.y()])?;
        let mut zm = Self::from_models(ds.clone(), models, weights, cfg.drift_order)?;
        zm.axis_origins = origins;
        Ok(zm)
    }

    /// Builds a model from known per-axis structures (no fitting).
    pub fn from_models(
        training: Dataset,
        axis_models: Vec<VariogramModel>,
        axis_weights: AxisWeights,
        drift_order: DriftOrder,
    ) -> Result<Self> {
        let cov = ZonalCovariance::new(axis_models, axis_weights)?;
        if cov.d() != training.d() {
            return Err(Error::SchemaMismatch(format!(
                "{} axis models for a {}-axis dataset",
                cov.d(),
                training.d()
            )));
        }
        let axis_drifts = (0..training.d())
            .into_par_iter()
            .map(|s| {
                let k = axis_kriger(training.axis(s), cov.effective(s), drift_order)?;
                Ok(DriftCoefficients {
                    order: k.order,
                    origin: k.origin,
                    a: k.coefficients(training.y()),
                    cov: k.cov,
                    method: k.method,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            axis_origins: vec![AxisOrigin::Given; cov.d()],
            axis_models: cov.models,
            axis_weights: cov.weights,
            drift_order,
            axis_drifts,
            training,
        })
    }

    pub fn d(&self) -> usize {
        self.axis_models.len()
    }

    pub fn covariance(&self) -> ZonalCovariance {
        ZonalCovariance {
            models: self.axis_models.clone(),
            weights: self.axis_weights.clone(),
        }
    }

    /// Axis model with its weight folded in.
    pub fn effective_model(&self, s: usize) -> VariogramModel {
        let w = self.axis_weights.get(s);
        self.axis_models[s].scaled(w * w)
    }

    /// Same model with each weighted working sill w_s²S_s shifted by `delta`.
    pub fn with_sill_shift(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.axis_models = self.covariance().with_sill_shift(delta).models;
        out
    }

    /// Structural checks for a model that may have come from disk.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let d = self.training.d();
        if self.axis_models.len() != d
            || self.axis_weights.len() != d
            || self.axis_drifts.len() != d
            || self.axis_origins.len() != d
        {
            return Err(Error::UnfittedModel(format!(
                "model does not describe all {d} axes"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let zm: Self = serde_json::from_str(text)?;
        zm.validate()?;
        Ok(zm)
    }

    pub fn predictor(&self) -> Result<ZonalPredictor> {
        ZonalPredictor::new(self)
    }
}

/// τ_s(j) = Σ_i w_s² σ_s(i, j), stored axis-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TauWeights {
    pub tau: Vec<Vec<f64>>,
}

impl TauWeights {
    pub fn d(&self) -> usize {
        self.tau.len()
    }

    pub fn n(&self) -> usize {
        self.tau.first().map_or(0, Vec::len)
    }

    /// π_s(j) = τ_s(j) / Σ_t τ_t(j).
    pub fn shares(&self) -> Result<Vec<Vec<f64>>> {
        let totals = self.totals()?;
        Ok(self
            .tau
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&totals)
                    .map(|(t, total)| t / total)
                    .collect()
            })
            .collect())
    }

    fn totals(&self) -> Result<Vec<f64>> {
        (0..self.n())
            .map(|j| {
                let total: f64 = self.tau.iter().map(|row| row[j]).sum();
                if total > 0.0 && total.is_finite() {
                    Ok(total)
                } else {
                    Err(Error::ZeroTauDenominator(j))
                }
            })
            .collect()
    }
}

fn tau_row(k: &AxisKriger) -> Vec<f64> {
    let n = k.n();
    let total = n as f64 * k.model.working_sill;
    let mut row = vec![0.0; n];
    for pos in 0..n {
        row[k.original(pos)] = total - k.gamma_row_sum(pos);
    }
    row
}

/// τ for every axis and sample, from sorted prefix sums in O(d·N log N).
pub fn compute_tau(ds: &Dataset, zm: &ZonalModel) -> Result<TauWeights> {
    zm.validate()?;
    if ds.d() != zm.d() {
        return Err(Error::SchemaMismatch(format!(
            "dataset has {} axes, model {}",
            ds.d(),
            zm.d()
        )));
    }
    let tau = (0..zm.d())
        .into_par_iter()
        .map(|s| {
            Ok(tau_row(&axis_kriger(
                ds.axis(s),
                zm.effective_model(s),
                zm.drift_order,
            )?))
        })
        .collect::<Result<_>>()?;
    Ok(TauWeights { tau })
}

fn check_shape(per_axis: &[Vec<f64>], tau: &TauWeights) -> Result<()> {
    if per_axis.len() != tau.d() || per_axis.iter().any(|v| v.len() != tau.n()) {
        return Err(Error::InvalidInput(
            "per-axis weights do not match τ dimensions".into(),
        ));
    }
    Ok(())
}

/// ν*_j = Σ_s ν_s(j) τ_s(j) / Σ_s τ_s(j), with no renormalization.
pub fn combine_residue_weights(per_axis_nu: &[Vec<f64>], tau: &TauWeights) -> Result<Vec<f64>> {
    check_shape(per_axis_nu, tau)?;
    let shares = tau.shares()?;
    Ok((0..tau.n())
        .map(|j| (0..tau.d()).map(|s| shares[s][j] * per_axis_nu[s][j]).sum())
        .collect())
}

/// Combined drift weights, renormalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedDrift {
    pub mu: Vec<f64>,
    /// |Σμ − 1| before renormalization.
    pub deficit: f64,
}

pub fn combine_drift_weights(per_axis_mu: &[Vec<f64>], tau: &TauWeights) -> Result<CombinedDrift> {
    check_shape(per_axis_mu, tau)?;
    for (s, mu) in per_axis_mu.iter().enumerate() {
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "axis {s} drift weights sum to {sum}"
            )));
        }
    }
    let mut mu = combine_residue_weights(per_axis_mu, tau)?;
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= total);
    Ok(CombinedDrift {
        mu,
        deficit: (total - 1.0).abs(),
    })
}

/// Σ_s w_s² γ_s(|dx_s|).
pub fn zonal_variogram(zm: &ZonalModel, dx: &[f64]) -> Result<f64> {
    if dx.len() != zm.d() {
        return Err(Error::InvalidInput(format!(
            "displacement must have {} entries",
            zm.d()
        )));
    }
    Ok(zm.covariance().gamma(dx))
}

/// Independence score of one axis: d − Σ_t |cor(s, t)|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceScore {
    pub axis: usize,
    pub name: String,
    pub score: f64,
}

/// Axes ordered from most to least independent; ties keep axis order.
pub fn rank_independence(ds: &Dataset) -> Result<Vec<IndependenceScore>> {
    if ds.n() < 3 {
        return Err(Error::TooFewRows {
            required: 3,
            found: ds.n(),
        });
    }
    let d = ds.d();
    let centred: Vec<(Vec<f64>, f64)> = (0..d)
        .map(|s| {
            let col = ds.axis(s);
            let m = crate::datamodel::mean(col);
            let c: Vec<f64> = col.iter().map(|v| v - m).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            (c, norm)
        })
        .collect();
    let cor = |a: usize, b: usize| {
        if a == b {
            return 1.0;
        }
        let dot: f64 = centred[a]
            .0
            .iter()
            .zip(&centred[b].0)
            .map(|(x, y)| x * y)
            .sum();
        (dot / (centred[a].1 * centred[b].1)).abs().min(1.0)
    };
    let mut out: Vec<IndependenceScore> = (0..d)
        .map(|s| IndependenceScore {
            axis: s,
            name: ds.axis_names()[s].clone(),
            score: d as f64 - (0..d).map(|t| cor(s, t)).sum::<f64>(),
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.axis.cmp(&b.axis)));
    Ok(out)
}

/// Quality flags of one prediction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionDiagnostics {
    /// |Σμ − 1| of the combined drift weights before renormalization.
    pub drift_weight_deficit: f64,
    /// Σ_j ν*_j.
    pub residue_weight_sum: f64,
    /// Σ_j λ_j of the complete estimator.
    pub weight_sum: f64,
    /// Some axis used the exact increments solve on an irregular grid in
    /// place of a closed form.
    pub irregular_fallback: bool,
    /// Axes on which the query lies outside the training range.
    pub extrapolated_axes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub estimate: f64,
    pub variance: f64,
    /// Drift estimate m*(x0).
    pub drift: f64,
    /// Per-axis share of the residue correction; drift + Σ components = estimate.
    pub components: Vec<f64>,
    pub diagnostics: PredictionDiagnostics,
}

/// Predictions of several targets sharing one set of weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedPrediction {
    pub estimates: Vec<f64>,
    pub drifts: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub variance: f64,
    pub diagnostics: PredictionDiagnostics,
}

/// Explicit per-sample weights at one query (O(d·N); for inspection).
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalWeights {
    pub nu_star: Vec<f64>,
    /// Renormalized combined drift weights.
    pub mu: Vec<f64>,
    pub drift_weight_deficit: f64,
}

/// Target-dependent precomputation.
#[derive(Debug, Clone)]
struct TargetState {
    /// Σ_j π_s(j) λ_{s,u}(j) y_j per axis and coefficient.
    y_sums: Vec<[f64; 3]>,
    /// Joint least-squares drift coefficients in the dense basis.
    beta: Vec<f64>,
    /// y_j − m*(x_j), original order.
    residues: Vec<f64>,
    /// Σ_j π_s(j) r_j / N per axis.
    residue_means: Vec<f64>,
}

/// Immutable, thread-safe precomputation for repeated queries.
#[derive(Debug, Clone)]
pub struct ZonalPredictor {
    d: usize,
    n: usize,
    axes: Vec<AxisKriger>,
    /// π_s(j) axis-major, original order.
    shares: Vec<Vec<f64>>,
    /// Σ_j π_s(j) / N per axis.
    share_means: Vec<f64>,
    basis: Basis,
    /// Σ_j π_s(j) λ_{s,u}(j) per axis and coefficient.
    z: Vec<[f64; 3]>,
    /// Σ_j π_s(j) λ_{s,u}(j) f(x_j) per axis and coefficient.
    v: Vec<[Vec<f64>; 3]>,
    /// Last entry is the constant target, used for Σλ.
    targets: Vec<TargetState>,
    irregular_fallback: bool,
}

impl ZonalPredictor {
    pub fn new(zm: &ZonalModel) -> Result<Self> {
        Self::with_targets(zm, vec![zm.training.y().to_vec()])
    }

    /// Several targets at the same sample locations share every weight.
    pub fn with_targets(zm: &ZonalModel, targets: Vec<Vec<f64>>) -> Result<Self> {
        zm.validate()?;
        let ds = &zm.training;
        let (n, d) = (ds.n(), ds.d());
        if targets.is_empty() || targets.iter().any(|t| t.len() != n) {
            return Err(Error::InvalidInput(format!(
                "every target needs {n} values"
            )));
        }
        let axes: Vec<AxisKriger> = (0..d)
            .into_par_iter()
            .map(|s| axis_kriger(ds.axis(s), zm.effective_model(s), zm.drift_order))
            .collect::<Result<_>>()?;
        let tau = TauWeights {
            tau: axes.par_iter().map(tau_row).collect(),
        };
        let shares = tau.shares()?;
        drop(tau);
        let share_means = shares
            .iter()
            .map(|p| p.iter().sum::<f64>() / n as f64)
            .collect();
        let basis = Basis::new(ds, zm.drift_order);
        let m = basis.len();

        let (gram, moments) = joint_normal_equations(ds, &basis, &targets);
        let pinv = pseudo_inverse(gram)?;

        let mut z = vec![[0.0; 3]; d];
        let mut v = vec![[vec![0.0; m], vec![0.0; m], vec![0.0; m]]; d];
        let mut y_sums = vec![vec![[0.0; 3]; d]; targets.len() + 1];
        let mut point = vec![0.0; d];
        for s in 0..d {
            let k = &axes[s];
            for pos in 0..n {
                let j = k.original(pos);
                for (t, p) in point.iter_mut().enumerate() {
                    *p = ds.x(j, t);
                }
                let f = basis.eval(&point);
                for u in 0..=k.order.degree() {
                    let w = shares[s][j] * k.coef_weight(u, pos);
                    z[s][u] += w;
                    for (acc, fv) in v[s][u].iter_mut().zip(&f) {
                        *acc += w * fv;
                    }
                    for (sums, y) in y_sums
                        .iter_mut()
                        .zip(targets.iter().map(|t| t[j]).chain([1.0]))
                    {
                        sums[s][u] += w * y;
                    }
                }
            }
        }

        let mut pred = Self {
            d,
            n,
            axes,
            shares,
            share_means,
            basis,
            z,
            v,
            targets: Vec::new(),
            irregular_fallback: false,
        };
        pred.irregular_fallback = pred
            .axes
            .iter()
            .any(|k| k.method == DriftMethod::IncrementsGls && k.regime != Regime::Linear);

        let all_targets: Vec<Vec<f64>> = targets.into_iter().chain([vec![1.0; n]]).collect();
        let betas: Vec<Vec<f64>> = moments
            .iter()
            .map(|mom| {
                (&pinv * DVector::from_column_slice(mom))
                    .iter()
                    .copied()
                    .collect()
            })
            .collect();
        let states = all_targets
            .into_par_iter()
            .zip(betas)
            .zip(y_sums)
            .map(|((y, beta), y_sums)| {
                let residues: Vec<f64> = (0..n)
                    .map(|j| {
                        let x = ds.point(j);
                        let bases: Vec<[f64; 3]> =
                            (0..d).map(|s| pred.axes[s].basis_at(x[s])).collect();
                        y[j] - pred.drift_at(&x, &bases, &y_sums, &beta).0
                    })
                    .collect();
                let residue_means = pred
                    .shares
                    .iter()
                    .map(|p| p.iter().zip(&residues).map(|(a, r)| a * r).sum::<f64>() / n as f64)
                    .collect();
                TargetState {
                    y_sums,
                    beta,
                    residues,
                    residue_means,
                }
            })
            .collect();
        pred.targets = states;
        Ok(pred)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of user targets (the internal constant target excluded).
    pub fn n_targets(&self) -> usize {
        self.targets.len() - 1
    }

    /// Combined drift m*(x) and the pre-renormalization weight sum.
    ///
    /// The τ-averaged drift weights, renormalized, are exact only on the
    /// per-axis drift spaces; the remaining bias on the joint additive drift
    /// space is removed with a least-squares coefficient fit.
    fn drift_at(
        &self,
        x: &[f64],
        bases: &[[f64; 3]],
        y_sums: &[[f64; 3]],
        beta: &[f64],
    ) -> (f64, f64) {
        let mut total = 0.0;
        let mut weighted_y = 0.0;
        let mut fitted = vec![0.0; beta.len()];
        for s in 0..self.d {
            for u in 0..=self.axes[s].order.degree() {
                let b = bases[s][u];
                total += b * self.z[s][u];
                weighted_y += b * y_sums[s][u];
                for (acc, vv) in fitted.iter_mut().zip(&self.v[s][u]) {
                    *acc += b * vv;
                }
            }
        }
        let f = self.basis.eval(x);
        let correction: f64 = f
            .iter()
            .zip(&fitted)
            .zip(beta)
            .map(|((fv, g), b)| (fv - g / total) * b)
            .sum();
        (weighted_y / total + correction, total)
    }

    fn check_query(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.d || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "query must have {} finite coordinates",
                self.d
            )));
        }
        Ok(())
    }

    /// Estimates of every target at `x0` with one set of weights.
    pub fn predict_shared(&self, x0: &[f64]) -> Result<SharedPrediction> {
        self.check_query(x0)?;
        let evals = self
            .axes
            .iter()
            .zip(x0)
            .map(|(k, &x)| k.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        let bases: Vec<[f64; 3]> = evals.iter().map(|e| e.basis).collect();
        let mut residue_weight_sum = 0.0;
        for (s, e) in evals.iter().enumerate() {
            let k = &self.axes[s];
            residue_weight_sum += e.residue.uniform * self.share_means[s]
                + e.residue
                    .sparse
                    .iter()
                    .map(|&(pos, w)| self.shares[s][k.original(pos)] * w)
                    .sum::<f64>();
        }
        let mut drifts = Vec::with_capacity(self.targets.len());
        let mut components = Vec::with_capacity(self.targets.len());
        let mut estimates = Vec::with_capacity(self.targets.len());
        let mut total = 1.0;
        for t in &self.targets {
            let (m, tot) = self.drift_at(x0, &bases, &t.y_sums, &t.beta);
            total = tot;
            let comps: Vec<f64> = evals
                .iter()
                .enumerate()
                .map(|(s, e)| {
                    let k = &self.axes[s];
                    e.residue
                        .sparse
                        .iter()
                        .map(|&(pos, w)| {
                            let j = k.original(pos);
                            self.shares[s][j] * w * t.residues[j]
                        })
                        .sum::<f64>()
                        + e.residue.uniform * t.residue_means[s]
                })
                .collect();
            estimates.push(m + comps.iter().sum::<f64>());
            drifts.push(m);
            components.push(comps);
        }
        let weight_sum = estimates.pop().expect("constant target");
        drifts.pop();
        components.pop();
        Ok(SharedPrediction {
            estimates,
            drifts,
            components,
            variance: evals.iter().map(|e| e.variance).sum(),
            diagnostics: PredictionDiagnostics {
                drift_weight_deficit: (total - 1.0).abs(),
                residue_weight_sum,
                weight_sum,
                irregular_fallback: self.irregular_fallback,
                extrapolated_axes: evals
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.residue.extrapolated)
                    .map(|(s, _)| s)
                    .collect(),
            },
        })
    }

    /// Prediction of the first target.
    pub fn predict(&self, x0: &[f64]) -> Result<Prediction> {
        let mut sp = self.predict_shared(x0)?;
        Ok(Prediction {
            estimate: sp.estimates[0],
            variance: sp.variance,
            drift: sp.drifts[0],
            components: sp.components.swap_remove(0),
            diagnostics: sp.diagnostics,
        })
    }

    /// Parallel over queries; output order follows input order.
    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        queries.par_iter().map(|q| self.predict(q)).collect()
    }

    /// Explicit ν* and combined μ at `x0`.
    pub fn weights(&self, x0: &[f64]) -> Result<ZonalWeights> {
        self.check_query(x0)?;
        let mut nu_star = vec![0.0; self.n];
        let mut mu = vec![0.0; self.n];
        for (s, k) in self.axes.iter().enumerate() {
            let e = k.evaluate(x0[s])?;
            let uniform = e.residue.uniform / self.n as f64;
            for pos in 0..self.n {
                let j = k.original(pos);
                nu_star[j] += self.shares[s][j] * uniform;
                let mu_s: f64 = (0..=k.order.degree())
                    .map(|u| e.basis[u] * k.coef_weight(u, pos))
                    .sum();
                mu[j] += self.shares[s][j] * mu_s;
            }
            for &(pos, w) in &e.residue.sparse {
                let j = k.original(pos);
                nu_star[j] += self.shares[s][j] * w;
            }
        }
        let total: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= total);
        Ok(ZonalWeights {
            nu_star,
            mu,
            drift_weight_deficit: (total - 1.0).abs(),
        })
    }
}

/// Normal matrix FᵀF and the moments Fᵀy of each target plus the constant.
fn joint_normal_equations(
    ds: &Dataset,
    basis: &Basis,
    targets: &[Vec<f64>],
) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    let m = basis.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut moments = vec![vec![0.0; m]; targets.len() + 1];
    for j in 0..ds.n() {
        let f = basis.eval(&ds.point(j));
        for a in 0..m {
            for b in 0..=a {
                gram[(a, b)] += f[a] * f[b];
            }
        }
        for (mom, y) in moments
            .iter_mut()
            .zip(targets.iter().map(|t| t[j]).chain([1.0]))
        {
            for (acc, fv) in mom.iter_mut().zip(&f) {
                *acc += fv * y;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    (gram, moments)
}

/// Minimum-norm inverse; rank deficiency (for instance two identical axes)
/// is tolerated.
fn pseudo_inverse(gram: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = gram.svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(1e-12 * smax.max(f64::MIN_POSITIVE))
        .map_err(|_| Error::SingularNormalMatrix)
}
