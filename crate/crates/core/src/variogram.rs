//! Marginal variograms: pair binning along one axis and selection of one of
//! three 1-D structures (linear, linear with nugget, pure nugget).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{Error, Result};

/// The working sill of an unbounded model is this multiple of γ at the
/// largest pairwise lag of the axis.
pub const WORKING_SILL_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariogramKind {
    /// γ(h) = C·h
    Linear { slope: f64 },
    /// γ(h) = C0 + C·h for h > 0
    LinearNugget { slope: f64, nugget: f64 },
    /// γ(h) = C for h > 0; no spatial correlation at the sampling scale.
    PureNugget { sill: f64 },
}

impl VariogramKind {
    pub fn name(&self) -> &'static str {
        match self {
            VariogramKind::Linear { .. } => "linear",
            VariogramKind::LinearNugget { .. } => "linear_nugget",
            VariogramKind::PureNugget { .. } => "pure_nugget",
        }
    }
}

/// A fitted 1-D variogram together with the working sill S that turns it
/// into a (pseudo-)covariance σ(h) = S − γ(h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    #[serde(flatten)]
    pub kind: VariogramKind,
    pub working_sill: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl VariogramModel {
    /// Builds a model with the default working sill for an axis whose
    /// largest pairwise lag is `max_lag`.
    pub fn new(kind: VariogramKind, max_lag: f64) -> Result<Self> {
        Self::validate_kind(&kind)?;
        let sill = match kind {
            VariogramKind::PureNugget { sill } => sill,
            _ => WORKING_SILL_FACTOR * Self::gamma_of(&kind, max_lag.max(0.0)),
        };
        Self::with_working_sill(kind, sill)
    }

    pub fn with_working_sill(kind: VariogramKind, working_sill: f64) -> Result<Self> {
        Self::validate_kind(&kind)?;
        positive("working sill", working_sill)?;
        Ok(Self { kind, working_sill })
    }

    pub fn linear(slope: f64, max_lag: f64) -> Result<Self> {
        Self::new(VariogramKind::Linear { slope }, max_lag)
    }

    pub fn linear_nugget(slope: f64, nugget: f64, max_lag: f64) -> Result<Self> {
        Self::new(VariogramKind::LinearNugget { slope, nugget }, max_lag)
    }

    pub fn pure_nugget(sill: f64) -> Result<Self> {
        Self::new(VariogramKind::PureNugget { sill }, 0.0)
    }

    fn validate_kind(kind: &VariogramKind) -> Result<()> {
        match *kind {
            VariogramKind::Linear { slope } => positive("slope", slope),
            VariogramKind::LinearNugget { slope, nugget } => {
                positive("slope", slope)?;
                if !(nugget.is_finite() && nugget > 0.0) {
                    return Err(Error::NonPositiveNugget(nugget));
                }
                Ok(())
            }
            VariogramKind::PureNugget { sill } => positive("sill", sill),
        }
    }

    fn gamma_of(kind: &VariogramKind, h: f64) -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        match *kind {
            VariogramKind::Linear { slope } => slope * h,
            VariogramKind::LinearNugget { slope, nugget } => nugget + slope * h,
            VariogramKind::PureNugget { sill } => sill,
        }
    }

    /// γ(h), with γ(0) = 0.
    pub fn gamma(&self, h: f64) -> f64 {
        Self::gamma_of(&self.kind, h.abs())
    }

    /// σ(h) = S − γ(h); σ(0) = S.
    pub fn sigma(&self, h: f64) -> f64 {
        self.working_sill - self.gamma(h)
    }

    /// γ between two distinct samples: the nugget applies even at zero lag.
    pub fn gamma_distinct(&self, h: f64) -> f64 {
        let h = h.abs();
        match self.kind {
            VariogramKind::Linear { slope } => slope * h,
            VariogramKind::LinearNugget { slope, nugget } => nugget + slope * h,
            VariogramKind::PureNugget { sill } => sill,
        }
    }

    /// Covariance between two distinct samples at lag `h`.
    pub fn sigma_distinct(&self, h: f64) -> f64 {
        self.working_sill - self.gamma_distinct(h)
    }

    /// Linear part of the structure (zero for a pure nugget).
    pub fn slope(&self) -> f64 {
        match self.kind {
            VariogramKind::Linear { slope } | VariogramKind::LinearNugget { slope, .. } => slope,
            VariogramKind::PureNugget { .. } => 0.0,
        }
    }

    /// Jump at the origin (the whole sill for a pure nugget).
    pub fn nugget(&self) -> f64 {
        match self.kind {
            VariogramKind::Linear { .. } => 0.0,
            VariogramKind::LinearNugget { nugget, .. } => nugget,
            VariogramKind::PureNugget { sill } => sill,
        }
    }

    /// Multiplies γ and the working sill by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        let kind = match self.kind {
            VariogramKind::Linear { slope } => VariogramKind::Linear {
                slope: slope * factor,
            },
            VariogramKind::LinearNugget { slope, nugget } => VariogramKind::LinearNugget {
                slope: slope * factor,
                nugget: nugget * factor,
            },
            VariogramKind::PureNugget { sill } => VariogramKind::PureNugget {
                sill: sill * factor,
            },
        };
        Self {
            kind,
            working_sill: self.working_sill * factor,
        }
    }

    /// Same structure with the working sill shifted by `delta`.
    pub fn with_sill_shift(&self, delta: f64) -> Self {
        Self {
            kind: self.kind,
            working_sill: self.working_sill + delta,
        }
    }
}

/// Half mean squared increment of the target, binned by lag along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub axis: usize,
    /// Bin centers, strictly increasing.
    pub lags: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub counts: Vec<u64>,
    /// Largest pairwise lag on the axis (its range).
    pub axis_range: f64,
}

impl EmpiricalVariogram {
    /// Indices of the non-empty bins.
    pub fn non_empty(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.lags.len()).filter(|&k| self.counts[k] > 0)
    }
}

const PAIR_CHUNK: usize = 256;

/// Sums of squared increments per bin, one accumulator per target.
/// `order` sorts the samples canonically; chunks of fixed size are reduced in
/// parallel and merged in chunk order, so the result does not depend on the
/// number of worker threads.
fn bin_pairs(
    xs: &[f64],
    targets: &[&[f64]],
    n_bins: usize,
    max_lag: f64,
) -> (Vec<Vec<f64>>, Vec<u64>) {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        xs[a].total_cmp(&xs[b]).then_with(|| {
            targets
                .iter()
                .map(|t| t[a].total_cmp(&t[b]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let sx: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let sy: Vec<Vec<f64>> = targets
        .iter()
        .map(|t| order.iter().map(|&i| t[i]).collect())
        .collect();
    let width = max_lag / n_bins as f64;
    let p = targets.len();

    let partials: Vec<(Vec<f64>, Vec<u64>)> = (0..n.div_ceil(PAIR_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut sums = vec![0.0; p * n_bins];
            let mut counts = vec![0u64; n_bins];
            let lo = chunk * PAIR_CHUNK;
            for i in lo..(lo + PAIR_CHUNK).min(n) {
                for j in i + 1..n {
                    let h = sx[j] - sx[i];
                    if h > max_lag {
                        break;
                    }
                    let k = ((h / width) as usize).min(n_bins - 1);
                    counts[k] += 1;
                    for (c, y) in sy.iter().enumerate() {
                        let dy = y[j] - y[i];
                        sums[c * n_bins + k] += dy * dy;
                    }
                }
            }
            (sums, counts)
        })
        .collect();

    let mut sums = vec![vec![0.0; n_bins]; p];
    let mut counts = vec![0u64; n_bins];
    for (psum, pcount) in partials {
        for k in 0..n_bins {
            counts[k] += pcount[k];
            for c in 0..p {
                sums[c][k] += psum[c * n_bins + k];
            }
        }
    }
    (sums, counts)
}

fn check_binning(n_bins: usize, max_lag_fraction: f64) -> Result<()> {
    if n_bins == 0 {
        return Err(Error::InvalidInput("need at least one lag bin".into()));
    }
    if !(max_lag_fraction > 0.0 && max_lag_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "max_lag_fraction must lie in (0, 1], got {max_lag_fraction}"
        )));
    }
    Ok(())
}

fn axis_range(xs: &[f64]) -> f64 {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Pools the squared increments of several targets that share the same
/// abscissae; every target sees the same pairs, so the pair-count weighted
/// average reduces to the plain mean over targets.
pub fn pooled_marginal_variogram(
    xs: &[f64],
    targets: &[&[f64]],
    axis: usize,
    n_bins: usize,
    max_lag_fraction: f64,
) -> Result<EmpiricalVariogram> {
    check_binning(n_bins, max_lag_fraction)?;
    let range = axis_range(xs);
    let max_lag = max_lag_fraction * range;
    let (sums, counts) = bin_pairs(xs, targets, n_bins, max_lag);
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::NoPairsInRange { axis });
    }
    let width = max_lag / n_bins as f64;
    let lags = (0..n_bins).map(|k| (k as f64 + 0.5) * width).collect();
    let gamma_hat = (0..n_bins)
        .map(|k| {
            if counts[k] == 0 {
                0.0
            } else {
                let total: f64 = sums.iter().map(|s| s[k]).sum();
                0.5 * total / (counts[k] as f64 * targets.len() as f64)
            }
        })
        .collect();
    Ok(EmpiricalVariogram {
        axis,
        lags,
        gamma_hat,
        counts,
        axis_range: range,
    })
}

/// Marginal variogram of the target along `axis`, over all sample pairs with
/// lag up to `max_lag_fraction` of the axis range, in `n_bins` equal bins.
pub fn empirical_marginal_variogram(
    ds: &Dataset,
    axis: usize,
    n_bins: usize,
    max_lag_fraction: f64,
) -> Result<EmpiricalVariogram> {
    if axis >= ds.d() {
        return Err(Error::InvalidInput(format!("axis {axis} out of range")));
    }
    pooled_marginal_variogram(ds.axis(axis), &[ds.y()], axis, n_bins, max_lag_fraction)
}

/// Thresholds of the model selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Number of leading non-empty bins used by the line fit.
    pub fit_lags: usize,
    pub slope_eps: f64,
    pub nugget_eps: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            fit_lags: 5,
            slope_eps: 0.05,
            nugget_eps: 0.02,
        }
    }
}

/// What the line fit saw and why a structure was selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub axis: usize,
    pub slope: f64,
    /// Fitted intercept: the offset contributed by the other axes plus any
    /// genuine nugget; the two are not separable.
    pub intercept: f64,
    pub median_lag: f64,
    pub bins_used: usize,
    pub selected: String,
}

/// Pair-count weighted line fit over the first non-empty bins, then selection
/// of the structure.
pub fn fit_variogram(
    ev: &EmpiricalVariogram,
    cfg: &FitConfig,
) -> Result<(VariogramModel, FitReport)> {
    if ev.non_empty().all(|k| ev.gamma_hat[k] == 0.0) {
        return Err(Error::DegenerateFit);
    }
    let bins: Vec<usize> = ev.non_empty().take(cfg.fit_lags.max(2)).collect();
    if bins.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "axis {}: need at least two non-empty lag bins to fit, found {}",
            ev.axis,
            bins.len()
        )));
    }
    let (mut sw, mut sh, mut sg, mut shh, mut shg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &k in &bins {
        let w = ev.counts[k] as f64;
        let (h, g) = (ev.lags[k], ev.gamma_hat[k]);
        sw += w;
        sh += w * h;
        sg += w * g;
        shh += w * h * h;
        shg += w * h * g;
    }
    let (mh, mg) = (sh / sw, sg / sw);
    let slope = (shg - sw * mh * mg) / (shh - sw * mh * mh);
    let intercept = mg - slope * mh;

    let mut lags: Vec<f64> = bins.iter().map(|&k| ev.lags[k]).collect();
    lags.sort_by(f64::total_cmp);
    let m = lags.len();
    let median_lag = if m % 2 == 1 {
        lags[m / 2]
    } else {
        0.5 * (lags[m / 2 - 1] + lags[m / 2])
    };
    let max_gamma = ev
        .non_empty()
        .take(bins.len())
        .map(|k| ev.gamma_hat[k])
        .fold(0.0, f64::max);

    let model = if slope <= cfg.slope_eps * (intercept / median_lag) {
        VariogramModel::pure_nugget(mg.max(f64::MIN_POSITIVE))?
    } else if intercept <= cfg.nugget_eps * max_gamma {
        VariogramModel::linear(slope, ev.axis_range)?
    } else {
        VariogramModel::linear_nugget(slope, intercept, ev.axis_range)?
    };
    let report = FitReport {
        axis: ev.axis,
        slope,
        intercept,
        median_lag,
        bins_used: bins.len(),
        selected: model.kind.name().to_owned(),
    };
    Ok((model, report))
}
