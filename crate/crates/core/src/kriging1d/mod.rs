//! One-dimensional universal kriging in closed form for the linear, linear
//! with nugget, and pure-nugget (large grid) regimes.
//!
//! Every operation returns full per-sample weight vectors so that the zonal
//! predictor can recombine them across axes.

mod closed_form;
mod gamma;
mod increments;
pub(crate) mod kriger;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variogram::{VariogramKind, VariogramModel};

pub use closed_form::{
    c2_general, c2_regular_grid, largegrid_residue, regular_spacing, trapezoid_weights,
    LeastSquaresDiagnostics, NuggetDiagnostics, NuggetRoots,
};
pub(crate) use kriger::AxisKriger;

/// Highest power of the drift polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DriftOrder {
    Constant,
    Linear,
    Quadratic,
}

impl DriftOrder {
    pub fn degree(self) -> usize {
        match self {
            DriftOrder::Constant => 0,
            DriftOrder::Linear => 1,
            DriftOrder::Quadratic => 2,
        }
    }

    pub fn from_degree(d: usize) -> Result<Self> {
        match d {
            0 => Ok(DriftOrder::Constant),
            1 => Ok(DriftOrder::Linear),
            2 => Ok(DriftOrder::Quadratic),
            _ => Err(Error::InvalidInput(format!(
                "drift order must be 0, 1 or 2, got {d}"
            ))),
        }
    }

    /// The highest order a set of `distinct` abscissae can identify.
    pub fn capped(self, distinct: usize) -> Self {
        Self::from_degree(self.degree().min(distinct.saturating_sub(1))).expect("degree ≤ 2")
    }
}

impl TryFrom<u8> for DriftOrder {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::from_degree(v as usize)
    }
}

impl From<DriftOrder> for u8 {
    fn from(o: DriftOrder) -> u8 {
        o.degree() as u8
    }
}

/// Which of the three 1-D regimes a variogram model falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Linear,
    LinearNugget,
    PureNugget,
}

impl Regime {
    pub fn of(model: &VariogramModel) -> Self {
        match model.kind {
            VariogramKind::Linear { .. } => Regime::Linear,
            VariogramKind::LinearNugget { .. } => Regime::LinearNugget,
            VariogramKind::PureNugget { .. } => Regime::PureNugget,
        }
    }
}

/// How the drift coefficient weights were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMethod {
    ClosedForm,
    /// Exact generalized least squares via the increments formulation; used
    /// when the grid is irregular.
    IncrementsGls,
    LeastSquares,
}

/// Per-sample weighting of the least-squares drift fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftWeighting {
    /// Trapezoid weights from the sample spacing.
    #[default]
    Spacing,
    Uniform,
}

/// Estimated drift a0 + a1·u + a2·u² with u = x − origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCoefficients {
    pub order: DriftOrder,
    pub origin: f64,
    pub a: [f64; 3],
    /// Covariance of the coefficient estimators under the model (for a
    /// model-free least-squares fit: the inverse weighted normal matrix).
    pub cov: [[f64; 3]; 3],
    pub method: DriftMethod,
}

impl DriftCoefficients {
    pub fn eval(&self, x: f64) -> f64 {
        let u = x - self.origin;
        self.a[0] + self.a[1] * u + self.a[2] * u * u
    }
}

/// A 1-D training set. Order is preserved; sorting happens internally.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis1D {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Axis1D {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidInput(format!(
                "axis needs matching non-empty abscissae and targets ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value on axis".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn sorted(&self) -> (Vec<f64>, Vec<f64>) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.xs[a].total_cmp(&self.xs[b]));
        (
            idx.iter().map(|&i| self.xs[i]).collect(),
            idx.iter().map(|&i| self.ys[i]).collect(),
        )
    }
}

/// Result of kriging one axis at one point. Vectors are indexed like the
/// input samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisKrigeResult {
    /// Residue weights ν.
    pub nu: Vec<f64>,
    /// Drift weights μ: m*(x0) = Σ μ_i y_i.
    pub mu: Vec<f64>,
    /// Total weights λ with y*(x0) = Σ λ_i y_i.
    pub weights: Vec<f64>,
    pub drift: DriftCoefficients,
    pub estimate: f64,
    pub drift_estimate: f64,
    /// Variance of the residue estimator alone.
    pub krige_variance: f64,
    /// Variance contributed by the drift coefficient estimators.
    pub drift_variance: f64,
    /// Exact estimation variance of the full estimator; equals the sum of the
    /// two parts in the linear regime.
    pub variance: f64,
    pub epsilon: Option<f64>,
    pub extrapolated: bool,
    /// Set when the nugget regime fell back from the regular-grid closed
    /// forms to the exact increments solve.
    pub irregular_fallback: bool,
    pub nugget_diagnostics: Option<NuggetDiagnostics>,
}

fn assemble(k: &AxisKriger, xs: &[f64], ys: &[f64], x0: f64) -> Result<AxisKrigeResult> {
    let ev = k.evaluate(x0)?;
    let n = k.n();
    let q = k.order.degree();
    let mut nu = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let share = ev.residue.uniform / n as f64;
    for pos in 0..n {
        let i = k.original(pos);
        nu[i] += share;
        for p in 0..=q {
            let w = k.coef_weight(p, pos);
            mu[i] += ev.basis[p] * w;
            weights[i] += ev.deficit[p] * w;
        }
    }
    for &(pos, w) in &ev.residue.sparse {
        nu[k.original(pos)] += w;
    }
    for i in 0..n {
        weights[i] += nu[i];
    }
    let drift = DriftCoefficients {
        order: k.order,
        origin: k.origin,
        a: k.coefficients(ys),
        cov: k.cov,
        method: k.method,
    };
    let drift_estimate = drift.eval(x0);
    let residual: f64 = (0..n)
        .filter(|&i| nu[i] != 0.0)
        .map(|i| nu[i] * (ys[i] - drift.eval(xs[i])))
        .sum();
    Ok(AxisKrigeResult {
        nu,
        mu,
        weights,
        drift,
        estimate: drift_estimate + residual,
        drift_estimate,
        krige_variance: ev.krige_variance,
        drift_variance: ev.drift_variance,
        variance: ev.variance,
        epsilon: ev.residue.epsilon,
        extrapolated: ev.residue.extrapolated,
        irregular_fallback: k.regime == Regime::LinearNugget
            && k.method == DriftMethod::IncrementsGls,
        nugget_diagnostics: k.nugget_diagnostics,
    })
}

fn finite_query(x0: f64) -> Result<()> {
    if x0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "query abscissa {x0} is not finite"
        )))
    }
}

/// Universal kriging of `ax` at `x0` under any of the three regimes.
pub fn krige(
    ax: &Axis1D,
    x0: f64,
    model: &VariogramModel,
    order: DriftOrder,
) -> Result<AxisKrigeResult> {
    finite_query(x0)?;
    let k = AxisKriger::new(ax.xs(), *model, order)?;
    assemble(&k, ax.xs(), ax.ys(), x0)
}

fn axis_range(xs: &[f64]) -> f64 {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Linear-variogram kriging with unit slope: residues interpolated between
/// the two bracketing samples, drift from the closed-form estimators.
/// Variances scale linearly with the slope; the weights do not depend on it.
/// Equal abscissae are merged (their targets averaged).
pub fn krige_linear_vario(ax: &Axis1D, x0: f64, order: DriftOrder) -> Result<AxisKrigeResult> {
    let model = VariogramModel::linear(1.0, axis_range(ax.xs()).max(1.0))?;
    krige(ax, x0, &model, order)
}

/// Kriging with a linear variogram plus nugget: closed-form drift weights on
/// regular grids (exact increments solve otherwise) and a residue kriged from
/// the bracketing pair plus the sample mean.
pub fn krige_nugget(
    ax: &Axis1D,
    x0: f64,
    model: &VariogramModel,
    order: DriftOrder,
) -> Result<AxisKrigeResult> {
    match model.kind {
        VariogramKind::LinearNugget { nugget, .. } if nugget > 0.0 => krige(ax, x0, model, order),
        VariogramKind::LinearNugget { nugget, .. } => Err(Error::NonPositiveNugget(nugget)),
        _ => Err(Error::InvalidInput(format!(
            "krige_nugget needs a linear_nugget model, got {}",
            model.kind.name()
        ))),
    }
}

/// A least-squares drift together with the weight vectors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub drift: DriftCoefficients,
    pub weighting: DriftWeighting,
    /// Weight vector of each coefficient, indexed like the input samples.
    pub coefficient_weights: Vec<Vec<f64>>,
    pub diagnostics: LeastSquaresDiagnostics,
}

/// Weighted least-squares drift about the midpoint of the extreme samples.
/// The reported covariance is the inverse weighted normal matrix.
pub fn fit_drift_least_squares(
    ax: &Axis1D,
    order: DriftOrder,
    weighting: DriftWeighting,
) -> Result<LeastSquaresFit> {
    let n = ax.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| ax.xs[a].total_cmp(&ax.xs[b]));
    let (sx, sy) = ax.sorted();
    let omega = match weighting {
        DriftWeighting::Spacing => trapezoid_weights(&sx),
        DriftWeighting::Uniform => vec![1.0; n],
    };
    let origin = 0.5 * (sx[0] + sx[n - 1]);
    let (w_sorted, inv) = closed_form::least_squares_weights(&sx, &omega, origin, order)?;
    let q = order.degree();
    let mut a = [0.0; 3];
    let mut cov = [[0.0; 3]; 3];
    let mut coefficient_weights = vec![vec![0.0; n]; q + 1];
    for p in 0..=q {
        a[p] = w_sorted[p].iter().zip(&sy).map(|(w, y)| w * y).sum();
        for (pos, &i) in idx.iter().enumerate() {
            coefficient_weights[p][i] = w_sorted[p][pos];
        }
        for r in 0..=q {
            cov[p][r] = inv[(p, r)];
        }
    }
    let us: Vec<f64> = sx.iter().map(|x| x - origin).collect();
    let p_weights = trapezoid_weights(&sx);
    let diagnostics = closed_form::least_squares_reference_forms(&us, &sy, &p_weights, a);
    Ok(LeastSquaresFit {
        drift: DriftCoefficients {
            order,
            origin,
            a,
            cov,
            method: DriftMethod::LeastSquares,
        },
        weighting,
        coefficient_weights,
        diagnostics,
    })
}

/// Large-grid kriging: samples are farther apart than the range, so the
/// residue at `x0` is informed only by a sample sitting exactly at `x0`;
/// otherwise the prediction is the least-squares drift.
pub fn krige_largegrid(
    ax: &Axis1D,
    x0: f64,
    model: &VariogramModel,
    fit: &LeastSquaresFit,
) -> Result<AxisKrigeResult> {
    finite_query(x0)?;
    let VariogramKind::PureNugget { sill } = model.kind else {
        return Err(Error::InvalidInput(format!(
            "krige_largegrid needs a pure_nugget model, got {}",
            model.kind.name()
        )));
    };
    let n = ax.len();
    let drift = fit.drift;
    let q = drift.order.degree();
    let xs = ax.xs();
    let (mut left, mut right) = (None::<usize>, None::<usize>);
    for i in 0..n {
        if xs[i] <= x0 && left.is_none_or(|l| xs[i] > xs[l]) {
            left = Some(i);
        }
        if xs[i] >= x0 && right.is_none_or(|r| xs[i] < xs[r]) {
            right = Some(i);
        }
    }
    let cov_to = |i: Option<usize>| i.map_or(0.0, |i| if xs[i] == x0 { sill } else { 0.0 });
    let (cl, cr) = if left == right {
        (cov_to(left), 0.0)
    } else {
        (cov_to(left), cov_to(right))
    };
    let resid = |i: Option<usize>| i.map_or(0.0, |i| ax.ys[i] - drift.eval(xs[i]));
    let residue = largegrid_residue(sill, cl, cr, resid(left), resid(right));

    let mut nu = vec![0.0; n];
    if let Some(l) = left {
        nu[l] += cl / sill;
    }
    if let Some(r) = right {
        nu[r] += cr / sill;
    }
    let t = x0 - drift.origin;
    let mut deficit = [0.0; 3];
    let mut basis = [0.0; 3];
    for p in 0..=q {
        basis[p] = t.powi(p as i32);
        deficit[p] = basis[p]
            - (0..n)
                .map(|i| nu[i] * (xs[i] - drift.origin).powi(p as i32))
                .sum::<f64>();
    }
    let mut mu = vec![0.0; n];
    let mut weights = nu.clone();
    for p in 0..=q {
        for i in 0..n {
            mu[i] += basis[p] * fit.coefficient_weights[p][i];
            weights[i] += deficit[p] * fit.coefficient_weights[p][i];
        }
    }
    let krige_variance = sill - (cl * cl + cr * cr) / sill;
    let mut drift_variance = 0.0;
    for a in 0..=q {
        for b in 0..=q {
            let c: f64 = (0..n)
                .map(|i| fit.coefficient_weights[a][i] * fit.coefficient_weights[b][i])
                .sum();
            drift_variance += deficit[a] * deficit[b] * sill * c;
        }
    }
    let coincident = [left, right].into_iter().flatten().find(|&i| xs[i] == x0);
    let mut err: Vec<f64> = weights.clone();
    let mut extra = 1.0;
    if let Some(i) = coincident {
        err[i] -= 1.0;
        extra = 0.0;
    }
    let variance = sill * (err.iter().map(|w| w * w).sum::<f64>() + extra);
    let drift_estimate = drift.eval(x0);
    Ok(AxisKrigeResult {
        nu,
        mu,
        weights,
        drift,
        estimate: drift_estimate + residue,
        drift_estimate,
        krige_variance,
        drift_variance,
        variance,
        epsilon: match (left, right) {
            (Some(l), Some(r)) if xs[r] > xs[l] => Some((x0 - xs[l]) / (xs[r] - xs[l])),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        },
        extrapolated: left.is_none() || right.is_none(),
        irregular_fallback: false,
        nugget_diagnostics: None,
    })
}

/// Generalized least-squares estimate of a constant drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDrift {
    /// Weights μ with Σμ = 1.
    pub mu: Vec<f64>,
    pub a0: f64,
    /// Lagrange value: Σ_j μ_j σ(i, j) for every i, also the variance of a0*.
    pub rho0: f64,
}

pub fn estimate_constant_drift(ax: &Axis1D, model: &VariogramModel) -> Result<ConstantDrift> {
    let k = AxisKriger::new(ax.xs(), *model, DriftOrder::Constant)?;
    let n = ax.len();
    let mut mu = vec![0.0; n];
    for pos in 0..n {
        mu[k.original(pos)] = k.coef_weight(0, pos);
    }
    let a0 = mu.iter().zip(ax.ys()).map(|(m, y)| m * y).sum();
    Ok(ConstantDrift {
        mu,
        a0,
        rho0: k.cov[0][0],
    })
}
