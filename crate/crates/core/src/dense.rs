//! Exact universal kriging by direct solution of the full constrained system.
//!
//! Used as the small-N production path and as the reference every closed
//! form and the zonal recombination are checked against.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::datamodel::{AxisWeights, Dataset};
use crate::error::{Error, Result};
use crate::kriging1d::DriftOrder;
use crate::variogram::VariogramModel;

pub const DEFAULT_DENSE_LIMIT: usize = 2000;
/// Relative pivot below which a factorization is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// σ(x, x') = Σ_s w_s² σ_s(x_s − x'_s): one 1-D model per axis, combined
/// under the zonal hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalCovariance {
    pub models: Vec<VariogramModel>,
    pub weights: AxisWeights,
}

impl ZonalCovariance {
    pub fn new(models: Vec<VariogramModel>, weights: AxisWeights) -> Result<Self> {
        if models.len() != weights.len() || models.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} axis models for {} axis weights",
                models.len(),
                weights.len()
            )));
        }
        Ok(Self { models, weights })
    }

    /// Unit weights; the models are taken as already scaled.
    pub fn unweighted(models: Vec<VariogramModel>) -> Self {
        let d = models.len();
        Self {
            models,
            weights: AxisWeights::unit(d),
        }
    }

    pub fn d(&self) -> usize {
        self.models.len()
    }

    /// Axis `s` model with its weight folded in.
    pub fn effective(&self, s: usize) -> VariogramModel {
        let w = self.weights.get(s);
        self.models[s].scaled(w * w)
    }

    /// σ(x, x) = Σ_s w_s² S_s.
    pub fn sill(&self) -> f64 {
        (0..self.d()).map(|s| self.effective(s).working_sill).sum()
    }

    /// Covariance between two distinct samples.
    pub fn between_samples(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..self.d())
            .map(|s| self.effective(s).sigma_distinct(a[s] - b[s]))
            .sum()
    }

    /// Covariance between a sample and a query point; the query is identified
    /// with the sample on any axis where their coordinates coincide.
    pub fn to_query(&self, sample: &[f64], query: &[f64]) -> f64 {
        (0..self.d())
            .map(|s| self.effective(s).sigma(sample[s] - query[s]))
            .sum()
    }

    /// Zonal variogram Σ_s w_s² γ_s(|Δx_s|).
    pub fn gamma(&self, dx: &[f64]) -> f64 {
        (0..self.d()).map(|s| self.effective(s).gamma(dx[s])).sum()
    }

    /// Same structure with every axis's working sill shifted by `delta`.
    pub fn with_sill_shift(&self, delta: f64) -> Self {
        Self {
            models: self
                .models
                .iter()
                .enumerate()
                .map(|(s, m)| {
                    let w = self.weights.get(s);
                    m.with_sill_shift(delta / (w * w))
                })
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Solution of the universal kriging system at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSolution {
    pub lambda: Vec<f64>,
    /// Multipliers of the drift constraints, in the centred and scaled basis.
    pub multipliers: Vec<f64>,
    pub estimate: f64,
    pub variance: f64,
}

/// Generalized least-squares drift at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSolution {
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub m_star: f64,
    pub variance: f64,
}

/// Drift basis {1, v_1..v_d, v_1²..v_d²} in coordinates centred on the data
/// midrange and scaled by the half range, which keeps the system well
/// conditioned.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    center: Vec<f64>,
    scale: Vec<f64>,
    order: DriftOrder,
}

impl Basis {
    pub(crate) fn new(ds: &Dataset, order: DriftOrder) -> Self {
        let (mut center, mut scale) = (vec![], vec![]);
        for s in 0..ds.d() {
            let col = ds.axis(s);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            center.push(0.5 * (lo + hi));
            scale.push((0.5 * (hi - lo)).max(f64::MIN_POSITIVE));
        }
        Self {
            center,
            scale,
            order,
        }
    }

    pub(crate) fn len(&self) -> usize {
        1 + self.order.degree() * self.center.len()
    }

    pub(crate) fn eval(&self, x: &[f64]) -> Vec<f64> {
        let d = self.center.len();
        let mut f = Vec::with_capacity(self.len());
        f.push(1.0);
        for p in 1..=self.order.degree() {
            for s in 0..d {
                f.push(((x[s] - self.center[s]) / self.scale[s]).powi(p as i32));
            }
        }
        f
    }
}

fn clamp_variance(v: f64, sigma00: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-10 * sigma00.abs().max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(v))
    }
}

fn check_pivots(lu: &LU<f64, Dyn, Dyn>) -> Result<()> {
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let rel = if max > 0.0 { min / max } else { 0.0 };
    if !(rel >= PIVOT_TOLERANCE) {
        return Err(Error::SingularSystem { pivot: rel });
    }
    Ok(())
}

/// The factorized universal kriging system of one dataset and model;
/// queries reuse the factorization.
#[derive(Debug, Clone)]
pub struct DenseKriging {
    points: Vec<Vec<f64>>,
    y: Vec<f64>,
    cov: ZonalCovariance,
    basis: Basis,
    lu: LU<f64, Dyn, Dyn>,
}

impl DenseKriging {
    pub fn new(
        ds: &Dataset,
        cov: &ZonalCovariance,
        order: DriftOrder,
        limit: usize,
    ) -> Result<Self> {
        let n = ds.n();
        if n > limit {
            return Err(Error::DenseLimitExceeded { n, limit });
        }
        if cov.d() != ds.d() {
            return Err(Error::InvalidInput(format!(
                "covariance has {} axes, dataset has {}",
                cov.d(),
                ds.d()
            )));
        }
        let points: Vec<Vec<f64>> = (0..n).map(|i| ds.point(i)).collect();
        let basis = Basis::new(ds, order);
        let m = basis.len();
        let sill = cov.sill();
        let mut a = DMatrix::zeros(n + m, n + m);
        for i in 0..n {
            a[(i, i)] = sill;
            for j in 0..i {
                let c = cov.between_samples(&points[i], &points[j]);
                a[(i, j)] = c;
                a[(j, i)] = c;
            }
            let f = basis.eval(&points[i]);
            for (u, fu) in f.into_iter().enumerate() {
                a[(i, n + u)] = fu;
                a[(n + u, i)] = fu;
            }
        }
        let lu = a.lu();
        check_pivots(&lu)?;
        Ok(Self {
            points,
            y: ds.y().to_vec(),
            cov: cov.clone(),
            basis,
            lu,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    fn check_query(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.cov.d() || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "query must have {} finite coordinates",
                self.cov.d()
            )));
        }
        Ok(())
    }

    /// Covariances between the samples and `x0`.
    pub fn cov_to(&self, x0: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| self.cov.to_query(p, x0))
            .collect()
    }

    /// Universal kriging: Kλ + Fm = k0, Fᵀλ = f0; variance σ00 − λᵀk0 − mᵀf0.
    pub fn solve(&self, x0: &[f64]) -> Result<DenseSolution> {
        self.check_query(x0)?;
        let n = self.n();
        let k0 = self.cov_to(x0);
        let f0 = self.basis.eval(x0);
        let rhs = DVector::from_iterator(n + f0.len(), k0.iter().chain(&f0).copied());
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or(Error::SingularSystem { pivot: 0.0 })?;
        let lambda: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let multipliers: Vec<f64> = sol.rows(n, f0.len()).iter().copied().collect();
        let sigma00 = self.cov.sill();
        let v = sigma00 - sol.dot(&rhs);
        Ok(DenseSolution {
            estimate: lambda.iter().zip(&self.y).map(|(l, y)| l * y).sum(),
            lambda,
            multipliers,
            variance: clamp_variance(v, sigma00)?,
        })
    }

    /// GLS drift: Kμ − Fρ = 0, Fᵀμ = f0; variance ρᵀf0.
    pub fn drift(&self, x0: &[f64]) -> Result<DriftSolution> {
        self.check_query(x0)?;
        let n = self.n();
        let f0 = self.basis.eval(x0);
        let mut rhs = DVector::zeros(n + f0.len());
        for (u, v) in f0.iter().enumerate() {
            rhs[n + u] = *v;
        }
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or(Error::SingularSystem { pivot: 0.0 })?;
        let mu: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let rho: Vec<f64> = sol.rows(n, f0.len()).iter().map(|v| -v).collect();
        let variance = rho.iter().zip(&f0).map(|(r, f)| r * f).sum();
        Ok(DriftSolution {
            m_star: mu.iter().zip(&self.y).map(|(m, y)| m * y).sum(),
            mu,
            rho,
            variance: clamp_variance(variance, self.cov.sill())?,
        })
    }

    /// Full covariance matrix between samples (for oracle use).
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let sill = self.cov.sill();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                sill
            } else {
                self.cov.between_samples(&self.points[i], &self.points[j])
            }
        })
    }

    pub fn sigma00(&self) -> f64 {
        self.cov.sill()
    }
}

/// Universal kriging at one point (factorizes, then solves).
pub fn solve_universal(
    ds: &Dataset,
    cov: &ZonalCovariance,
    x0: &[f64],
    order: DriftOrder,
    limit: usize,
) -> Result<DenseSolution> {
    DenseKriging::new(ds, cov, order, limit)?.solve(x0)
}

/// GLS drift estimate at one point.
pub fn estimate_drift_dense(
    ds: &Dataset,
    cov: &ZonalCovariance,
    x0: &[f64],
    order: DriftOrder,
    limit: usize,
) -> Result<DriftSolution> {
    DenseKriging::new(ds, cov, order, limit)?.drift(x0)
}

/// Simple kriging of zero-mean residues: Kν = k0, variance σ00 − νᵀk0.
pub fn solve_residue_system(
    cov: &DMatrix<f64>,
    cov0: &DVector<f64>,
    sigma00: f64,
) -> Result<(Vec<f64>, f64)> {
    if !cov.is_square() || cov.nrows() != cov0.len() {
        return Err(Error::InvalidInput(
            "covariance and right-hand side sizes differ".into(),
        ));
    }
    let chol = cov.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let l = chol.l();
    let dmax = l.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmin = l
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(dmin * dmin >= PIVOT_TOLERANCE * dmax * dmax) {
        return Err(Error::SingularCovariance);
    }
    let nu = chol.solve(cov0);
    let v = sigma00 - nu.dot(cov0);
    Ok((nu.iter().copied().collect(), clamp_variance(v, sigma00)?))
}
