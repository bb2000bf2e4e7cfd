//! Closed-form weights of the three 1-D regimes, plus evaluation of
//! reference closed forms that are kept for diagnostics only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DriftOrder;
use crate::error::{Error, Result};

/// Trapezoid weights: half the span between each abscissa's neighbours
/// (half an interval at either end). Input must be sorted.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let lo = xs[i.saturating_sub(1)];
            let hi = xs[(i + 1).min(n - 1)];
            0.5 * (hi - lo)
        })
        .collect()
}

fn centered(xs: &[f64]) -> Vec<f64> {
    let c = 0.5 * (xs[0] + xs[xs.len() - 1]);
    xs.iter().map(|x| x - c).collect()
}

/// Quadratic-coefficient constant of the linear-variogram drift, for sorted
/// distinct abscissae, about the midpoint of the extreme points.
pub fn c2_general(xs: &[f64]) -> Result<f64> {
    if xs.len() < 3 {
        return Err(Error::InvalidInput(
            "c2 needs at least three abscissae".into(),
        ));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "c2 needs strictly increasing abscissae".into(),
        ));
    }
    let u = centered(xs);
    let p = trapezoid_weights(xs);
    let n = u.len();
    let length = xs[n - 1] - xs[0];
    let moment: f64 = p.iter().zip(&u).map(|(p, u)| p * u * u).sum();
    let denom = 0.5 * (u[0] * u[0] + u[n - 1] * u[n - 1]) * length - moment;
    Ok(1.0 / denom)
}

/// c2 on a regular grid of `n_intervals` steps of size `h`.
pub fn c2_regular_grid(n_intervals: usize, h: f64) -> f64 {
    let n = n_intervals as f64;
    6.0 / (n * (n * n - 1.0) * h * h * h)
}

/// Weight vectors of a0, a1, a2 (about the midpoint) for a linear variogram
/// over sorted distinct abscissae; these are the exact GLS weights.
pub(crate) fn linear_drift_weights(us: &[f64], order: DriftOrder) -> Result<Vec<Vec<f64>>> {
    let n = us.len();
    if n <= order.degree() {
        return Err(Error::InvalidInput(format!(
            "drift of degree {} needs at least {} distinct abscissae, found {n}",
            order.degree(),
            order.degree() + 1
        )));
    }
    let mut ends = vec![0.0; n];
    ends[0] += 0.5;
    ends[n - 1] += 0.5;
    if n == 1 {
        return Ok(vec![vec![1.0]]);
    }
    let length = us[n - 1] - us[0];
    let mut out = vec![ends.clone()];
    if order.degree() >= 1 {
        let mut l1 = vec![0.0; n];
        l1[0] = -1.0 / length;
        l1[n - 1] = 1.0 / length;
        out.push(l1);
    }
    if order.degree() >= 2 {
        let c2 = c2_general(us)?;
        let p = trapezoid_weights(us);
        let half = 0.5 * length;
        let l2: Vec<f64> = (0..n)
            .map(|i| c2 * (half * (2.0 * ends[i]) - p[i]))
            .collect();
        let shift = us[n - 1] * us[n - 1];
        for i in 0..n {
            out[0][i] -= l2[i] * shift;
        }
        out.push(l2);
    }
    Ok(out)
}

/// Detects a regular grid within a relative tolerance; returns the spacing.
pub fn regular_spacing(xs: &[f64], rel_tol: f64) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let length = xs[n - 1] - xs[0];
    let h = length / (n - 1) as f64;
    if h <= 0.0 {
        return None;
    }
    let ok = xs
        .iter()
        .enumerate()
        .all(|(i, &x)| (x - (xs[0] + i as f64 * h)).abs() <= rel_tol * length);
    ok.then_some(h)
}

/// Roots of α² − 2(1 + r)α + 1 = 0 with r = slope·h / nugget, stored as
/// α = e^θ, β = e^−θ so that large grids never overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuggetRoots {
    pub theta: f64,
}

impl NuggetRoots {
    pub fn new(slope: f64, nugget: f64, h: f64) -> Self {
        let r = slope * h / nugget;
        Self {
            theta: (r + (r * (2.0 + r)).sqrt()).ln_1p(),
        }
    }

    /// The root greater than one (infinite if it overflows).
    pub fn alpha(&self) -> f64 {
        self.theta.exp()
    }

    pub fn beta(&self) -> f64 {
        (-self.theta).exp()
    }

    /// sinh(θk) / sinh(θK) for |k| ≤ K.
    fn sinh_ratio(&self, k: f64, big_k: f64) -> f64 {
        if k == 0.0 {
            return 0.0;
        }
        let t = self.theta;
        k.signum() * (t * (k.abs() - big_k)).exp() * (-2.0 * t * k.abs()).exp_m1()
            / (-2.0 * t * big_k).exp_m1()
    }

    /// cosh(θk) / cosh(θK) for |k| ≤ K.
    fn cosh_ratio(&self, k: f64, big_k: f64) -> f64 {
        let t = self.theta;
        (t * (k.abs() - big_k)).exp() * (1.0 + (-2.0 * t * k.abs()).exp())
            / (1.0 + (-2.0 * t * big_k).exp())
    }
}

/// Slope and curvature weights of the nugget regime on a regular grid of
/// n + 1 points centred on the origin. The slope weights are proportional to
/// α^k − β^k, the curvature weights are f·(α^k + β^k) + g; the normalizing
/// constants come from the unbiasedness conditions.
pub(crate) fn nugget_drift_weights(
    n_points: usize,
    h: f64,
    roots: NuggetRoots,
) -> (Vec<f64>, Vec<f64>) {
    let big_k = 0.5 * (n_points - 1) as f64;
    let ks: Vec<f64> = (0..n_points).map(|i| i as f64 - big_k).collect();
    let sh: Vec<f64> = ks.iter().map(|&k| roots.sinh_ratio(k, big_k)).collect();
    let norm: f64 = sh.iter().zip(&ks).map(|(s, k)| s * k * h).sum();
    let l1 = sh.iter().map(|s| s / norm).collect();

    let ch: Vec<f64> = ks.iter().map(|&k| roots.cosh_ratio(k, big_k)).collect();
    let s_ch: f64 = ch.iter().sum();
    let s_chu2: f64 = ch.iter().zip(&ks).map(|(c, k)| c * (k * h).powi(2)).sum();
    let s_u2: f64 = ks.iter().map(|k| (k * h).powi(2)).sum();
    let np = n_points as f64;
    // [s_ch  np ] [f]   [0]
    // [s_chu2 s_u2][g] = [1]
    let det = s_ch * s_u2 - np * s_chu2;
    let f = -np / det;
    let g = s_ch / det;
    let l2 = ch.iter().map(|c| f * c + g).collect();
    (l1, l2)
}

/// Reference closed forms of the nugget regime, evaluated for comparison
/// with the exact weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuggetDiagnostics {
    pub alpha: f64,
    pub beta: f64,
    /// Reference slope weight at the last point divided by the exact one.
    pub reference_slope_weight_ratio: f64,
    pub reference_slope_variance: f64,
    pub exact_slope_variance: f64,
    pub reference_f: f64,
    pub reference_g: f64,
    /// Largest |reference − exact| curvature weight.
    pub reference_curvature_weight_error: f64,
    pub reference_curvature_variance: f64,
    pub exact_curvature_variance: f64,
}

/// Evaluates the reference forms with the nugget expressed in units of the
/// slope (they assume a unit-slope variogram), then rescales
/// variances back by the slope. Non-finite entries mean the reference form
/// overflows for this grid.
pub(crate) fn nugget_reference_forms(
    n_points: usize,
    h: f64,
    slope: f64,
    nugget: f64,
    exact_l1: &[f64],
    exact_l2: &[f64],
    exact_var: (f64, f64),
) -> NuggetDiagnostics {
    let roots = NuggetRoots::new(slope, nugget, h);
    let c = nugget / slope;
    let (alpha, beta) = (roots.alpha(), roots.beta());
    let n = (n_points - 1) as f64;
    let big_k = 0.5 * n;
    let ks: Vec<f64> = (0..n_points).map(|i| i as f64 - big_k).collect();
    let last = n_points - 1;
    let reference_l1_last = (alpha.powf(big_k) - beta.powf(big_k)) / (2.0 * c * h);
    let reference_slope_variance =
        slope * (alpha.powf(1.0 + big_k) + alpha.powf(-big_k)) / ((1.0 - alpha) * c * h);
    let b: f64 = ks.iter().map(|&k| alpha.powf(k)).sum();
    let e: f64 = ks.iter().map(|&k| k * k * alpha.powf(k)).sum();
    let f = 1.0 / (2.0 * h * h * (e - n * (n + 2.0) / 12.0 * b));
    let g = -2.0 * b / (n + 1.0) * f;
    let reference_curvature_weight_error = ks
        .iter()
        .zip(exact_l2)
        .map(|(&k, &w)| (f * (alpha.powf(k) + beta.powf(k)) + g - w).abs())
        .fold(0.0, f64::max);
    NuggetDiagnostics {
        alpha,
        beta,
        reference_slope_weight_ratio: reference_l1_last / exact_l1[last],
        reference_slope_variance,
        exact_slope_variance: exact_var.0,
        reference_f: f,
        reference_g: g,
        reference_curvature_weight_error,
        reference_curvature_variance: slope * g / h,
        exact_curvature_variance: exact_var.1,
    }
}

/// Least-squares weight vectors of a0, a1, a2 about `origin` with per-sample
/// weights `omega`; also returns the inverse normal matrix.
pub(crate) fn least_squares_weights(
    xs: &[f64],
    omega: &[f64],
    origin: f64,
    order: DriftOrder,
) -> Result<(Vec<Vec<f64>>, DMatrix<f64>)> {
    let q = order.degree() + 1;
    let n = xs.len();
    if n < q {
        return Err(Error::InvalidInput(format!(
            "least squares with {q} coefficients needs at least {q} samples, found {n}"
        )));
    }
    let scale = xs
        .iter()
        .map(|x| (x - origin).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let basis = |x: f64| -> Vec<f64> {
        let v = (x - origin) / scale;
        (0..q).map(|p| v.powi(p as i32)).collect()
    };
    let mut normal = DMatrix::<f64>::zeros(q, q);
    for (&x, &w) in xs.iter().zip(omega) {
        let f = basis(x);
        for a in 0..q {
            for b in 0..q {
                normal[(a, b)] += w * f[a] * f[b];
            }
        }
    }
    let svd = normal.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::SingularNormalMatrix);
    }
    let inv = svd
        .pseudo_inverse(0.0)
        .map_err(|_| Error::SingularNormalMatrix)?;
    let mut weights = vec![vec![0.0; n]; q];
    for (j, (&x, &w)) in xs.iter().zip(omega).enumerate() {
        let f = DVector::from_vec(basis(x));
        let row = &inv * f;
        for u in 0..q {
            weights[u][j] = w * row[u] / scale.powi(u as i32);
        }
    }
    let unscale = DMatrix::from_fn(q, q, |a, b| inv[(a, b)] / scale.powi((a + b) as i32));
    Ok((weights, unscale))
}

/// Reference least-squares coefficient and covariance formulas, taking each
/// x_n·x_0 term as the difference (x_n − x_0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresDiagnostics {
    pub reference: [f64; 3],
    pub reference_cov11: f64,
    pub reference_cov22: f64,
    /// Largest |reference − normal-equation| coefficient.
    pub max_coefficient_gap: f64,
}

pub(crate) fn least_squares_reference_forms(
    us: &[f64],
    ys: &[f64],
    p: &[f64],
    solved: [f64; 3],
) -> LeastSquaresDiagnostics {
    let n = us.len();
    let length = us[n - 1] - us[0];
    let s0: f64 = p.iter().zip(ys).map(|(p, y)| p * y).sum();
    let s1: f64 = (0..n).map(|i| p[i] * ys[i] * us[i]).sum();
    let s2: f64 = (0..n).map(|i| p[i] * ys[i] * us[i] * us[i]).sum();
    let l = length;
    let reference = [
        9.0 / (4.0 * l) * s0 - 15.0 / (4.0 * l.powi(3)) * s2,
        3.0 / l.powi(3) * s1,
        -15.0 / (4.0 * l.powi(3)) * s0 + 45.0 / (4.0 * l.powi(5)) * s2,
    ];
    let gap = reference
        .iter()
        .zip(solved)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    LeastSquaresDiagnostics {
        reference,
        reference_cov11: 6.0 / (5.0 * l),
        reference_cov22: 15.0 / (14.0 * l.powi(3)),
        max_coefficient_gap: gap,
    }
}

/// Residue estimate from the two bracketing samples when samples are farther
/// apart than the range: each residue is weighted by its covariance with the
/// query over the sill.
pub fn largegrid_residue(
    sill: f64,
    cov_left: f64,
    cov_right: f64,
    res_left: f64,
    res_right: f64,
) -> f64 {
    (cov_left * res_left + cov_right * res_right) / sill
}
