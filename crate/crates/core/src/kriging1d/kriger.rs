//! Per-axis precomputation shared by the 1-D operations and the zonal
//! predictor. Building costs O(N log N); each query costs O(log N) and
//! touches no N-sized buffer.

use nalgebra::{Matrix4, Vector4};

use super::closed_form::{self, NuggetDiagnostics, NuggetRoots};
use super::gamma::{GammaSums, Intrinsic};
use super::increments::gls_weights;
use super::{DriftMethod, DriftOrder, Regime};
use crate::error::{Error, Result};
use crate::variogram::VariogramModel;

/// Relative tolerance for recognising a regular grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Residue weights of one query: a handful of explicit entries (by sorted
/// position) plus a coefficient on the uniform weight vector 1/N.
#[derive(Debug, Clone, Default)]
pub(crate) struct Residue {
    pub sparse: Vec<(usize, f64)>,
    pub uniform: f64,
    pub coincident: Option<usize>,
    pub epsilon: Option<f64>,
    pub bracket: Option<(usize, usize)>,
    pub extrapolated: bool,
}

/// Everything one query needs from one axis.
#[derive(Debug, Clone)]
pub(crate) struct AxisEval {
    pub residue: Residue,
    /// Drift basis 1, u, u² at the query.
    pub basis: [f64; 3],
    /// f(x0) − Fᵀν: drift left for the coefficient estimators to carry.
    pub deficit: [f64; 3],
    pub krige_variance: f64,
    pub drift_variance: f64,
    pub variance: f64,
}

#[derive(Clone, Copy)]
enum Point {
    Query(f64),
    Sample(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct AxisKriger {
    pub model: VariogramModel,
    g: Intrinsic,
    sill: f64,
    pub regime: Regime,
    pub order: DriftOrder,
    pub origin: f64,
    /// Sorted, centred abscissae.
    us: Vec<f64>,
    /// Sorted position → original index.
    perm: Vec<usize>,
    /// Start of each group of equal abscissae (merged only without nugget).
    groups: Option<Vec<usize>>,
    /// Coefficient weight vectors, then the uniform vector 1/N last.
    sums: Vec<GammaSums>,
    /// Γ quadratic forms among `sums`.
    qform: Vec<Vec<f64>>,
    moments: [f64; 3],
    pub cov: [[f64; 3]; 3],
    pub method: DriftMethod,
    pub nugget_diagnostics: Option<NuggetDiagnostics>,
}

impl AxisKriger {
    pub fn new(xs: &[f64], model: VariogramModel, order: DriftOrder) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty axis".into()));
        }
        if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite abscissa {x}")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
        let origin = 0.5 * (xs[perm[0]] + xs[perm[n - 1]]);
        let us: Vec<f64> = perm.iter().map(|&i| xs[i] - origin).collect();
        let g = Intrinsic::of(&model);
        let regime = Regime::of(&model);
        let q = order.degree();

        let mut groups = None;
        let mut nugget_diagnostics = None;
        let (coef, method): (Vec<Vec<f64>>, DriftMethod) = match regime {
            Regime::Linear => {
                let starts: Vec<usize> = (0..n).filter(|&k| k == 0 || us[k] != us[k - 1]).collect();
                let nodes: Vec<f64> = starts.iter().map(|&k| us[k]).collect();
                if nodes.len() <= q {
                    return Err(Error::DuplicateAbscissa(xs[perm[0]]));
                }
                let node_w = closed_form::linear_drift_weights(&nodes, order)?;
                let mut bounds = starts.clone();
                bounds.push(n);
                let expanded = node_w
                    .iter()
                    .map(|w| {
                        let mut out = vec![0.0; n];
                        for (m, win) in bounds.windows(2).enumerate() {
                            let share = w[m] / (win[1] - win[0]) as f64;
                            out[win[0]..win[1]].iter_mut().for_each(|v| *v = share);
                        }
                        out
                    })
                    .collect();
                groups = Some(bounds);
                (expanded, DriftMethod::ClosedForm)
            }
            Regime::LinearNugget => {
                let mut w = gls_weights(&us, g, order)?;
                match closed_form::regular_spacing(&us, GRID_TOLERANCE) {
                    Some(h) if q >= 1 && n >= 3 => {
                        let roots = NuggetRoots::new(g.slope, g.nugget, h);
                        let (l1, l2) = closed_form::nugget_drift_weights(n, h, roots);
                        w[1] = l1;
                        if q >= 2 {
                            w[2] = l2;
                        }
                        (w, DriftMethod::ClosedForm)
                    }
                    _ => (w, DriftMethod::IncrementsGls),
                }
            }
            Regime::PureNugget => (gls_weights(&us, g, order)?, DriftMethod::LeastSquares),
        };

        let mut sums: Vec<GammaSums> = coef.iter().map(|w| GammaSums::new(&us, w)).collect();
        sums.push(GammaSums::new(&us, &vec![1.0 / n as f64; n]));
        let nb = sums.len();
        let mut qform = vec![vec![0.0; nb]; nb];
        let dense: Vec<Vec<f64>> = sums
            .iter()
            .map(|s| (0..n).map(|k| s.weight(k)).collect())
            .collect();
        for a in 0..nb {
            for b in a..nb {
                let v = sums[b].quad_with(&us, &dense[a], g);
                qform[a][b] = v;
                qform[b][a] = v;
            }
        }
        let mut moments = [0.0; 3];
        for (p, m) in moments.iter_mut().enumerate() {
            *m = us.iter().map(|u| u.powi(p as i32)).sum::<f64>() / n as f64;
        }
        let sill = model.working_sill;
        let mut cov = [[0.0; 3]; 3];
        for a in 0..=q {
            for b in 0..=q {
                let s = if a == 0 && b == 0 { sill } else { 0.0 };
                cov[a][b] = s - qform[a][b];
            }
        }

        if regime == Regime::LinearNugget && method == DriftMethod::ClosedForm && q >= 1 {
            let h = closed_form::regular_spacing(&us, GRID_TOLERANCE).unwrap_or(1.0);
            let (l1, l2) =
                closed_form::nugget_drift_weights(n, h, NuggetRoots::new(g.slope, g.nugget, h));
            let var2 = if q >= 2 { cov[2][2] } else { f64::NAN };
            nugget_diagnostics = Some(closed_form::nugget_reference_forms(
                n,
                h,
                g.slope,
                g.nugget,
                &l1,
                &l2,
                (cov[1][1], var2),
            ));
        }

        Ok(Self {
            model,
            g,
            sill,
            regime,
            order,
            origin,
            us,
            perm,
            groups,
            sums,
            qform,
            moments,
            cov,
            method,
            nugget_diagnostics,
        })
    }

    pub fn n(&self) -> usize {
        self.us.len()
    }

    /// Original index of the sample at sorted position `k`.
    pub fn original(&self, k: usize) -> usize {
        self.perm[k]
    }

    /// Weight of sample at sorted position `k` in coefficient `p`'s estimator.
    pub fn coef_weight(&self, p: usize, k: usize) -> f64 {
        self.sums[p].weight(k)
    }

    /// Σ_j γ(x_j, x_k) over all samples, for the sample at sorted position k.
    pub fn gamma_row_sum(&self, k: usize) -> f64 {
        let mean = self.sums.last().expect("uniform sums");
        mean.at_sample(&self.us, k, self.g) * self.n() as f64
    }

    fn group_of(&self, k: usize) -> (usize, usize) {
        match &self.groups {
            Some(b) => {
                let m = b.partition_point(|&s| s <= k) - 1;
                (b[m], b[m + 1])
            }
            None => (k, k + 1),
        }
    }

    fn spread(&self, k: usize, weight: f64, out: &mut Vec<(usize, f64)>) {
        let (lo, hi) = self.group_of(k);
        let share = weight / (hi - lo) as f64;
        out.extend((lo..hi).map(|j| (j, share)));
    }

    fn gamma_between(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            self.g.distinct(self.us[a] - self.us[b])
        }
    }

    fn residue(&self, t: f64) -> Result<Residue> {
        let n = self.n();
        let pos = self.us.partition_point(|&u| u < t);
        let mut r = Residue::default();
        if pos < n && self.us[pos] == t {
            r.coincident = Some(pos);
            r.epsilon = Some(0.0);
            r.bracket = Some((pos, pos));
            match self.regime {
                Regime::Linear => self.spread(pos, 1.0, &mut r.sparse),
                _ => r.sparse.push((pos, 1.0)),
            }
            return Ok(r);
        }
        if pos == 0 || pos == n {
            r.extrapolated = true;
            if self.regime == Regime::Linear {
                // The closed-form drift passes through the end samples, so the
                // nearest end reproduces drift-only extrapolation exactly.
                self.spread(if pos == 0 { 0 } else { n - 1 }, 1.0, &mut r.sparse);
            }
            return Ok(r);
        }
        let (left, right) = (pos - 1, pos);
        let eps = (t - self.us[left]) / (self.us[right] - self.us[left]);
        r.epsilon = Some(eps);
        r.bracket = Some((left, right));
        match self.regime {
            Regime::Linear => {
                self.spread(left, 1.0 - eps, &mut r.sparse);
                self.spread(right, eps, &mut r.sparse);
            }
            Regime::LinearNugget => {
                let nu = self.three_group_weights(left, right, t)?;
                r.sparse.push((left, nu[0]));
                r.sparse.push((right, nu[1]));
                r.uniform = nu[2];
            }
            Regime::PureNugget => {}
        }
        Ok(r)
    }

    /// Variogram-form ordinary kriging over the two bracketing samples and
    /// the sample mean taken as a third datum.
    fn three_group_weights(&self, left: usize, right: usize, t: f64) -> Result<[f64; 3]> {
        let mean = self.sums.last().expect("uniform sums");
        let mi = self.sums.len() - 1;
        let lm = mean.at_sample(&self.us, left, self.g);
        let rm = mean.at_sample(&self.us, right, self.g);
        let lr = self.gamma_between(left, right);
        let mm = self.qform[mi][mi];
        #[rustfmt::skip]
        let a = Matrix4::new(
            0.0, lr,  lm,  1.0,
            lr,  0.0, rm,  1.0,
            lm,  rm,  mm,  1.0,
            1.0, 1.0, 1.0, 0.0,
        );
        let rhs = Vector4::new(
            self.g.distinct(t - self.us[left]),
            self.g.distinct(self.us[right] - t),
            mean.at_query(&self.us, t, self.g),
            1.0,
        );
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularSystem { pivot: 0.0 })?;
        Ok([sol[0], sol[1], sol[2]])
    }

    /// aᵀKa for a = sparse + Σ dense_b·(vector b) − (query point).
    fn error_variance(&self, sparse: &[(usize, f64)], dense: &[f64], point: Point) -> f64 {
        let mut sparse = sparse.to_vec();
        let query_t = match point {
            Point::Sample(k) => {
                sparse.push((k, -1.0));
                None
            }
            Point::Query(t) => Some(t),
        };
        let mut total: f64 = sparse.iter().map(|e| e.1).sum();
        total += dense
            .iter()
            .zip(&self.sums)
            .map(|(c, s)| c * s.total())
            .sum::<f64>();
        let mut quad = 0.0;
        for &(a, wa) in &sparse {
            for &(b, wb) in &sparse {
                quad += wa * wb * self.gamma_between(a, b);
            }
            for (c, s) in dense.iter().zip(&self.sums) {
                if *c != 0.0 {
                    quad += 2.0 * wa * c * s.at_sample(&self.us, a, self.g);
                }
            }
        }
        for (i, ci) in dense.iter().enumerate() {
            for (j, cj) in dense.iter().enumerate() {
                quad += ci * cj * self.qform[i][j];
            }
        }
        if let Some(t) = query_t {
            total -= 1.0;
            let mut cross: f64 = sparse
                .iter()
                .map(|&(a, w)| w * self.g.distinct(self.us[a] - t))
                .sum();
            cross += dense
                .iter()
                .zip(&self.sums)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, s)| c * s.at_query(&self.us, t, self.g))
                .sum::<f64>();
            quad -= 2.0 * cross;
        }
        self.sill * total * total - quad
    }

    fn clamp(&self, v: f64, scale: f64) -> Result<f64> {
        if v >= 0.0 {
            Ok(v)
        } else if v >= -1e-9 * scale.max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NegativeVariance(v))
        }
    }

    pub fn evaluate(&self, x0: f64) -> Result<AxisEval> {
        let t = x0 - self.origin;
        let residue = self.residue(t)?;
        let q = self.order.degree();
        let mut basis = [0.0; 3];
        let mut deficit = [0.0; 3];
        for p in 0..=q {
            basis[p] = t.powi(p as i32);
            let fitted: f64 = residue
                .sparse
                .iter()
                .map(|&(k, w)| w * self.us[k].powi(p as i32))
                .sum::<f64>()
                + residue.uniform * self.moments[p];
            deficit[p] = basis[p] - fitted;
        }
        let point = match (residue.coincident, self.regime) {
            (Some(k), Regime::LinearNugget | Regime::PureNugget) => Point::Sample(k),
            _ => Point::Query(t),
        };
        let nb = self.sums.len();
        let mut dense = vec![0.0; nb];
        dense[nb - 1] = residue.uniform;
        let scale = self.sill * 4.0;
        let krige_variance =
            self.clamp(self.error_variance(&residue.sparse, &dense, point), scale)?;
        dense[..=q].copy_from_slice(&deficit[..=q]);
        let variance = self.clamp(self.error_variance(&residue.sparse, &dense, point), scale)?;
        let mut drift_variance = 0.0;
        for a in 0..=q {
            for b in 0..=q {
                drift_variance += deficit[a] * deficit[b] * self.cov[a][b];
            }
        }
        let drift_variance = self.clamp(drift_variance, scale)?;
        Ok(AxisEval {
            residue,
            basis,
            deficit,
            krige_variance,
            drift_variance,
            variance,
        })
    }

    /// Drift basis 1, u, u² at `x`, zero beyond the axis order.
    pub fn basis_at(&self, x: f64) -> [f64; 3] {
        let t = x - self.origin;
        let mut b = [0.0; 3];
        for (p, bp) in b.iter_mut().enumerate().take(self.order.degree() + 1) {
            *bp = t.powi(p as i32);
        }
        b
    }

    /// Drift coefficients (a0, a1, a2) estimated from `ys` (original order).
    pub fn coefficients(&self, ys: &[f64]) -> [f64; 3] {
        let mut a = [0.0; 3];
        for (p, ap) in a.iter_mut().enumerate().take(self.order.degree() + 1) {
            *ap = (0..self.n())
                .map(|k| self.coef_weight(p, k) * ys[self.perm[k]])
                .sum();
        }
        a
    }
}
