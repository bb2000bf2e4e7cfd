//! Generalized least squares for the drift of an intrinsic 1-D model, written
//! in terms of consecutive increments.
//!
//! For weights λ with Σλ = s0, put W_k = Σ_{i>k} λ_i. Under γ = c|h| + C0 the
//! estimation variance becomes s0²S + WᵀAW − 2·s0·bᵀW with A tridiagonal
//! (diagonal 2cΔx_k + 2C0, off-diagonal −C0) and b = cΔx + C0·e_0, so every
//! GLS weight vector costs a few O(N) tridiagonal solves.

use super::gamma::Intrinsic;
use super::DriftOrder;
use crate::error::{Error, Result};

/// LDLᵀ factorization of a symmetric tridiagonal matrix.
struct Tridiagonal {
    diag: Vec<f64>,
    /// Sub-diagonal multipliers.
    lower: Vec<f64>,
}

impl Tridiagonal {
    fn factor(diag: &[f64], off: f64) -> Result<Self> {
        let n = diag.len();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        let scale = diag.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for k in 0..n {
            let dk = if k == 0 {
                diag[0]
            } else {
                let lk = off / d[k - 1];
                l.push(lk);
                diag[k] - lk * off
            };
            if !(dk > 1e-14 * scale) {
                return Err(Error::SingularSystem {
                    pivot: if scale > 0.0 { dk / scale } else { 0.0 },
                });
            }
            d.push(dk);
        }
        Ok(Self { diag: d, lower: l })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = rhs.to_vec();
        for k in 1..n {
            x[k] -= self.lower[k - 1] * x[k - 1];
        }
        for k in 0..n {
            x[k] /= self.diag[k];
        }
        for k in (0..n.saturating_sub(1)).rev() {
            x[k] -= self.lower[k] * x[k + 1];
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// GLS weight vectors for the coefficients of 1, u, u² (up to `order`) over
/// sorted abscissae `us`. Ties are allowed only with a positive nugget.
pub(crate) fn gls_weights(us: &[f64], g: Intrinsic, order: DriftOrder) -> Result<Vec<Vec<f64>>> {
    let n_pts = us.len();
    let q = order.degree();
    if n_pts <= q {
        return Err(Error::InvalidInput(format!(
            "drift of degree {q} needs at least {} abscissae, found {n_pts}",
            q + 1
        )));
    }
    if n_pts == 1 {
        return Ok(vec![vec![1.0]]);
    }
    let n = n_pts - 1;
    let dx: Vec<f64> = us.windows(2).map(|w| w[1] - w[0]).collect();
    let diag: Vec<f64> = dx
        .iter()
        .map(|&h| 2.0 * g.slope * h + 2.0 * g.nugget)
        .collect();
    if g.nugget == 0.0 {
        if let Some(k) = dx.iter().position(|&h| h == 0.0) {
            return Err(Error::DuplicateAbscissa(us[k]));
        }
    }
    let a = Tridiagonal::factor(&diag, -g.nugget)?;

    let mut b = vec![0.0; n];
    for k in 0..n {
        b[k] = g.slope * dx[k];
    }
    b[0] += g.nugget;
    let ainv_b = a.solve(&b);

    let cols: Vec<Vec<f64>> = (1..=q)
        .map(|p| {
            us.windows(2)
                .map(|w| w[1].powi(p as i32) - w[0].powi(p as i32))
                .collect()
        })
        .collect();
    let ainv_g: Vec<Vec<f64>> = cols.iter().map(|c| a.solve(c)).collect();
    let m: Vec<Vec<f64>> = cols
        .iter()
        .map(|ci| ainv_g.iter().map(|aj| dot(ci, aj)).collect())
        .collect();
    let h: Vec<f64> = cols.iter().map(|c| dot(c, &ainv_b)).collect();

    let mut out = Vec::with_capacity(q + 1);
    for coef in 0..=q {
        let s0 = if coef == 0 { 1.0 } else { 0.0 };
        let r: Vec<f64> = (1..=q)
            .map(|p| f64::from(u8::from(coef == p)) - s0 * us[0].powi(p as i32) - s0 * h[p - 1])
            .collect();
        let rho = solve_small(&m, &r)?;
        let mut w: Vec<f64> = ainv_b.iter().map(|v| s0 * v).collect();
        for (p, col) in ainv_g.iter().enumerate() {
            for k in 0..n {
                w[k] += rho[p] * col[k];
            }
        }
        let mut lambda = vec![0.0; n_pts];
        lambda[0] = s0 - w[0];
        for i in 1..n {
            lambda[i] = w[i - 1] - w[i];
        }
        lambda[n] = w[n - 1];
        out.push(lambda);
    }
    Ok(out)
}

/// Solves a symmetric system of size 0, 1 or 2.
fn solve_small(m: &[Vec<f64>], r: &[f64]) -> Result<Vec<f64>> {
    match r.len() {
        0 => Ok(vec![]),
        1 => {
            if m[0][0] > 0.0 {
                Ok(vec![r[0] / m[0][0]])
            } else {
                Err(Error::SingularSystem { pivot: 0.0 })
            }
        }
        _ => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let scale = (m[0][0] * m[1][1]).abs();
            if !(det.abs() > 1e-13 * scale) {
                return Err(Error::SingularSystem {
                    pivot: if scale > 0.0 { det / scale } else { 0.0 },
                });
            }
            Ok(vec![
                (m[1][1] * r[0] - m[0][1] * r[1]) / det,
                (m[0][0] * r[1] - m[1][0] * r[0]) / det,
            ])
        }
    }
}
