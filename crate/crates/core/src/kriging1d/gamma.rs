//! Fast evaluation of Σ_j w_j γ(x_j, t) over sorted abscissae.

use crate::variogram::{VariogramKind, VariogramModel};

/// The three 1-D structures share one shape: γ = slope·|h| + nugget between
/// distinct samples, γ = 0 for a point with itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Intrinsic {
    pub slope: f64,
    pub nugget: f64,
}

impl Intrinsic {
    pub fn of(model: &VariogramModel) -> Self {
        match model.kind {
            VariogramKind::Linear { slope } => Self { slope, nugget: 0.0 },
            VariogramKind::LinearNugget { slope, nugget } => Self { slope, nugget },
            VariogramKind::PureNugget { sill } => Self {
                slope: 0.0,
                nugget: sill,
            },
        }
    }

    /// γ between two distinct samples (or a sample and a non-coincident query).
    #[inline]
    pub fn distinct(&self, h: f64) -> f64 {
        self.slope * h.abs() + self.nugget
    }
}

/// Prefix sums of a weight vector and of weight × abscissa, in sorted order.
#[derive(Debug, Clone)]
pub(crate) struct GammaSums {
    p0: Vec<f64>,
    p1: Vec<f64>,
}

impl GammaSums {
    pub fn new(xs: &[f64], w: &[f64]) -> Self {
        debug_assert_eq!(xs.len(), w.len());
        let mut p0 = Vec::with_capacity(xs.len() + 1);
        let mut p1 = Vec::with_capacity(xs.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        p0.push(0.0);
        p1.push(0.0);
        for (&x, &wi) in xs.iter().zip(w) {
            a += wi;
            b += wi * x;
            p0.push(a);
            p1.push(b);
        }
        Self { p0, p1 }
    }

    pub fn len(&self) -> usize {
        self.p0.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.p0[self.len()]
    }

    /// Weight at sorted position `k`.
    pub fn weight(&self, k: usize) -> f64 {
        self.p0[k + 1] - self.p0[k]
    }

    /// Σ_j w_j |x_j − t| where `split` samples lie at or left of `t`.
    fn abs_sum(&self, split: usize, t: f64) -> f64 {
        let n = self.len();
        let left = t * self.p0[split] - self.p1[split];
        let right = (self.p1[n] - self.p1[split]) - t * (self.p0[n] - self.p0[split]);
        left + right
    }

    /// Σ_j w_j γ(x_j, t) for a query that coincides with no sample.
    pub fn at_query(&self, xs: &[f64], t: f64, g: Intrinsic) -> f64 {
        let split = xs.partition_point(|&x| x <= t);
        g.slope * self.abs_sum(split, t) + g.nugget * self.total()
    }

    /// Σ_j w_j γ(x_j, x_k) for the sample at sorted position `k`.
    pub fn at_sample(&self, xs: &[f64], k: usize, g: Intrinsic) -> f64 {
        g.slope * self.abs_sum(k, xs[k]) + g.nugget * (self.total() - self.weight(k))
    }

    /// wᵀ Γ v where `self` holds the prefix sums of v.
    pub fn quad_with(&self, xs: &[f64], w: &[f64], g: Intrinsic) -> f64 {
        w.iter()
            .enumerate()
            .filter(|(_, &wk)| wk != 0.0)
            .map(|(k, &wk)| wk * self.at_sample(xs, k, g))
            .sum()
    }
}
