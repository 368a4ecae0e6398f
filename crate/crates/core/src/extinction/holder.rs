use serde::{Deserialize, Serialize};

use super::grid::GridFunction;
use crate::scalar::Scalar;

/// Grid estimate of `|f|_α = sup |f(x) − f(y)| / d(x,y)^α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct HolderReport<S> {
    pub alpha: S,
    /// `(h, estimate at separation h)`, coarsest separation first.
    pub seminorm_by_scale: Vec<(S, S)>,
    pub seminorm: S,
    pub sup_norm: S,
}

impl<S: Scalar> HolderReport<S> {
    /// `‖f‖_∞ + |f|_α`.
    pub fn norm(&self) -> S {
        self.sup_norm + self.seminorm
    }
}

/// Maximises the difference quotient over node pairs at separations `h = 2^{-j}`,
/// from `1/2` down to the grid spacing (when `G` is a power of two).
pub fn holder_seminorm<S: Scalar>(f: &GridFunction<S>, alpha: S) -> HolderReport<S> {
    let s = &f.samples;
    let g = s.len();
    let mut profile = Vec::new();
    let mut m = g / 2;
    while m >= 1 {
        let h = S::of_usize(m) / S::of_usize(g);
        let d = h.min(S::one() - h);
        let best = (0..g)
            .map(|i| (s[i] - s[(i + m) % g]).abs())
            .fold(S::zero(), S::max);
        profile.push((h, best / d.powf(alpha)));
        if m % 2 == 1 {
            break;
        }
        m /= 2;
    }
    let seminorm = profile.iter().map(|&(_, v)| v).fold(S::zero(), S::max);
    HolderReport {
        alpha,
        seminorm_by_scale: profile,
        seminorm,
        sup_norm: f.sup_norm(),
    }
}

/// `(2‖f‖_∞)^{1−t} · |f|_α^t`.
pub fn interpolation_bound<S: Scalar>(sup_norm: S, seminorm_alpha: S, t: S) -> S {
    (S::of(2.0) * sup_norm).powf(S::one() - t) * seminorm_alpha.powf(t)
}

/// Checks `|f|_β ≤ (2‖f‖_∞)^{1−β/α} |f|_α^{β/α}` on the grid estimates.
pub fn interpolation_inequality_check<S: Scalar>(f: &GridFunction<S>, alpha: S, beta: S) -> bool {
    let a = holder_seminorm(f, alpha);
    let b = holder_seminorm(f, beta);
    b.seminorm <= interpolation_bound(a.sup_norm, a.seminorm, beta / alpha) + S::of(1e-12)
}
