//! Environment-indexed offspring laws `x ↦ μ_x` and their generating functions.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::CirclePoint;
use crate::scalar::Scalar;

/// Probability mass below which tails are discarded.
pub const TAIL_CUTOFF: f64 = 1e-14;

/// Grid used by the hypothesis checks and the domination tail.
pub const CHECK_GRID: usize = 1 << 12;

const MAX_SUPPORT: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReproductionError {
    #[error("s = {s} lies outside [0, 1]")]
    DomainError { s: f64 },
    #[error("invalid reproduction family: {0}")]
    InvalidFamily(String),
    #[error("dominating tail does not become summable ({0})")]
    DivergentTail(String),
    #[error("offspring law at x = {x} is the point mass at 0")]
    H1Violation { x: f64 },
}

/// The map `x ↦ μ_x`.
///
/// `PoissonCosine` is `Pois(exp(λ − cos 2πx))`. `CustomRatePoisson` has log-rate
/// `offset + Σ cos[k]·cos(2π(k+1)x) + sin[k]·sin(2π(k+1)x)`.
/// `FiniteSupportTable` holds probability vectors at equally spaced nodes `i/M`
/// and interpolates linearly (periodically) in between; a single node gives a
/// constant family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "S: Scalar")]
pub enum ReproductionFamily<S> {
    PoissonCosine {
        lambda: S,
    },
    CustomRatePoisson {
        offset: S,
        cos: Vec<S>,
        sin: Vec<S>,
    },
    FiniteSupportTable {
        nodes: Vec<Vec<S>>,
    },
}

/// `k ↦ sup_x μ_x([k, ∞))`, truncated where it drops below [`TAIL_CUTOFF`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DominatingTail<S> {
    pub values: Vec<S>,
    /// `Σ_{k≥1} tail(k)`, the mean of the dominating law.
    pub first_moment: S,
    /// `Σ_{k≥1} (2k − 1)·tail(k)`, its second moment.
    pub second_moment: S,
}

impl<S: Scalar> DominatingTail<S> {
    pub fn tail(&self, k: usize) -> S {
        self.values.get(k).copied().unwrap_or_else(S::zero)
    }
}

impl<S: Scalar> ReproductionFamily<S> {
    pub fn poisson_cosine(lambda: S) -> Self {
        ReproductionFamily::PoissonCosine { lambda }
    }

    pub fn custom_rate_poisson(
        offset: S,
        cos: Vec<S>,
        sin: Vec<S>,
    ) -> Result<Self, ReproductionError> {
        let family = ReproductionFamily::CustomRatePoisson { offset, cos, sin };
        family.validate()?;
        Ok(family)
    }

    /// Poisson law with a constant rate.
    pub fn constant_poisson(rate: S) -> Result<Self, ReproductionError> {
        Self::custom_rate_poisson(rate.ln(), Vec::new(), Vec::new())
    }

    pub fn finite_support(nodes: Vec<Vec<S>>) -> Result<Self, ReproductionError> {
        let family = ReproductionFamily::FiniteSupportTable { nodes };
        family.validate()?;
        Ok(family)
    }

    /// The constant family `μ_x = δ_k`.
    pub fn point_mass(k: usize) -> Self {
        let mut v = vec![S::zero(); k + 1];
        v[k] = S::one();
        ReproductionFamily::FiniteSupportTable { nodes: vec![v] }
    }

    pub fn validate(&self) -> Result<(), ReproductionError> {
        match self {
            ReproductionFamily::PoissonCosine { lambda } => {
                if !lambda.is_finite() {
                    return Err(ReproductionError::InvalidFamily("λ must be finite".into()));
                }
            }
            ReproductionFamily::CustomRatePoisson { offset, cos, sin } => {
                if !offset.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(ReproductionError::InvalidFamily(
                        "log-rate coefficients must be finite".into(),
                    ));
                }
            }
            ReproductionFamily::FiniteSupportTable { nodes } => {
                let Some(first) = nodes.first() else {
                    return Err(ReproductionError::InvalidFamily("table has no nodes".into()));
                };
                if first.is_empty() {
                    return Err(ReproductionError::InvalidFamily("empty probability vector".into()));
                }
                for (i, v) in nodes.iter().enumerate() {
                    if v.len() != first.len() {
                        return Err(ReproductionError::InvalidFamily(format!(
                            "node {i} has {} entries, expected {}",
                            v.len(),
                            first.len()
                        )));
                    }
                    if v.iter().any(|&p| !(p >= S::zero())) {
                        return Err(ReproductionError::InvalidFamily(format!(
                            "node {i} has a negative or non-finite entry"
                        )));
                    }
                    let total: S = v.iter().copied().sum();
                    if (total - S::one()).abs() > S::of(1e-12).max(S::epsilon() * S::of(16.0)) {
                        return Err(ReproductionError::InvalidFamily(format!(
                            "node {i} sums to {total}, not 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The scalar parameter the family is indexed by, when it has one.
    pub fn parameter(&self) -> Option<S> {
        match self {
            ReproductionFamily::PoissonCosine { lambda } => Some(*lambda),
            ReproductionFamily::CustomRatePoisson { offset, .. } => Some(*offset),
            ReproductionFamily::FiniteSupportTable { .. } => None,
        }
    }

    /// The same family with `log m` shifted so that the parameter equals `value`.
    pub fn with_parameter(&self, value: S) -> Option<Self> {
        match self {
            ReproductionFamily::PoissonCosine { .. } => {
                Some(ReproductionFamily::PoissonCosine { lambda: value })
            }
            ReproductionFamily::CustomRatePoisson { cos, sin, .. } => {
                Some(ReproductionFamily::CustomRatePoisson {
                    offset: value,
                    cos: cos.clone(),
                    sin: sin.clone(),
                })
            }
            ReproductionFamily::FiniteSupportTable { .. } => None,
        }
    }

    pub fn is_poisson(&self) -> bool {
        !matches!(self, ReproductionFamily::FiniteSupportTable { .. })
    }

    /// True when `μ_x` does not depend on `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            ReproductionFamily::PoissonCosine { .. } => false,
            ReproductionFamily::CustomRatePoisson { cos, sin, .. } => {
                cos.iter().chain(sin).all(|c| c.is_zero())
            }
            ReproductionFamily::FiniteSupportTable { nodes } => {
                nodes.iter().all(|v| v == &nodes[0])
            }
        }
    }

    /// `log a(x)` for the Poisson kinds.
    pub fn log_rate(&self, x: CirclePoint<S>) -> Option<S> {
        let theta = S::two_pi() * x.value();
        match self {
            ReproductionFamily::PoissonCosine { lambda } => Some(*lambda - theta.cos()),
            ReproductionFamily::CustomRatePoisson { offset, cos, sin } => {
                let mut v = *offset;
                for (k, &c) in cos.iter().enumerate() {
                    v = v + c * (S::of_usize(k + 1) * theta).cos();
                }
                for (k, &c) in sin.iter().enumerate() {
                    v = v + c * (S::of_usize(k + 1) * theta).sin();
                }
                Some(v)
            }
            ReproductionFamily::FiniteSupportTable { .. } => None,
        }
    }

    /// Interpolated probability vector of a table family.
    pub fn table_at(&self, x: CirclePoint<S>) -> Option<Vec<S>> {
        let ReproductionFamily::FiniteSupportTable { nodes } = self else {
            return None;
        };
        let m = nodes.len();
        if m == 1 {
            return Some(nodes[0].clone());
        }
        let u = x.value() * S::of_usize(m);
        let base = u.floor();
        let w = u - base;
        let i = base.to_usize().unwrap_or(0) % m;
        let j = (i + 1) % m;
        Some(
            nodes[i]
                .iter()
                .zip(&nodes[j])
                .map(|(&a, &b)| a + w * (b - a))
                .collect(),
        )
    }

    /// `φ(x, s)` without domain checks; `s` may be any value in `[0, 1]`.
    pub fn phi(&self, x: CirclePoint<S>, s: S) -> S {
        match self.table_at(x) {
            Some(p) => horner(&p, s).min(S::one()),
            None => {
                let a = self.log_rate(x).unwrap_or_else(S::zero).exp();
                (a * (s - S::one())).exp()
            }
        }
    }

    /// `∂_s φ(x, s)`.
    pub fn dphi(&self, x: CirclePoint<S>, s: S) -> S {
        match self.table_at(x) {
            Some(p) => horner(&derivative_coefficients(&p), s),
            None => {
                let a = self.log_rate(x).unwrap_or_else(S::zero).exp();
                a * (a * (s - S::one())).exp()
            }
        }
    }

    /// `∂²_s φ(x, s)`.
    pub fn d2phi(&self, x: CirclePoint<S>, s: S) -> S {
        match self.table_at(x) {
            Some(p) => horner(&derivative_coefficients(&derivative_coefficients(&p)), s),
            None => {
                let a = self.log_rate(x).unwrap_or_else(S::zero).exp();
                a * a * (a * (s - S::one())).exp()
            }
        }
    }

    /// `log ∂_s φ(x, s)`, computed without forming the exponential for Poisson laws.
    pub fn log_dphi(&self, x: CirclePoint<S>, s: S) -> S {
        match self.log_rate(x) {
            Some(la) => la + la.exp() * (s - S::one()),
            None => self.dphi(x, s).ln(),
        }
    }

    /// `φ(x, s) − φ(x, s − e)` for `0 ≤ e ≤ s`, accurate even when `e` is tiny.
    pub fn pgf_decrement(&self, x: CirclePoint<S>, s: S, e: S) -> S {
        match self.table_at(x) {
            Some(p) => {
                // s^k − t^k = e · Σ_{i<k} s^i t^{k−1−i}
                let t = s - e;
                let mut h = S::zero();
                let mut t_pow = S::one();
                let mut total = S::zero();
                for &pk in p.iter().skip(1) {
                    h = s * h + t_pow;
                    t_pow = t_pow * t;
                    total = total + pk * h;
                }
                e * total
            }
            None => {
                let a = self.log_rate(x).unwrap_or_else(S::zero).exp();
                -self.phi(x, s) * (-(a * e)).exp_m1()
            }
        }
    }

    /// `φ(x, s)` and its first two derivatives, selected by `order`.
    pub fn pgf(&self, x: CirclePoint<S>, s: S, order: u8) -> Result<S, ReproductionError> {
        if !(s >= S::zero() && s <= S::one()) {
            return Err(ReproductionError::DomainError { s: s.as_f64() });
        }
        match order {
            0 => Ok(self.phi(x, s)),
            1 => Ok(self.dphi(x, s)),
            2 => Ok(self.d2phi(x, s)),
            _ => Err(ReproductionError::InvalidFamily(format!(
                "derivative order {order} not available"
            ))),
        }
    }

    pub fn mean(&self, x: CirclePoint<S>) -> S {
        self.log_mean(x).exp()
    }

    /// `log m(x)`.
    pub fn log_mean(&self, x: CirclePoint<S>) -> S {
        match self.log_rate(x) {
            Some(la) => la,
            None => self.dphi(x, S::one()).ln(),
        }
    }

    /// `μ_x(k)`.
    pub fn pmf(&self, x: CirclePoint<S>, k: usize) -> S {
        match self.table_at(x) {
            Some(p) => p.get(k).copied().unwrap_or_else(S::zero),
            None => poisson_pmf(self.log_rate(x).unwrap_or_else(S::zero).exp(), k),
        }
    }

    /// `(μ_x(0), …, μ_x(K))` where the remaining tail is below [`TAIL_CUTOFF`].
    pub fn pmf_vector(&self, x: CirclePoint<S>) -> Result<Vec<S>, ReproductionError> {
        match self.table_at(x) {
            Some(p) => Ok(p),
            None => {
                let rate = self.log_rate(x).unwrap_or_else(S::zero).exp();
                let k_max = poisson_truncation(rate)?;
                Ok((0..=k_max).map(|k| poisson_pmf(rate, k)).collect())
            }
        }
    }

    /// One draw from `μ_x`.
    pub fn sample_offspring<R: Rng + ?Sized>(&self, x: CirclePoint<S>, rng: &mut R) -> u64 {
        self.sample_sum(x, 1, rng)
    }

    /// Total offspring of `count` independent individuals in environment `x`.
    pub fn sample_sum<R: Rng + ?Sized>(&self, x: CirclePoint<S>, count: u64, rng: &mut R) -> u64 {
        if count == 0 {
            return 0;
        }
        match self.table_at(x) {
            Some(p) => sample_multinomial_total(&p, count, rng),
            None => {
                let rate = self.log_rate(x).unwrap_or_else(S::zero).exp().as_f64();
                sample_poisson(rate * count as f64, rng)
            }
        }
    }

    /// Minimal dominating tail `k ↦ sup_x μ_x([k, ∞))`.
    ///
    /// Poisson tails increase with the rate, so the Poisson kinds use the
    /// largest rate on the check grid; linear interpolation of tables makes the
    /// supremum a maximum over nodes.
    pub fn domination_tail(&self) -> Result<DominatingTail<S>, ReproductionError> {
        let values: Vec<S> = match self {
            ReproductionFamily::FiniteSupportTable { nodes } => {
                let len = nodes[0].len();
                let mut sup = vec![S::zero(); len + 1];
                for v in nodes {
                    let mut acc = S::zero();
                    for k in (0..len).rev() {
                        acc = acc + v[k];
                        sup[k] = sup[k].max(acc);
                    }
                }
                while sup.len() > 1 && sup[sup.len() - 1] <= S::zero() {
                    sup.pop();
                }
                sup
            }
            _ => {
                let max_log_rate = self.grid_points(CHECK_GRID)
                    .map(|x| self.log_rate(x).unwrap_or_else(S::zero))
                    .fold(S::neg_infinity(), S::max);
                let rate = max_log_rate.exp();
                let k_max = poisson_truncation(rate)?;
                let pmf: Vec<S> = (0..=k_max).map(|k| poisson_pmf(rate, k)).collect();
                let mut tail = vec![S::zero(); k_max + 1];
                let mut acc = S::zero();
                for k in (0..=k_max).rev() {
                    acc = acc + pmf[k];
                    tail[k] = acc;
                }
                tail[0] = S::one();
                tail
            }
        };
        let mut first = S::zero();
        let mut second = S::zero();
        for (k, &t) in values.iter().enumerate().skip(1) {
            first = first + t;
            second = second + S::of_usize(2 * k - 1) * t;
        }
        if !first.is_finite() || !second.is_finite() {
            return Err(ReproductionError::DivergentTail(
                "moment sums are not finite".into(),
            ));
        }
        Ok(DominatingTail {
            values,
            first_moment: first,
            second_moment: second,
        })
    }

    /// Per-scale estimates of `‖μ_x − μ_y‖₁ / d(x,y)^α` over pairs of nodes of a
    /// `resolution`-point grid at dyadic separations, coarsest scale first.
    pub fn mu_holder_profile(
        &self,
        alpha: S,
        resolution: usize,
    ) -> Result<Vec<(S, S)>, ReproductionError> {
        let g = resolution.max(2).next_power_of_two();
        let pmfs = self
            .grid_points(g)
            .map(|x| self.pmf_vector(x))
            .collect::<Result<Vec<_>, _>>()?;
        let mut profile = Vec::new();
        let mut m = g / 2;
        while m >= 1 {
            let h = S::of_usize(m) / S::of_usize(g);
            let denom = h.powf(alpha);
            let best = (0..g)
                .map(|i| l1_distance(&pmfs[i], &pmfs[(i + m) % g]))
                .fold(S::zero(), S::max);
            profile.push((h, best / denom));
            m /= 2;
        }
        Ok(profile)
    }

    /// Lower estimate of the α-Hölder constant of `x ↦ μ_x` in total variation (ℓ¹).
    pub fn mu_holder_estimate(&self, alpha: S, resolution: usize) -> Result<S, ReproductionError> {
        Ok(self
            .mu_holder_profile(alpha, resolution)?
            .into_iter()
            .map(|(_, v)| v)
            .fold(S::zero(), S::max))
    }

    /// Checks `μ_x ≠ δ₀` on the check grid and at `extra` points.
    pub fn check_h1(&self, extra: &[CirclePoint<S>]) -> Result<(), ReproductionError> {
        for x in self.grid_points(CHECK_GRID).chain(extra.iter().copied()) {
            if !(self.pmf(x, 0) < S::one()) {
                return Err(ReproductionError::H1Violation { x: x.value().as_f64() });
            }
        }
        Ok(())
    }

    fn grid_points(&self, g: usize) -> impl Iterator<Item = CirclePoint<S>> {
        let gs = S::of_usize(g);
        (0..g).map(move |j| CirclePoint::new(S::of_usize(j) / gs))
    }
}

fn horner<S: Scalar>(coeffs: &[S], s: S) -> S {
    coeffs.iter().rev().fold(S::zero(), |acc, &c| acc * s + c)
}

fn derivative_coefficients<S: Scalar>(coeffs: &[S]) -> Vec<S> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| S::of_usize(k) * c)
        .collect()
}

fn l1_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            let x = a.get(k).copied().unwrap_or_else(S::zero);
            let y = b.get(k).copied().unwrap_or_else(S::zero);
            (x - y).abs()
        })
        .sum()
}

/// Poisson probability `e^{−a} a^k / k!` evaluated in log space.
pub fn poisson_pmf<S: Scalar>(rate: S, k: usize) -> S {
    let a = rate.as_f64();
    if a <= 0.0 {
        return if k == 0 { S::one() } else { S::zero() };
    }
    let kf = k as f64;
    S::of((-a + kf * a.ln() - libm::lgamma(kf + 1.0)).exp())
}

/// Smallest `K ≥ rate` with `P(X > K) < TAIL_CUTOFF` for `X ~ Pois(rate)`.
pub fn poisson_truncation<S: Scalar>(rate: S) -> Result<usize, ReproductionError> {
    let a = rate.as_f64();
    if !a.is_finite() || a < 0.0 {
        return Err(ReproductionError::DivergentTail(format!("rate {a}")));
    }
    let mut k = a.floor() as usize + 1;
    loop {
        // for k + 1 > a: P(X ≥ k+1) ≤ pmf(k+1) / (1 − a/(k+2))
        let next = k + 1;
        let bound = poisson_pmf::<f64>(a, next) / (1.0 - a / (next as f64 + 1.0));
        if bound < TAIL_CUTOFF {
            return Ok(k);
        }
        k += 1;
        if k > MAX_SUPPORT {
            return Err(ReproductionError::DivergentTail(format!(
                "support beyond {MAX_SUPPORT} for rate {a}"
            )));
        }
    }
}

/// Poisson draw: sequential inversion below rate 10, the exact rejection sampler
/// of `rand_distr` above.
pub fn sample_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    if rate < 10.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-rate).exp();
        let mut cdf = p;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= rate / k as f64;
            cdf += p;
        }
        return k;
    }
    let dist = Poisson::new(rate).expect("finite positive Poisson rate");
    dist.sample(rng) as u64
}

/// Sum of `count` i.i.d. draws from the law `p` on `{0, …, K}`, via the multinomial
/// category counts drawn as successive conditional binomials.
fn sample_multinomial_total<S: Scalar, R: Rng + ?Sized>(p: &[S], count: u64, rng: &mut R) -> u64 {
    let probs: Vec<f64> = p.iter().map(|v| v.as_f64().max(0.0)).collect();
    let mut suffix = vec![0.0; probs.len() + 1];
    for k in (0..probs.len()).rev() {
        suffix[k] = suffix[k + 1] + probs[k];
    }
    let mut remaining = count;
    let mut total = 0u64;
    for k in 0..probs.len() {
        if remaining == 0 {
            break;
        }
        let last_positive = suffix[k + 1] <= 0.0 || k + 1 == probs.len();
        let drawn = if last_positive {
            remaining
        } else {
            let cond = (probs[k] / suffix[k]).clamp(0.0, 1.0);
            Binomial::new(remaining, cond)
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        total += drawn * k as u64;
        remaining -= drawn;
    }
    total
}
