//! The environment: uniformly expanding maps of the circle ℝ/ℤ.
//!
//! Three families are supported. The doubling map `x ↦ 2x`, the linear maps
//! `x ↦ p·x` of degree `p ≥ 2`, and the smooth perturbations
//! `x ↦ p·x + (ε/2π)·sin(2πx)` with `|ε| < p − 1`, whose derivative
//! `p + ε·cos(2πx)` stays above `p − |ε| > 1`.
//!
//! Besides plain floating orbits the module offers two exact orbit sources:
//! rational points (exact for the linear maps) and symbolic itineraries,
//! where a point is described by its sequence of inverse branches. Floating
//! orbits of the doubling map collapse onto `0` after about 53 steps because
//! every step shifts out one mantissa bit; itineraries do not.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{effective_tol, Scalar};

/// Default number of grid points used for sup estimates over the circle.
pub const DEFAULT_SUP_GRID: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("inverse-branch search for word {word:?} did not contract after {iterations} iterations")]
    ConvergenceFailure { word: Vec<u32>, iterations: usize },
    #[error("invalid orbit start: {0}")]
    InvalidStart(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A point of ℝ/ℤ stored as its representative in `[0, 1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CirclePoint<S>(S);

impl<S: Scalar> CirclePoint<S> {
    pub fn new(value: S) -> Self {
        let r = value - value.floor();
        // `-1e-20 - floor(-1e-20)` rounds to exactly 1
        if r >= S::one() || r < S::zero() || r.is_nan() {
            CirclePoint(S::zero())
        } else {
            CirclePoint(r)
        }
    }

    pub fn zero() -> Self {
        CirclePoint(S::zero())
    }

    pub fn from_ratio(r: Ratio<u64>) -> Self {
        Self::new(S::of(*r.numer() as f64 / *r.denom() as f64))
    }

    #[inline]
    pub fn value(self) -> S {
        self.0
    }

    /// Arc-length distance, in `[0, 1/2]`.
    pub fn distance(self, other: Self) -> S {
        let d = (self.0 - other.0).abs();
        d.min(S::one() - d)
    }

    pub fn shift(self, h: S) -> Self {
        Self::new(self.0 + h)
    }
}

/// Uniformly expanding circle map of degree `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "S: Scalar")]
pub enum EnvironmentMap<S> {
    Doubling,
    Affine { degree: u32 },
    SmoothExpanding { degree: u32, amplitude: S },
}

impl<S: Scalar> EnvironmentMap<S> {
    pub fn doubling() -> Self {
        EnvironmentMap::Doubling
    }

    pub fn affine(degree: u32) -> Result<Self, DynamicsError> {
        if degree < 2 {
            return Err(DynamicsError::InvalidMap(format!(
                "degree must be at least 2, got {degree}"
            )));
        }
        Ok(if degree == 2 {
            EnvironmentMap::Doubling
        } else {
            EnvironmentMap::Affine { degree }
        })
    }

    /// `x ↦ p·x + (amplitude/2π)·sin(2πx)`; requires `|amplitude| < p − 1`.
    pub fn smooth_expanding(degree: u32, amplitude: S) -> Result<Self, DynamicsError> {
        if degree < 2 {
            return Err(DynamicsError::InvalidMap(format!(
                "degree must be at least 2, got {degree}"
            )));
        }
        if !(amplitude.abs() < S::of(f64::from(degree)) - S::one()) {
            return Err(DynamicsError::InvalidMap(format!(
                "amplitude {amplitude} breaks uniform expansion for degree {degree}"
            )));
        }
        Ok(EnvironmentMap::SmoothExpanding { degree, amplitude })
    }

    pub fn degree(&self) -> u32 {
        match *self {
            EnvironmentMap::Doubling => 2,
            EnvironmentMap::Affine { degree } | EnvironmentMap::SmoothExpanding { degree, .. } => {
                degree
            }
        }
    }

    /// True when `T(x) = p·x mod 1`; these maps act exactly on rationals and grid nodes.
    pub fn is_linear(&self) -> bool {
        !matches!(self, EnvironmentMap::SmoothExpanding { .. })
    }

    fn degree_scalar(&self) -> S {
        S::of(f64::from(self.degree()))
    }

    /// Lower bound `κ > 1` for `|T′|`.
    pub fn derivative_floor(&self) -> S {
        match *self {
            EnvironmentMap::SmoothExpanding { amplitude, .. } => {
                self.degree_scalar() - amplitude.abs()
            }
            _ => self.degree_scalar(),
        }
    }

    /// Lift of the map to `[0, 1] → [0, p]`, increasing.
    pub fn lift(&self, y: S) -> S {
        match *self {
            EnvironmentMap::SmoothExpanding { amplitude, .. } => {
                self.degree_scalar() * y + amplitude / S::two_pi() * (S::two_pi() * y).sin()
            }
            _ => self.degree_scalar() * y,
        }
    }

    pub fn apply(&self, x: CirclePoint<S>) -> CirclePoint<S> {
        CirclePoint::new(self.lift(x.value()))
    }

    pub fn derivative(&self, x: CirclePoint<S>) -> S {
        match *self {
            EnvironmentMap::SmoothExpanding { amplitude, .. } => {
                self.degree_scalar() + amplitude * (S::two_pi() * x.value()).cos()
            }
            _ => self.degree_scalar(),
        }
    }

    /// Exact image of a rational point under a linear map; `None` for smooth maps.
    pub fn apply_exact(&self, r: Ratio<u64>) -> Option<Ratio<u64>> {
        if !self.is_linear() {
            return None;
        }
        let den = *r.denom();
        let num = (u128::from(self.degree()) * u128::from(*r.numer())) % u128::from(den);
        Some(Ratio::new(num as u64, den))
    }

    /// The `j`-th inverse branch: the unique `y ∈ [0, 1]` with `lift(y) = x + j`.
    pub fn inverse_branch(&self, x: S, j: u32) -> S {
        let target = x + S::of(f64::from(j));
        match *self {
            EnvironmentMap::SmoothExpanding { .. } => self.invert_lift(target),
            _ => target / self.degree_scalar(),
        }
    }

    fn invert_lift(&self, target: S) -> S {
        let (mut lo, mut hi) = (S::zero(), S::one());
        let mut y = (target / self.degree_scalar()).max(lo).min(hi);
        for _ in 0..200 {
            let f = self.lift(y) - target;
            if f.abs() <= S::epsilon() * self.degree_scalar() {
                return y;
            }
            if f > S::zero() {
                hi = y;
            } else {
                lo = y;
            }
            let newton = y - f / self.derivative(CirclePoint(y));
            y = if newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) / S::of(2.0)
            };
            if hi - lo <= S::epsilon() {
                break;
            }
        }
        y
    }

    /// Image of grid node `j/g` as a node index, when the map sends nodes to nodes.
    pub fn node_image(&self, j: usize, g: usize) -> Option<usize> {
        if self.is_linear() {
            Some(((self.degree() as u128 * j as u128) % g as u128) as usize)
        } else {
            None
        }
    }

    /// `(x, Tx, …, T^{n−1}x)`.
    pub fn orbit(&self, x: CirclePoint<S>, n: usize) -> Vec<CirclePoint<S>> {
        let mut out = Vec::with_capacity(n);
        let mut y = x;
        for _ in 0..n {
            out.push(y);
            y = self.apply(y);
        }
        out
    }

    /// Number of itinerary symbols needed to pin a point down to working precision.
    pub fn coding_depth(&self) -> usize {
        let bits = f64::from(S::mantissa_bits());
        let per_symbol = self.derivative_floor().as_f64().log2();
        (bits / per_symbol).ceil() as usize + 2
    }

    /// The point whose first itinerary symbols are `digits`; remaining symbols are
    /// taken to be those of the midpoint.
    pub fn point_from_itinerary(&self, digits: &[u32]) -> CirclePoint<S> {
        let mut y = S::of(0.5);
        for &d in digits.iter().rev() {
            y = self.inverse_branch(y, d);
        }
        CirclePoint::new(y)
    }

    /// Orbit from any supported start description.
    pub fn orbit_from(
        &self,
        start: &OrbitStart<S>,
        n: usize,
    ) -> Result<Vec<CirclePoint<S>>, DynamicsError> {
        match start {
            OrbitStart::Point(x) => Ok(self.orbit(*x, n)),
            OrbitStart::Exact(r) => {
                if *r.denom() == 0 {
                    return Err(DynamicsError::InvalidStart("zero denominator".into()));
                }
                if !self.is_linear() {
                    return Ok(self.orbit(CirclePoint::from_ratio(*r), n));
                }
                let mut out = Vec::with_capacity(n);
                let den = *r.denom();
                let mut cur = Ratio::new(*r.numer() % den, den);
                for _ in 0..n {
                    out.push(CirclePoint::from_ratio(cur));
                    cur = self.apply_exact(cur).expect("linear map");
                }
                Ok(out)
            }
            OrbitStart::Itinerary(digits) => {
                let depth = self.coding_depth();
                if digits.len() < n + depth {
                    return Err(DynamicsError::InvalidStart(format!(
                        "itinerary of length {} cannot resolve {} orbit points (needs {})",
                        digits.len(),
                        n,
                        n + depth
                    )));
                }
                let p = self.degree();
                if let Some(bad) = digits.iter().find(|&&d| d >= p) {
                    return Err(DynamicsError::InvalidStart(format!(
                        "symbol {bad} outside alphabet of size {p}"
                    )));
                }
                Ok((0..n)
                    .map(|k| self.point_from_itinerary(&digits[k..k + depth]))
                    .collect())
            }
        }
    }

    /// One start per depth-`L` cylinder (with `p^L ≥ min_count`), each followed by a
    /// seeded random tail so the orbit behaves like a typical point of its cylinder.
    pub fn cylinder_probes(&self, min_count: usize, len: usize, seed: u64) -> Vec<OrbitStart<S>> {
        let p = self.degree() as usize;
        let mut depth = 0usize;
        let mut count = 1usize;
        while count < min_count.max(1) {
            count *= p;
            depth += 1;
        }
        let total = len + self.coding_depth();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|idx| {
                let mut digits = word_digits(idx, depth, p as u32);
                while digits.len() < total {
                    digits.push(rng.random_range(0..p as u32));
                }
                OrbitStart::Itinerary(digits)
            })
            .collect()
    }

    /// All periodic orbits of minimal period `≤ max_period`, each listed once.
    ///
    /// Linear maps enumerate the exact rationals `j/(pⁿ − 1)`. Smooth maps
    /// enumerate primitive necklaces over the branch alphabet and locate each
    /// orbit point as the fixed point of the corresponding composition of
    /// inverse branches.
    pub fn periodic_points(
        &self,
        max_period: usize,
    ) -> Result<Vec<PeriodicOrbit<S>>, DynamicsError> {
        if max_period == 0 {
            return Err(DynamicsError::InvalidArgument(
                "max_period must be at least 1".into(),
            ));
        }
        let p = u64::from(self.degree());
        let mut orbits = Vec::new();
        for n in 1..=max_period {
            let size = (n as u32)
                .checked_mul(64 - p.leading_zeros())
                .filter(|&bits| bits <= 32)
                .map(|_| p.pow(n as u32));
            let Some(size) = size else {
                return Err(DynamicsError::InvalidArgument(format!(
                    "period {n} too large to enumerate for degree {p}"
                )));
            };
            if self.is_linear() {
                orbits.extend(self.linear_orbits_of_period(n, size));
            } else {
                orbits.extend(self.smooth_orbits_of_period(n, size)?);
            }
        }
        Ok(orbits)
    }

    fn linear_orbits_of_period(&self, n: usize, size: u64) -> Vec<PeriodicOrbit<S>> {
        let p = u128::from(self.degree());
        let den = size - 1;
        let mut visited = vec![false; den as usize];
        let mut orbits = Vec::new();
        for j in 0..den {
            if visited[j as usize] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cur = j;
            loop {
                visited[cur as usize] = true;
                cycle.push(cur);
                cur = ((p * u128::from(cur)) % u128::from(den)) as u64;
                if cur == j {
                    break;
                }
            }
            if cycle.len() == n {
                let exact: Vec<Ratio<u64>> = cycle.iter().map(|&c| Ratio::new(c, den)).collect();
                orbits.push(PeriodicOrbit {
                    points: exact.iter().map(|&r| CirclePoint::from_ratio(r)).collect(),
                    period: n,
                    exact: Some(exact),
                });
            }
        }
        orbits
    }

    fn smooth_orbits_of_period(
        &self,
        n: usize,
        size: u64,
    ) -> Result<Vec<PeriodicOrbit<S>>, DynamicsError> {
        let p = self.degree();
        let mut orbits = Vec::new();
        for idx in 0..size {
            if n == 1 && idx == u64::from(p) - 1 {
                // the all-(p−1) word codes the fixed point 1 ≡ 0
                continue;
            }
            let word = word_digits(idx as usize, n, p);
            if !is_necklace_representative(&word) {
                continue;
            }
            let mut points = Vec::with_capacity(n);
            for k in 0..n {
                let rotated: Vec<u32> = (0..n).map(|i| word[(k + i) % n]).collect();
                points.push(self.periodic_point_for_word(&rotated)?);
            }
            orbits.push(PeriodicOrbit {
                points,
                period: n,
                exact: None,
            });
        }
        Ok(orbits)
    }

    fn periodic_point_for_word(&self, word: &[u32]) -> Result<CirclePoint<S>, DynamicsError> {
        let tol = effective_tol(S::of(1e-13));
        let max_iter = 10_000;
        let mut y = S::of(0.5);
        for _ in 0..max_iter {
            let mut next = y;
            for &d in word.iter().rev() {
                next = self.inverse_branch(next, d);
            }
            let moved = (next - y).abs();
            y = next;
            if moved < tol {
                return Ok(CirclePoint::new(y));
            }
        }
        Err(DynamicsError::ConvergenceFailure {
            word: word.to_vec(),
            iterations: max_iter,
        })
    }

    /// `(1/n) Σ_{k<n} observable(T^k start)`.
    pub fn birkhoff_average<F>(&self, start: CirclePoint<S>, observable: F, n: usize) -> S
    where
        F: Fn(CirclePoint<S>) -> S,
    {
        mean(self.orbit(start, n).into_iter().map(observable), n)
    }

    /// Birkhoff average along an orbit given by any [`OrbitStart`].
    pub fn birkhoff_average_from<F>(
        &self,
        start: &OrbitStart<S>,
        observable: F,
        n: usize,
    ) -> Result<S, DynamicsError>
    where
        F: Fn(CirclePoint<S>) -> S,
    {
        let orbit = self.orbit_from(start, n)?;
        Ok(mean(orbit.into_iter().map(observable), n))
    }

    /// `(1/n) log Lip(Tⁿ)` estimated on the default grid.
    pub fn base_lyapunov(&self, n: usize) -> S {
        self.base_lyapunov_on_grid(n, DEFAULT_SUP_GRID)
    }

    /// `(1/n) log sup_x |(Tⁿ)′(x)|` with the sup taken over `grid` uniform nodes.
    /// Exact for the linear maps.
    pub fn base_lyapunov_on_grid(&self, n: usize, grid: usize) -> S {
        match self {
            EnvironmentMap::Doubling => S::LN_2(),
            EnvironmentMap::Affine { .. } => self.degree_scalar().ln(),
            EnvironmentMap::SmoothExpanding { .. } => {
                let n = n.max(1);
                let g = S::of_usize(grid);
                (0..grid)
                    .map(|j| {
                        let x = CirclePoint::new(S::of_usize(j) / g);
                        self.orbit(x, n)
                            .into_iter()
                            .map(|y| self.derivative(y).abs().ln())
                            .sum::<S>()
                    })
                    .fold(S::neg_infinity(), S::max)
                    / S::of_usize(n)
            }
        }
    }

    /// Endpoints `[a, b]` of every depth-`n` cylinder, indexed by the word read as a
    /// base-`p` number with the first symbol most significant.
    pub fn cylinder_endpoints(&self, depth: usize) -> Vec<(S, S)> {
        let p = self.degree() as usize;
        if self.is_linear() {
            let count = p.pow(depth as u32);
            let width = S::one() / S::of_usize(count);
            return (0..count)
                .map(|i| (S::of_usize(i) * width, S::of_usize(i + 1) * width))
                .collect();
        }
        let mut level = vec![(S::zero(), S::one())];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * p);
            for j in 0..p as u32 {
                for &(a, b) in &level {
                    next.push((self.inverse_branch(a, j), self.inverse_branch(b, j)));
                }
            }
            level = next;
        }
        level
    }
}

fn mean<S: Scalar>(values: impl Iterator<Item = S>, n: usize) -> S {
    values.sum::<S>() / S::of_usize(n.max(1))
}

/// Base-`p` digits of `idx`, most significant first, padded to `len`.
pub(crate) fn word_digits(mut idx: usize, len: usize, p: u32) -> Vec<u32> {
    let mut digits = vec![0u32; len];
    for slot in digits.iter_mut().rev() {
        *slot = (idx % p as usize) as u32;
        idx /= p as usize;
    }
    digits
}

/// True when `word` is primitive and strictly smaller than each of its other rotations.
fn is_necklace_representative(word: &[u32]) -> bool {
    let n = word.len();
    (1..n).all(|r| {
        let rotated = word[r..].iter().chain(&word[..r]);
        word.iter().lt(rotated)
    })
}

/// Where an orbit starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub enum OrbitStart<S> {
    /// A floating point start; orbits are computed by floating evaluation of `T`.
    Point(CirclePoint<S>),
    /// A rational start; exact under the linear maps.
    Exact(Ratio<u64>),
    /// A point given by its inverse-branch itinerary.
    Itinerary(Vec<u32>),
}

/// A periodic orbit `x, Tx, …, T^{n−1}x` with `Tⁿx = x` and `n` minimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PeriodicOrbit<S> {
    pub points: Vec<CirclePoint<S>>,
    pub period: usize,
    /// Exact rational coordinates, present for the linear maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<Ratio<u64>>>,
}

impl<S: Scalar> PeriodicOrbit<S> {
    /// Mean of `observable` over the orbit: the integral against the orbit's
    /// invariant atomic measure.
    pub fn average<F>(&self, observable: F) -> S
    where
        F: Fn(CirclePoint<S>) -> S,
    {
        mean(self.points.iter().copied().map(observable), self.period)
    }

    pub fn start(&self) -> OrbitStart<S> {
        match &self.exact {
            Some(exact) => OrbitStart::Exact(exact[0]),
            None => OrbitStart::Point(self.points[0]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(x: f64) -> CirclePoint<f64> {
        CirclePoint::new(x)
    }

    #[test]
    fn circle_point_reduces_and_measures() {
        assert_eq!(pt(1.25).value(), 0.25);
        assert_eq!(pt(-0.25).value(), 0.75);
        assert_eq!(pt(-1e-30).value(), 0.0);
        assert_abs_diff_eq!(pt(0.1).distance(pt(0.9)), 0.2, epsilon = 1e-15);
        assert!(pt(0.0).distance(pt(0.5)) <= 0.5);
    }

    #[test]
    fn doubling_map_apply() {
        let t = EnvironmentMap::<f64>::doubling();
        assert_eq!(t.apply(pt(0.3)).value(), 0.6);
        assert_eq!(t.apply(pt(0.75)).value(), 0.5);
        assert_eq!(t.apply(pt(0.0)).value(), 0.0);
    }

    #[test]
    fn orbits_of_doubling() {
        let t = EnvironmentMap::<f64>::doubling();
        let third = OrbitStart::Exact(Ratio::new(1, 3));
        let o = t.orbit_from(&third, 4).unwrap();
        let want = [1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
        for (a, b) in o.iter().zip(want) {
            assert_eq!(a.value(), b);
        }
        assert!(t.orbit(pt(0.0), 3).iter().all(|x| x.value() == 0.0));
        let o = t.orbit(pt(0.1), 3);
        assert_abs_diff_eq!(o[1].value(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(o[2].value(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn orbit_concatenation() {
        let t = EnvironmentMap::<f64>::smooth_expanding(2, 0.5).unwrap();
        let x = pt(0.137);
        let whole = t.orbit(x, 9);
        let head = t.orbit(x, 4);
        let tail = t.orbit(t.orbit(x, 5)[4], 5);
        assert_eq!(&whole[..4], &head[..]);
        assert_eq!(&whole[4..], &tail[..]);
    }

    #[test]
    fn periodic_points_of_doubling() {
        let t = EnvironmentMap::<f64>::doubling();
        let one = t.periodic_points(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].points[0].value(), 0.0);

        let two = t.periodic_points(2).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].exact.as_ref().unwrap(), &vec![Ratio::new(1, 3), Ratio::new(2, 3)]);

        let three = t.periodic_points(3).unwrap();
        let by_period: Vec<usize> = three.iter().map(|o| o.period).collect();
        assert_eq!(by_period, vec![1, 2, 3, 3]);
        assert_eq!(
            three[2].exact.as_ref().unwrap(),
            &vec![Ratio::new(1, 7), Ratio::new(2, 7), Ratio::new(4, 7)]
        );
        assert_eq!(
            three[3].exact.as_ref().unwrap(),
            &vec![Ratio::new(3, 7), Ratio::new(6, 7), Ratio::new(5, 7)]
        );
    }

    /// Brute force: count fixed points of Tⁿ, which must equal pⁿ − 1 for a degree-p
    /// expanding circle map, and compare with Σ_{d|n} d·#orbits(d).
    #[test]
    fn periodic_orbit_counts_match_fixed_point_counts() {
        let maps = [
            EnvironmentMap::<f64>::doubling(),
            EnvironmentMap::affine(3).unwrap(),
            EnvironmentMap::smooth_expanding(2, 0.5).unwrap(),
        ];
        for t in &maps {
            let p = t.degree() as usize;
            let orbits = t.periodic_points(6).unwrap();
            for n in 1..=6usize {
                let fixed: usize = orbits
                    .iter()
                    .filter(|o| n % o.period == 0)
                    .map(|o| o.period)
                    .sum();
                assert_eq!(fixed, p.pow(n as u32) - 1, "map {t:?}, n = {n}");
            }
        }
    }

    #[test]
    fn periodic_orbits_close_up() {
        let doubling = EnvironmentMap::<f64>::doubling();
        for orbit in doubling.periodic_points(8).unwrap() {
            let exact = orbit.exact.clone().unwrap();
            let mut r = exact[0];
            for _ in 0..orbit.period {
                r = doubling.apply_exact(r).unwrap();
            }
            assert_eq!(r, exact[0]);
        }
        let smooth = EnvironmentMap::<f64>::smooth_expanding(3, -1.2).unwrap();
        for orbit in smooth.periodic_points(5).unwrap() {
            let mut x = orbit.points[0];
            for k in 0..orbit.period {
                assert!(x.distance(orbit.points[k]) < 1e-12);
                x = smooth.apply(x);
            }
            assert!(x.distance(orbit.points[0]) < 1e-12, "{orbit:?}");
        }
    }

    #[test]
    fn birkhoff_averages() {
        let t = EnvironmentMap::<f64>::doubling();
        let cos = |x: CirclePoint<f64>| (std::f64::consts::TAU * x.value()).cos();
        let third = OrbitStart::Exact(Ratio::new(1, 3));
        assert_abs_diff_eq!(t.birkhoff_average_from(&third, cos, 2).unwrap(), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.birkhoff_average_from(&third, cos, 1000).unwrap(), -0.5, epsilon = 1e-14);
        assert_eq!(t.birkhoff_average(pt(0.0), cos, 17), 1.0);
        assert_abs_diff_eq!(t.birkhoff_average(pt(0.1), |_| 3.5, 10), 3.5, epsilon = 1e-15);
    }

    #[test]
    fn birkhoff_over_period_is_orbit_mean() {
        let t = EnvironmentMap::<f64>::doubling();
        let obs = |x: CirclePoint<f64>| (x.value() * 7.0).sin() + x.value();
        for orbit in t.periodic_points(7).unwrap() {
            let direct = orbit.points.iter().map(|&x| obs(x)).sum::<f64>() / orbit.period as f64;
            let b = t.birkhoff_average_from(&orbit.start(), obs, orbit.period).unwrap();
            assert!((direct - b).abs() < 1e-14);
        }
    }

    #[test]
    fn base_lyapunov_values() {
        let d = EnvironmentMap::<f64>::doubling();
        for n in [1, 5, 40] {
            assert_eq!(d.base_lyapunov(n), std::f64::consts::LN_2);
        }
        let a = EnvironmentMap::<f64>::affine(3).unwrap();
        assert_eq!(a.base_lyapunov(7), 3f64.ln());
        let s = EnvironmentMap::<f64>::smooth_expanding(2, 0.5).unwrap();
        let coarse = s.base_lyapunov_on_grid(8, 1 << 10);
        let fine = s.base_lyapunov_on_grid(8, 1 << 14);
        assert!(fine >= 1.5f64.ln());
        assert!(fine >= coarse - 1e-12);
        assert!((fine - coarse).abs() < 1e-3);
        assert!(fine <= 2.5f64.ln());
    }

    #[test]
    fn itinerary_orbits_avoid_collapse() {
        let t = EnvironmentMap::<f64>::doubling();
        let probes = t.cylinder_probes(8, 200, 7);
        assert_eq!(probes.len(), 8);
        let orbit = t.orbit_from(&probes[3], 200).unwrap();
        // floating doubling of a generic double collapses to 0 after ~53 steps
        assert!(orbit[150..].iter().any(|x| x.value() > 0.1));
        for k in 0..199 {
            assert!(t.apply(orbit[k]).distance(orbit[k + 1]) < 1e-12);
        }
        // the prefix fixes the starting cylinder
        assert!(orbit[0].value() >= 3.0 / 8.0 && orbit[0].value() < 4.0 / 8.0);
    }

    #[test]
    fn smooth_itinerary_orbit_is_an_orbit() {
        let t = EnvironmentMap::<f64>::smooth_expanding(2, 0.5).unwrap();
        let probes = t.cylinder_probes(4, 50, 3);
        let orbit = t.orbit_from(&probes[2], 50).unwrap();
        for k in 0..49 {
            assert!(t.apply(orbit[k]).distance(orbit[k + 1]) < 1e-12);
        }
    }

    #[test]
    fn short_itinerary_rejected() {
        let t = EnvironmentMap::<f64>::doubling();
        let err = t.orbit_from(&OrbitStart::Itinerary(vec![0, 1]), 5).unwrap_err();
        assert!(matches!(err, DynamicsError::InvalidStart(_)));
    }

    #[test]
    fn cylinders_tile_the_circle() {
        let t = EnvironmentMap::<f64>::smooth_expanding(2, 0.7).unwrap();
        let cyl = t.cylinder_endpoints(6);
        assert_eq!(cyl.len(), 64);
        assert_eq!(cyl[0].0, 0.0);
        assert!((cyl[63].1 - 1.0).abs() < 1e-15);
        for w in cyl.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-14);
            assert!(w[0].0 < w[0].1);
        }
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(EnvironmentMap::<f64>::affine(1).is_err());
        assert!(EnvironmentMap::<f64>::smooth_expanding(2, 1.0).is_err());
        assert!(EnvironmentMap::<f64>::smooth_expanding(3, 1.9).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let t = EnvironmentMap::<f32>::doubling();
        let o = t.periodic_points(3).unwrap();
        assert_eq!(o.len(), 4);
        assert_eq!(t.apply(CirclePoint::new(0.75f32)).value(), 0.5f32);
    }
}
