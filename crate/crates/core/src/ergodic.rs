//! Extremal Birkhoff averages: the criticality classification from `log m`, the
//! pointwise growth exponent, and the fibre exponent of the extinction graph.
//!
//! Extrema over invariant measures are taken over periodic orbits, which carry
//! exact averages. Long probe orbits started in every cylinder of a fixed depth
//! give the complementary "typical orbit" picture.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CirclePoint, DynamicsError, EnvironmentMap, OrbitStart, PeriodicOrbit};
use crate::extinction::{node, ExtinctionError, ExtinctionSolution, Transport, PULLBACK_STEPS};
use crate::reproduction::{ReproductionError, ReproductionFamily};
use crate::scalar::{least_squares_slope, Scalar};

/// Number of probe orbits (one per cylinder of the smallest depth reaching it).
pub const PROBE_STARTS: usize = 1 << 10;
const PROBE_SEED: u64 = 0x6077_d1e5_5eed_0001;
const LYAPUNOV_STEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErgodicError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("extinction graph carries no bracket certificate")]
    UncertifiedInput,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reproduction(#[from] ReproductionError),
    #[error(transparent)]
    Extinction(#[from] ExtinctionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    UniformlySubcritical,
    Critical,
    UniformlySupercritical,
}

impl Regime {
    /// Subcritical when `λ_max ≤ 0`, supercritical when `λ_min > 0`, critical otherwise.
    /// Extremes within rounding distance of 0 count as 0.
    pub fn from_extremes<S: Scalar>(lambda_min: S, lambda_max: S) -> Self {
        let eps = S::tol_floor();
        if lambda_max <= eps {
            Regime::UniformlySubcritical
        } else if lambda_min > eps {
            Regime::UniformlySupercritical
        } else {
            Regime::Critical
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::UniformlySubcritical => "uniformly-subcritical",
            Regime::Critical => "critical",
            Regime::UniformlySupercritical => "uniformly-supercritical",
        }
    }
}

/// Smallest and largest averages seen along probe orbits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OrbitBand<S> {
    pub min: S,
    pub max: S,
    pub orbit_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CriticalityReport<S> {
    pub lambda_min: S,
    pub lambda_max: S,
    pub witness_min: PeriodicOrbit<S>,
    pub witness_max: PeriodicOrbit<S>,
    pub regime: Regime,
    pub max_period_used: usize,
    pub long_orbit_bound: OrbitBand<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FibreExponentReport<S> {
    pub lambda_f: S,
    pub lambda_u: S,
    pub alpha_star: S,
    pub periodic_lower_bound: S,
    pub birkhoff_upper_bound: S,
    pub witness: PeriodicOrbit<S>,
    pub probe_len: usize,
}

impl<S: Scalar> FibreExponentReport<S> {
    /// Whether `value` lies in `[lower − slack, upper + slack]`.
    pub fn brackets(&self, value: S, slack: S) -> bool {
        value >= self.periodic_lower_bound - slack && value <= self.birkhoff_upper_bound + slack
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FibreRate<S> {
    /// Least-squares slope of `n ↦ sup_x log ∂_s φ^{(n)}(x, a)` over the fit window.
    pub slope: S,
    pub fit_window: (usize, usize),
    /// `(n, sup_x (1/n) log ∂_s φ^{(n)}(x, a))` for `n = 1, …, n_max`.
    pub sup_averages: Vec<(usize, S)>,
}

fn probe_averages<S, F>(
    map: &EnvironmentMap<S>,
    observable: F,
    len: usize,
) -> Result<Vec<S>, ErgodicError>
where
    S: Scalar,
    F: Fn(CirclePoint<S>) -> S,
{
    map.cylinder_probes(PROBE_STARTS, len, PROBE_SEED)
        .iter()
        .map(|start| Ok(map.birkhoff_average_from(start, &observable, len)?))
        .collect()
}

/// `λ_min`, `λ_max` from periodic orbits of period `≤ max_period`, plus the band of
/// probe-orbit averages of length `probe_len`.
pub fn classify<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    max_period: usize,
    probe_len: usize,
) -> Result<CriticalityReport<S>, ErgodicError> {
    if max_period < 2 {
        return Err(ErgodicError::InvalidArgument(format!(
            "max_period must be at least 2, got {max_period}"
        )));
    }
    if probe_len == 0 {
        return Err(ErgodicError::InvalidArgument("probe_len must be positive".into()));
    }
    let orbits = map.periodic_points(max_period)?;
    let points: Vec<_> = orbits.iter().flat_map(|o| o.points.iter().copied()).collect();
    family.check_h1(&points)?;

    let log_m = |x: CirclePoint<S>| family.log_mean(x);
    let (mut i_min, mut i_max) = (0, 0);
    let (mut lo, mut hi) = (S::infinity(), S::neg_infinity());
    for (i, orbit) in orbits.iter().enumerate() {
        let avg = orbit.average(log_m);
        if avg < lo {
            lo = avg;
            i_min = i;
        }
        if avg > hi {
            hi = avg;
            i_max = i;
        }
    }
    let probes = probe_averages(map, log_m, probe_len)?;
    let band = OrbitBand {
        min: probes.iter().copied().fold(S::infinity(), S::min),
        max: probes.iter().copied().fold(S::neg_infinity(), S::max),
        orbit_len: probe_len,
    };
    Ok(CriticalityReport {
        lambda_min: lo,
        lambda_max: hi,
        witness_min: orbits[i_min].clone(),
        witness_max: orbits[i_max].clone(),
        regime: Regime::from_extremes(lo, hi),
        max_period_used: max_period,
        long_orbit_bound: band,
    })
}

/// Running minimum of the Birkhoff averages of `log m` at the checkpoints.
pub fn gamma_estimate<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    start: &OrbitStart<S>,
    checkpoints: &[usize],
) -> Result<Vec<S>, ErgodicError> {
    let Some(&last) = checkpoints.last() else {
        return Err(ErgodicError::InvalidArgument("no checkpoints".into()));
    };
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ErgodicError::InvalidArgument(
            "checkpoints must be positive and increasing".into(),
        ));
    }
    let orbit = map.orbit_from(start, last)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut sum = S::zero();
    let mut running = S::infinity();
    let mut next = 0;
    for (k, &x) in orbit.iter().enumerate() {
        sum = sum + family.log_mean(x);
        if k + 1 == checkpoints[next] {
            running = running.min(sum / S::of_usize(k + 1));
            out.push(running);
            next += 1;
        }
    }
    Ok(out)
}

/// `F(x) = log ∂_s φ(x, q(Tx))` along each point of a periodic orbit.
pub fn fibre_observable_on_cycle<S: Scalar>(
    family: &ReproductionFamily<S>,
    qfun: &ExtinctionSolution<S>,
    orbit: &PeriodicOrbit<S>,
) -> Vec<S> {
    let q = qfun.on_cycle(family, orbit);
    let p = orbit.period;
    (0..p)
        .map(|i| family.log_dphi(orbit.points[i], q[(i + 1) % p]))
        .collect()
}

fn mean<S: Scalar>(values: &[S]) -> S {
    values.iter().copied().sum::<S>() / S::of_usize(values.len().max(1))
}

/// Sup over starts of `A_L + 2|A_L − A_{L/2}|`, where `A_n` is the `n`-step average.
fn slack_bound<S: Scalar>(values: &[S], len: usize) -> S {
    let half = (len / 2).max(1);
    let a_half = mean(&values[..half]);
    let a_full = mean(&values[..len]);
    a_full + S::of(2.0) * (a_full - a_half).abs()
}

/// Bracket for `λ_F = sup_ν ∫ F dν` with `F(x) = log ∂_s φ(x, q(Tx))`.
pub fn fibre_exponent<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    qfun: &ExtinctionSolution<S>,
    max_period: usize,
    probe_len: usize,
) -> Result<FibreExponentReport<S>, ErgodicError> {
    if !qfun.is_certified() {
        return Err(ErgodicError::UncertifiedInput);
    }
    if max_period == 0 || probe_len < 2 {
        return Err(ErgodicError::InvalidArgument(
            "max_period ≥ 1 and probe_len ≥ 2 required".into(),
        ));
    }
    let orbits = map.periodic_points(max_period)?;
    let mut lower = S::neg_infinity();
    let mut witness = 0;
    let mut upper = S::neg_infinity();
    for (i, orbit) in orbits.iter().enumerate() {
        let f = fibre_observable_on_cycle(family, qfun, orbit);
        let avg = mean(&f);
        if avg > lower {
            lower = avg;
            witness = i;
        }
        let p = orbit.period;
        for start in 0..p {
            let unrolled: Vec<S> = (0..probe_len).map(|k| f[(start + k) % p]).collect();
            upper = upper.max(slack_bound(&unrolled, probe_len));
        }
    }

    // grid starts, using q on the grid and the node transport
    let q = &qfun.q.samples;
    let g = q.len();
    let transport = Transport::new(map, g);
    let f_grid: Vec<S> = (0..g)
        .map(|j| family.log_dphi(node(j, g), transport.pull(q, j)))
        .collect();
    let half = (probe_len / 2).max(1);
    let mut sums = f_grid.clone();
    let mut half_sums = None;
    for n in 2..=probe_len {
        sums = transport.sweep(&sums, |j, tail| f_grid[j] + tail);
        if n == half {
            half_sums = Some(sums.clone());
        }
    }
    let half_sums = half_sums.unwrap_or_else(|| f_grid.clone());
    for j in 0..g {
        let a_full = sums[j] / S::of_usize(probe_len);
        let a_half = half_sums[j] / S::of_usize(half);
        upper = upper.max(a_full + S::of(2.0) * (a_full - a_half).abs());
    }

    for start in map.cylinder_probes(PROBE_STARTS, probe_len + 1 + PULLBACK_STEPS, PROBE_SEED) {
        let (orbit, qv) = qfun.along_orbit(map, family, &start, probe_len + 1)?;
        let f: Vec<S> = (0..probe_len)
            .map(|k| family.log_dphi(orbit[k], qv[k + 1]))
            .collect();
        upper = upper.max(slack_bound(&f, probe_len));
    }

    let lambda_u = map.base_lyapunov(LYAPUNOV_STEPS);
    let alpha_star = if lambda_u > S::zero() {
        (-lower / lambda_u).min(S::one()).max(S::zero())
    } else {
        S::one()
    };
    Ok(FibreExponentReport {
        lambda_f: lower,
        lambda_u,
        alpha_star,
        periodic_lower_bound: lower,
        birkhoff_upper_bound: upper,
        witness: orbits[witness].clone(),
        probe_len,
    })
}

/// Growth rate of `sup_x log ∂_s φ^{(n)}(x, a)` on the grid of `qfun`, fitted over
/// `n ∈ [n_max/3, n_max]`.
pub fn fibre_rate_check<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    qfun: &ExtinctionSolution<S>,
    a: S,
    n_max: usize,
) -> Result<FibreRate<S>, ErgodicError> {
    if !(a > S::zero() && a <= S::one()) {
        return Err(ErgodicError::InvalidArgument(format!("a = {a} outside (0, 1]")));
    }
    if n_max < 3 {
        return Err(ErgodicError::InvalidArgument("n_max must be at least 3".into()));
    }
    let g = qfun.q.len();
    let transport = Transport::new(map, g);
    let mut values = vec![a; g];
    let mut logs = vec![S::zero(); g];
    let mut sups = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let pulled: Vec<S> = (0..g).map(|j| transport.pull(&values, j)).collect();
        logs = transport.sweep(&logs, |j, tail| tail + family.log_dphi(node(j, g), pulled[j]));
        values = (0..g).map(|j| family.phi(node(j, g), pulled[j])).collect();
        sups.push((n, logs.iter().copied().fold(S::neg_infinity(), S::max)));
    }
    let lo = (n_max / 3).max(1);
    let window: Vec<_> = sups.iter().filter(|(n, _)| *n >= lo).collect();
    let xs: Vec<S> = window.iter().map(|(n, _)| S::of_usize(*n)).collect();
    let ys: Vec<S> = window.iter().map(|(_, v)| *v).collect();
    Ok(FibreRate {
        slope: least_squares_slope(&xs, &ys),
        fit_window: (lo, n_max),
        sup_averages: sups
            .into_iter()
            .map(|(n, v)| (n, v / S::of_usize(n)))
            .collect(),
    })
}
