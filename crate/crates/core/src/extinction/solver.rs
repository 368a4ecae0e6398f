use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::grid::{node, GridFunction, Transport};
use super::holder::holder_seminorm;
use super::ExtinctionError;
use crate::dynamics::{CirclePoint, EnvironmentMap, OrbitStart, PeriodicOrbit};
use crate::reproduction::ReproductionFamily;
use crate::scalar::{effective_tol, Scalar};

/// Number of backward steps used to evaluate `q` away from the grid.
pub const PULLBACK_STEPS: usize = 24;

/// Longest block length tried when looking for an upper bracket.
pub const MAX_BLOCK: usize = 1024;

/// Two-sided enclosure of the extinction graph produced by [`solve_q`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BracketCertificate<S> {
    pub lower: GridFunction<S>,
    pub upper: GridFunction<S>,
    #[serde(rename = "K")]
    pub k: S,
    #[serde(rename = "N")]
    pub block: usize,
    pub width: S,
    pub blocks_used: usize,
    /// Bracket width after each completed block.
    pub history: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ExtinctionSolution<S> {
    pub q: GridFunction<S>,
    pub certificate: Option<BracketCertificate<S>>,
}

impl<S: Scalar> ExtinctionSolution<S> {
    pub fn is_certified(&self) -> bool {
        self.certificate.is_some()
    }

    /// `q(x)` off the grid: `φ^{(k)}(x, q̃(T^k x))` with `q̃` the interpolated samples.
    pub fn value_at(
        &self,
        map: &EnvironmentMap<S>,
        family: &ReproductionFamily<S>,
        x: CirclePoint<S>,
    ) -> S {
        let orbit = map.orbit(x, PULLBACK_STEPS + 1);
        self.pull_back(family, &orbit)[0]
    }

    /// `q` at every point of `orbit`, assuming consecutive entries are `T`-images.
    /// Only the entries at least [`PULLBACK_STEPS`] before the end are refined.
    pub fn pull_back(&self, family: &ReproductionFamily<S>, orbit: &[CirclePoint<S>]) -> Vec<S> {
        let mut out = vec![S::zero(); orbit.len()];
        let Some(&last) = orbit.last() else {
            return out;
        };
        let mut v = self.q.eval(last);
        out[orbit.len() - 1] = v;
        for k in (0..orbit.len() - 1).rev() {
            v = family.phi(orbit[k], v);
            out[k] = v;
        }
        out
    }

    /// `q` at every point of a periodic orbit.
    pub fn on_cycle(&self, family: &ReproductionFamily<S>, orbit: &PeriodicOrbit<S>) -> Vec<S> {
        let p = orbit.period;
        let laps = PULLBACK_STEPS.div_ceil(p) + 1;
        let unrolled: Vec<_> = (0..laps * p).map(|i| orbit.points[i % p]).collect();
        let mut values = self.pull_back(family, &unrolled);
        values.truncate(p);
        values
    }

    /// `q` along the orbit of `start`: `n` values.
    pub fn along_orbit(
        &self,
        map: &EnvironmentMap<S>,
        family: &ReproductionFamily<S>,
        start: &OrbitStart<S>,
        n: usize,
    ) -> Result<(Vec<CirclePoint<S>>, Vec<S>), ExtinctionError> {
        let mut orbit = map.orbit_from(start, n + PULLBACK_STEPS)?;
        let mut values = self.pull_back(family, &orbit);
        orbit.truncate(n);
        values.truncate(n);
        Ok((orbit, values))
    }
}

/// `φ^{(n)}(x, s)`, composed backwards along the orbit of `x`.
pub fn pgf_iterate<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    x: CirclePoint<S>,
    s: S,
    n: usize,
) -> Result<S, ExtinctionError> {
    check_unit(s)?;
    let orbit = map.orbit(x, n);
    Ok(compose_along(family, &orbit, s))
}

/// `φ^{(n)}` along an explicit orbit `(x, Tx, …, T^{n−1}x)`.
pub fn compose_along<S: Scalar>(
    family: &ReproductionFamily<S>,
    orbit: &[CirclePoint<S>],
    s: S,
) -> S {
    orbit.iter().rev().fold(s, |v, &y| family.phi(y, v))
}

/// `log ∂_s φ^{(n)}(x, s) = Σ_{k<n} log ∂_s φ(T^k x, φ^{(n−1−k)}(T^{k+1}x, s))`.
pub fn log_derivative_iterate<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    x: CirclePoint<S>,
    s: S,
    n: usize,
) -> Result<S, ExtinctionError> {
    check_unit(s)?;
    let orbit = map.orbit(x, n);
    let mut v = s;
    let mut total = S::zero();
    for &y in orbit.iter().rev() {
        total = total + family.log_dphi(y, v);
        v = family.phi(y, v);
    }
    Ok(total)
}

fn check_unit<S: Scalar>(s: S) -> Result<(), ExtinctionError> {
    if s >= S::zero() && s <= S::one() {
        Ok(())
    } else {
        Err(ExtinctionError::DomainError { s: s.as_f64() })
    }
}

fn check_grid(g: usize) -> Result<(), ExtinctionError> {
    if g < 2 || !g.is_power_of_two() {
        return Err(ExtinctionError::InvalidGrid(format!(
            "grid size must be a power of two ≥ 2, got {g}"
        )));
    }
    Ok(())
}

/// `sup_j |f(x_j) − φ(x_j, f(T x_j))|`.
pub fn residual<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    f: &GridFunction<S>,
) -> S {
    let g = f.len();
    let transport = Transport::new(map, g);
    let image = transport.sweep(&f.samples, |j, fy| family.phi(node(j, g), fy));
    f.samples
        .iter()
        .zip(&image)
        .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

fn apply_operator<S: Scalar>(
    transport: &Transport<S>,
    family: &ReproductionFamily<S>,
    f: &[S],
) -> Vec<S> {
    let g = f.len();
    transport.sweep(f, |j, fy| family.phi(node(j, g), fy))
}

/// The increasing iterates `φ^{(k)}(·, 0)`, run until successive iterates differ by
/// less than `tol` or `max_iter` sweeps are spent. Valid in every regime.
pub fn solve_lower<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    g: usize,
    tol: S,
    max_iter: usize,
) -> Result<GridFunction<S>, ExtinctionError> {
    check_grid(g)?;
    let tol = effective_tol(tol);
    let transport = Transport::new(map, g);
    let mut u = vec![S::zero(); g];
    for _ in 0..max_iter {
        let next = apply_operator(&transport, family, &u);
        let step = next
            .iter()
            .zip(&u)
            .fold(S::zero(), |m, (&a, &b)| m.max(a - b));
        u = next;
        if step < tol {
            break;
        }
    }
    GridFunction::new(u, transport.interpolation())
}

/// Minimum over grid orbits of the `N`-step Birkhoff average of `log m`, for
/// `N = 1, 2, 4, …, MAX_BLOCK`.
fn block_averages<S: Scalar>(
    transport: &Transport<S>,
    family: &ReproductionFamily<S>,
    g: usize,
) -> Vec<(usize, S)> {
    let log_m: Vec<S> = (0..g).map(|j| family.log_mean(node(j, g))).collect();
    let mut sums = log_m.clone();
    let mut out = Vec::new();
    let mut next_report = 1;
    for n in 1..=MAX_BLOCK {
        if n > 1 {
            sums = transport.sweep(&sums, |j, tail| log_m[j] + tail);
        }
        if n == next_report {
            let min = sums.iter().copied().fold(S::infinity(), S::min);
            out.push((n, min / S::of_usize(n)));
            next_report *= 2;
        }
    }
    out
}

/// `min_j log ∂_s φ^{(N)}(x_j, t)` by the grid form of the chain rule.
fn min_log_block_derivative<S: Scalar>(
    transport: &Transport<S>,
    family: &ReproductionFamily<S>,
    g: usize,
    block: usize,
    t: S,
) -> S {
    let mut values = vec![t; g];
    let mut logs = vec![S::zero(); g];
    for _ in 0..block {
        let pulled: Vec<S> = (0..g).map(|j| transport.pull(&values, j)).collect();
        logs = transport.sweep(&logs, |j, tail| tail + family.log_dphi(node(j, g), pulled[j]));
        values = (0..g).map(|j| family.phi(node(j, g), pulled[j])).collect();
    }
    logs.into_iter().fold(S::infinity(), S::min)
}

/// Smallest `K ∈ {1/64, …, 63/64}` with `∂_s φ^{(N)}(·, K) > 1` on the grid.
/// `∂_s φ^{(N)}(x, ·)` is nondecreasing, so passing values form an upper interval.
fn scan_k<S: Scalar>(
    transport: &Transport<S>,
    family: &ReproductionFamily<S>,
    g: usize,
    block: usize,
) -> Option<S> {
    let passes = |i: usize| {
        min_log_block_derivative(transport, family, g, block, S::of_usize(i) / S::of(64.0))
            > S::zero()
    };
    if !passes(63) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, 63usize);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(S::of_usize(hi) / S::of(64.0))
}

/// Block length `N` and level `K` such that `φ^{(N)}(·, K)` stays below `K`.
fn find_bracket<S: Scalar>(
    transport: &Transport<S>,
    family: &ReproductionFamily<S>,
    g: usize,
) -> Result<(usize, S), ExtinctionError> {
    let averages = block_averages(transport, family, g);
    let asymptote = averages.last().map(|&(_, a)| a).unwrap_or_else(S::zero);
    if asymptote <= S::zero() {
        return Err(ExtinctionError::NoUpperBracket {
            reason: format!(
                "grid-orbit averages of log m approach {asymptote}, not uniformly positive"
            ),
        });
    }
    let eps = asymptote / S::of(2.0);
    let first = averages
        .iter()
        .find(|&&(_, a)| a > eps)
        .map(|&(n, _)| n)
        .unwrap_or(MAX_BLOCK);
    let mut block = first;
    while block <= MAX_BLOCK {
        if let Some(k) = scan_k(transport, family, g, block) {
            debug!("upper bracket: N = {block}, K = {k}");
            return Ok((block, k));
        }
        block *= 2;
    }
    Err(ExtinctionError::NoUpperBracket {
        reason: format!("no K < 1 with ∂φ^(N)(·,K) > 1 for N ≤ {MAX_BLOCK}"),
    })
}

/// Solves `q(x) = φ(x, q(Tx))` on a `G`-point grid between the increasing
/// iterates from `0` and the block-decreasing iterates from a constant `K < 1`.
pub fn solve_q<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    g: usize,
    tol: S,
    max_blocks: usize,
) -> Result<ExtinctionSolution<S>, ExtinctionError> {
    check_grid(g)?;
    if !(tol > S::zero()) {
        return Err(ExtinctionError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let tol = effective_tol(tol);
    let transport = Transport::new(map, g);
    let (block, k) = find_bracket(&transport, family, g)?;

    let mut lower = vec![S::zero(); g];
    let mut upper = vec![k; g];
    let mut history = Vec::new();
    let mut width = S::one();
    let mut blocks_used = 0;
    while blocks_used < max_blocks {
        for _ in 0..block {
            lower = apply_operator(&transport, family, &lower);
            upper = apply_operator(&transport, family, &upper);
        }
        blocks_used += 1;
        width = upper
            .iter()
            .zip(&lower)
            .fold(S::zero(), |m, (&u, &l)| m.max(u - l));
        history.push(width);
        if width < tol {
            break;
        }
    }
    if !(width < tol) {
        return Err(ExtinctionError::Stalled {
            blocks: blocks_used,
            width: width.as_f64(),
        });
    }
    info!("bracket closed after {blocks_used} blocks of {block}, width {width}");
    let interpolation = transport.interpolation();
    let q = lower
        .iter()
        .zip(&upper)
        .map(|(&l, &u)| (l + u) / S::of(2.0))
        .collect();
    Ok(ExtinctionSolution {
        q: GridFunction::new(q, interpolation)?,
        certificate: Some(BracketCertificate {
            lower: GridFunction::new(lower, interpolation)?,
            upper: GridFunction::new(upper, interpolation)?,
            k,
            block,
            width,
            blocks_used,
            history,
        }),
    })
}

/// One row of [`convergence_profile`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ConvergenceRow<S> {
    pub n: usize,
    pub sup_norm: S,
    pub beta_norm: S,
}

/// Sup norm and β-Hölder norm of `q − φ^{(n)}(·, 0)` for `n = 0, …, n_max`.
///
/// The differences are propagated directly,
/// `e_{n+1}(x) = φ(x, q(Tx)) − φ(x, q(Tx) − e_n(Tx))`,
/// so they stay meaningful far below the rounding level of `q` itself.
pub fn convergence_profile<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    qfun: &ExtinctionSolution<S>,
    beta: S,
    n_max: usize,
) -> Result<Vec<ConvergenceRow<S>>, ExtinctionError> {
    if !(beta > S::zero() && beta <= S::one()) {
        return Err(ExtinctionError::InvalidArgument(format!("β = {beta} outside (0, 1]")));
    }
    let q = &qfun.q.samples;
    let g = q.len();
    let transport = Transport::new(map, g);
    let q_image: Vec<S> = (0..g).map(|j| transport.pull(q, j)).collect();
    let mut e = q.clone();
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let f = GridFunction::new(e.clone(), transport.interpolation())?;
        let rep = holder_seminorm(&f, beta);
        rows.push(ConvergenceRow {
            n,
            sup_norm: rep.sup_norm,
            beta_norm: rep.norm(),
        });
        e = transport.sweep(&e, |j, ey| {
            let s = q_image[j];
            let ey = ey.max(S::zero()).min(s);
            family.pgf_decrement(node(j, g), s, ey).max(S::zero())
        });
    }
    Ok(rows)
}
