//! Hausdorff dimension of level sets of the Lyapunov exponent of `log m`.
//!
//! For a level `c`, the dimension `D(c)` of the set of points whose Birkhoff averages
//! of `log m` converge to `c` is computed by a thermodynamic formalism on depth-`n`
//! cylinders: `D(c)` is the unique root of
//!
//! ```text
//! min_t P(t (log m − c) − D log T′) = 0 .
//! ```
//!
//! The bad set (points where the extinction graph fails to be smooth) has dimension
//! `D(0)` when the Lebesgue average of `log m` is positive, and full dimension otherwise.

mod oracle;
mod pressure;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CirclePoint, DynamicsError, EnvironmentMap};
use crate::reproduction::{ReproductionError, ReproductionFamily};
use crate::scalar::{effective_tol, Scalar};

pub use oracle::{entropy_oracle, OracleResult, MAX_MEMORY};
pub use pressure::{acip_mean, cylinder_centers, pressure, Perron, PressureModel, MAX_POWER_STEPS};

pub const DEFAULT_DEPTH: usize = 12;
/// Longest period used to locate the range of admissible levels.
pub const EXTREMES_PERIOD: usize = 10;
const T_LIMIT: f64 = 1.0e3;
const ROOT_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("level {level} outside the open range ({lo}, {hi})")]
    OutOfRange { level: f64, lo: f64, hi: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("power iteration did not settle after {steps} steps")]
    EigenFailure { steps: usize },
    #[error("not in the critical regime: {0}")]
    RegimeError(String),
    #[error("level {level} not attainable by the Markov approximation")]
    InfeasibleLevel { level: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reproduction(#[from] ReproductionError),
}

/// Solution of the pressure equations at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DimensionResult<S> {
    pub level: S,
    #[serde(rename = "D")]
    pub d: S,
    /// Multiplier `t` of `log m − level` in the equilibrium potential.
    pub gibbs_parameter: S,
    pub pressure_residual: S,
    pub constraint_residual: S,
    pub depth: usize,
}

/// Dimension of the set where the extinction graph is not smooth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BadSetDimension<S> {
    pub dimension: S,
    /// `∫ log m dLeb`; the plateau `dimension = 1` applies when this is `≤ 0`.
    pub acip_mean: S,
    pub plateau: bool,
    /// Pressure solution at level 0, absent on the plateau.
    pub detail: Option<DimensionResult<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint<S> {
    pub parameter: S,
    pub outcome: Result<BadSetDimension<S>, DimensionError>,
}

/// Cylinder data shared by every pressure evaluation at a fixed depth.
struct Cylinders<S> {
    alphabet: usize,
    depth: usize,
    log_m: Vec<S>,
    /// `log T′` at the centres, or `None` when it is the constant `log p`.
    log_dt: Option<Vec<S>>,
    log_p: S,
}

impl<S: Scalar> Cylinders<S> {
    fn new(map: &EnvironmentMap<S>, family: &ReproductionFamily<S>, depth: usize) -> Self {
        let centers = cylinder_centers(map, depth);
        Cylinders {
            alphabet: map.degree() as usize,
            depth,
            log_m: centers.iter().map(|&x| family.log_mean(x)).collect(),
            log_dt: (!map.is_linear())
                .then(|| centers.iter().map(|&x| map.derivative(x).ln()).collect()),
            log_p: S::of_usize(map.degree() as usize).ln(),
        }
    }

    fn model(&self, t: S, level: S, d: S) -> Result<PressureModel<S>, DimensionError> {
        let psi = match &self.log_dt {
            Some(dt) => self
                .log_m
                .iter()
                .zip(dt)
                .map(|(&m, &g)| t * (m - level) - d * g)
                .collect(),
            None => self.log_m.iter().map(|&m| t * (m - level)).collect(),
        };
        PressureModel::new(self.alphabet, self.depth, psi, "t(log m − c) − D log T'")
    }

    /// `(P, Gibbs mean of log m − level)` at `(t, D)`, warm-started from `init`.
    fn evaluate(
        &self,
        t: S,
        level: S,
        d: S,
        init: &mut Option<Vec<S>>,
    ) -> Result<(S, S), DimensionError> {
        let perron = self.model(t, level, d)?.perron(init.as_deref())?;
        let shifted: Vec<S> = self.log_m.iter().map(|&m| m - level).collect();
        let mean = perron.gibbs_mean(&shifted);
        let p = perron.log_rho;
        *init = Some(perron.right);
        Ok((p, mean))
    }

    /// Minimiser of `t ↦ P(t(log m − level) − D log T′)`, as the root of its derivative.
    fn stationary_t(&self, level: S, d: S, tol: S) -> Result<(S, S, S), DimensionError> {
        let mut init = None;
        let mut eval = |t: S| self.evaluate(t, level, d, &mut init);
        let (p0, g0) = eval(S::zero())?;
        if g0.abs() <= tol {
            return Ok((S::zero(), p0, g0));
        }
        // the derivative is increasing in t; walk away from 0 until it changes sign
        let dir = if g0 > S::zero() { -S::one() } else { S::one() };
        let (mut a, mut ga) = (S::zero(), g0);
        let mut step = S::one();
        let (b, gb) = loop {
            let t = dir * step;
            let (_, g) = eval(t)?;
            if g.abs() <= tol {
                let (p, g) = eval(t)?;
                return Ok((t, p, g));
            }
            if (g > S::zero()) != (g0 > S::zero()) {
                break (t, g);
            }
            a = t;
            ga = g;
            step = step * S::of(2.0);
            if step > S::of(T_LIMIT) {
                return Err(DimensionError::NoConvergence(format!(
                    "no sign change of the Gibbs constraint for |t| ≤ {T_LIMIT}"
                )));
            }
        };
        let t = illinois(|t| Ok(eval(t)?.1), a, ga, b, gb, tol)?;
        let (p, g) = eval(t)?;
        Ok((t, p, g))
    }
}

/// Root of a bracketed scalar function by the Illinois variant of regula falsi.
/// Stops when `|f| ≤ ftol` or the bracket has collapsed to rounding level.
fn illinois<S: Scalar, F>(
    mut f: F,
    mut a: S,
    mut fa: S,
    mut b: S,
    mut fb: S,
    ftol: S,
) -> Result<S, DimensionError>
where
    F: FnMut(S) -> Result<S, DimensionError>,
{
    let mut side = 0i8;
    for _ in 0..ROOT_STEPS {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = (a + b) / S::of(2.0);
        }
        let fc = f(c)?;
        if fc.abs() <= ftol || (b - a).abs() <= S::epsilon() * S::of(4.0) * c.abs().max(S::one()) {
            return Ok(c);
        }
        if (fc > S::zero()) == (fb > S::zero()) {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa / S::of(2.0);
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb / S::of(2.0);
            }
            side = 1;
        }
    }
    Err(DimensionError::NoConvergence(format!(
        "root not isolated after {ROOT_STEPS} steps"
    )))
}

/// `(min, max)` of `log m` averages over periodic orbits of period `≤ max_period`.
pub fn periodic_extremes<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    max_period: usize,
) -> Result<(S, S), DimensionError> {
    let orbits = map.periodic_points(max_period)?;
    Ok(orbits
        .iter()
        .map(|o| o.average(|x| family.log_mean(x)))
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// `D(level)` from depth-`depth` cylinders.
///
/// For linear maps `log T′` is constant and `D = min_t P(t(log m − level)) / log p`.
/// Otherwise `D` is located by bisection on `[0, 1]` of the decreasing function
/// `D ↦ min_t P(t(log m − level) − D log T′)`.
pub fn dimension_at<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    level: S,
    depth: usize,
    tol: S,
) -> Result<DimensionResult<S>, DimensionError> {
    family.validate()?;
    if !(tol > S::zero()) {
        return Err(DimensionError::InvalidArgument("tol must be positive".into()));
    }
    let tol = effective_tol(tol);
    let (lo, hi) = periodic_extremes(map, family, EXTREMES_PERIOD.min(depth.max(2)))?;
    if !(level > lo && level < hi) {
        return Err(DimensionError::OutOfRange {
            level: level.as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let cyl = Cylinders::new(map, family, depth);
    if cyl.log_dt.is_none() {
        let (t, p, g) = cyl.stationary_t(level, S::zero(), tol)?;
        let d = p / cyl.log_p;
        return Ok(DimensionResult {
            level,
            d,
            gibbs_parameter: t,
            pressure_residual: (p - d * cyl.log_p).abs(),
            constraint_residual: g.abs(),
            depth,
        });
    }

    let (mut a, mut b) = (S::zero(), S::one());
    let mut best = None;
    for _ in 0..ROOT_STEPS {
        let d = (a + b) / S::of(2.0);
        let (t, p, g) = cyl.stationary_t(level, d, tol)?;
        best = Some((d, t, p, g));
        if p.abs() <= tol || b - a <= tol {
            break;
        }
        if p > S::zero() {
            a = d;
        } else {
            b = d;
        }
    }
    let (d, t, p, g) = best.expect("at least one bisection step");
    if p.abs() > tol && b - a > tol {
        return Err(DimensionError::NoConvergence("bisection on D did not settle".into()));
    }
    Ok(DimensionResult {
        level,
        d,
        gibbs_parameter: t,
        pressure_residual: p.abs(),
        constraint_residual: g.abs(),
        depth,
    })
}

/// Dimension of the bad set of a critical configuration.
pub fn bad_set_dimension<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    depth: usize,
    tol: S,
) -> Result<BadSetDimension<S>, DimensionError> {
    let orbits = map.periodic_points(EXTREMES_PERIOD.min(depth.max(2)))?;
    let points: Vec<_> = orbits.iter().flat_map(|o| o.points.iter().copied()).collect();
    family.check_h1(&points)?;
    let tail = family.domination_tail()?;
    if !tail.second_moment.is_finite() {
        return Err(DimensionError::RegimeError("offspring laws lack a second moment".into()));
    }
    let (lo, hi) = orbits
        .iter()
        .map(|o| o.average(|x| family.log_mean(x)))
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let eps = S::tol_floor();
    if !(lo < -eps && hi > eps) {
        return Err(DimensionError::RegimeError(format!(
            "need λ_min < 0 < λ_max, found λ_min = {lo}, λ_max = {hi}"
        )));
    }
    let mean = acip_mean(map, |x: CirclePoint<S>| family.log_mean(x), depth)?;
    if mean <= S::zero() {
        return Ok(BadSetDimension {
            dimension: S::one(),
            acip_mean: mean,
            plateau: true,
            detail: None,
        });
    }
    let detail = dimension_at(map, family, S::zero(), depth, tol)?;
    Ok(BadSetDimension {
        dimension: detail.d,
        acip_mean: mean,
        plateau: false,
        detail: Some(detail),
    })
}

/// [`bad_set_dimension`] across a parameter grid of the family, in parallel.
/// Failures are kept per point.
pub fn dimension_curve<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    parameters: &[S],
    depth: usize,
    tol: S,
) -> Result<Vec<CurvePoint<S>>, DimensionError> {
    if family.parameter().is_none() {
        return Err(DimensionError::InvalidArgument(
            "family has no scalar parameter to sweep".into(),
        ));
    }
    Ok(parameters
        .par_iter()
        .map(|&parameter| {
            let outcome = family
                .with_parameter(parameter)
                .ok_or_else(|| DimensionError::InvalidArgument("parameter rejected".into()))
                .and_then(|f| bad_set_dimension(map, &f, depth, tol));
            CurvePoint { parameter, outcome }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn doubling() -> EnvironmentMap<f64> {
        EnvironmentMap::doubling()
    }

    #[test]
    fn plateau_for_nonpositive_mean() {
        for lambda in [-0.4, -0.2, 0.0] {
            let f = ReproductionFamily::poisson_cosine(lambda);
            let r = bad_set_dimension(&doubling(), &f, 10, 1e-10).unwrap();
            assert_eq!(r.dimension, 1.0, "λ = {lambda}");
        }
    }

    #[test]
    fn level_at_lebesgue_mean_has_full_dimension() {
        let f = ReproductionFamily::poisson_cosine(0.3);
        let r = dimension_at(&doubling(), &f, 0.3, 10, 1e-10).unwrap();
        assert_abs_diff_eq!(r.d, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.gibbs_parameter, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn known_values_and_residuals() {
        let f = ReproductionFamily::poisson_cosine(0.5);
        let r = bad_set_dimension(&doubling(), &f, 12, 1e-10).unwrap();
        let d = r.detail.unwrap();
        assert_abs_diff_eq!(r.dimension, 0.7399, epsilon = 2e-3);
        assert!(d.constraint_residual <= 1e-10);
        assert!(d.pressure_residual <= 1e-10);
        assert!(d.gibbs_parameter < 0.0);
    }

    #[test]
    fn dimension_decreases_with_lambda() {
        let f = ReproductionFamily::poisson_cosine(0.2);
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let curve = dimension_curve(&doubling(), &f, &grid, 10, 1e-10).unwrap();
        let ds: Vec<f64> = curve.iter().map(|c| c.outcome.as_ref().unwrap().dimension).collect();
        for w in ds.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(ds.iter().all(|&d| d > 0.0 && d < 1.0));
    }

    #[test]
    fn rejects_noncritical() {
        let f = ReproductionFamily::poisson_cosine(2.0);
        assert!(matches!(
            bad_set_dimension(&doubling(), &f, 8, 1e-10),
            Err(DimensionError::RegimeError(_))
        ));
        let f = ReproductionFamily::poisson_cosine(0.5);
        assert!(matches!(
            dimension_at(&doubling(), &f, 1.6, 8, 1e-10),
            Err(DimensionError::OutOfRange { .. })
        ));
    }

    #[test]
    fn agrees_with_markov_oracle() {
        for lambda in [0.3, 0.8] {
            let f = ReproductionFamily::poisson_cosine(lambda);
            let d = dimension_at(&doubling(), &f, 0.0, 12, 1e-10).unwrap().d;
            let o = entropy_oracle(&doubling(), &f, 0.0, 5).unwrap().value;
            assert!((d - o).abs() < 1e-2, "λ = {lambda}: {d} vs {o}");
        }
    }

    #[test]
    fn smooth_map_dimension() {
        let t = EnvironmentMap::<f64>::smooth_expanding(2, 0.4).unwrap();
        let f = ReproductionFamily::poisson_cosine(0.5);
        let r = dimension_at(&t, &f, 0.0, 8, 1e-8).unwrap();
        assert!(r.d > 0.0 && r.d < 1.0);
        assert!(r.pressure_residual <= 1e-8);
        let o = entropy_oracle(&t, &f, 0.0, 5).unwrap().value;
        assert!((r.d - o).abs() < 3e-2, "{} vs {o}", r.d);
    }

    #[test]
    fn illinois_finds_roots() {
        let r = illinois(|x: f64| Ok(x * x * x - 2.0), 0.0, -2.0, 2.0, 6.0, 1e-14).unwrap();
        assert_abs_diff_eq!(r, 2f64.cbrt(), epsilon = 1e-12);
    }
}
