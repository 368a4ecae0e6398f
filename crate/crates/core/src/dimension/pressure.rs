use serde::{Deserialize, Serialize};

use super::DimensionError;
use crate::dynamics::{CirclePoint, EnvironmentMap};
use crate::scalar::Scalar;

/// Iteration cap for the Perron power iteration.
pub const MAX_POWER_STEPS: usize = 100_000;
const POWER_TOL: f64 = 1e-13;

/// Transfer matrix of a locally constant potential on the full `p`-shift.
///
/// The state space is the set of words of length `depth`; word `w` may be followed
/// by `w' = (w mod p^{depth−1})·p + j`, with weight `exp(ψ_w)`. The matrix is never
/// stored: it is applied implicitly in `O(p^{depth+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PressureModel<S> {
    pub depth: usize,
    pub alphabet: usize,
    pub potential: Vec<S>,
    pub potential_id: String,
}

/// Leading eigen-data of a [`PressureModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct Perron<S> {
    /// `log ρ`, the pressure.
    pub log_rho: S,
    pub right: Vec<S>,
    pub left: Vec<S>,
    pub steps: usize,
}

impl<S: Scalar> Perron<S> {
    /// Equilibrium weights `π_w = l_w r_w / ⟨l, r⟩` of the depth-`n` cylinders.
    pub fn gibbs(&self) -> Vec<S> {
        let raw: Vec<S> = self.left.iter().zip(&self.right).map(|(&l, &r)| l * r).collect();
        let total: S = raw.iter().copied().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    pub fn gibbs_mean(&self, values: &[S]) -> S {
        self.gibbs().iter().zip(values).map(|(&p, &v)| p * v).sum()
    }
}

/// Points at which potentials are sampled: the centres of the depth-`n` cylinders.
pub fn cylinder_centers<S: Scalar>(map: &EnvironmentMap<S>, depth: usize) -> Vec<CirclePoint<S>> {
    map.cylinder_endpoints(depth)
        .into_iter()
        .map(|(a, b)| CirclePoint::new((a + b) / S::of(2.0)))
        .collect()
}

impl<S: Scalar> PressureModel<S> {
    pub fn new(
        alphabet: usize,
        depth: usize,
        potential: Vec<S>,
        potential_id: impl Into<String>,
    ) -> Result<Self, DimensionError> {
        if depth == 0 || alphabet < 2 {
            return Err(DimensionError::InvalidArgument(
                "depth ≥ 1 and alphabet ≥ 2 required".into(),
            ));
        }
        let states = alphabet
            .checked_pow(depth as u32)
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| DimensionError::InvalidArgument(format!("depth {depth} too large")))?;
        if potential.len() != states {
            return Err(DimensionError::InvalidArgument(format!(
                "potential has {} entries, expected {states}",
                potential.len()
            )));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(DimensionError::InvalidArgument("potential is not finite".into()));
        }
        Ok(PressureModel {
            depth,
            alphabet,
            potential,
            potential_id: potential_id.into(),
        })
    }

    /// Samples `psi` at the cylinder centres of `map`.
    pub fn from_potential<F: Fn(CirclePoint<S>) -> S>(
        map: &EnvironmentMap<S>,
        depth: usize,
        psi: F,
        potential_id: impl Into<String>,
    ) -> Result<Self, DimensionError> {
        let values = cylinder_centers(map, depth).into_iter().map(psi).collect();
        Self::new(map.degree() as usize, depth, values, potential_id)
    }

    pub fn states(&self) -> usize {
        self.potential.len()
    }

    fn shifted_weights(&self) -> (Vec<S>, S) {
        let shift = self
            .potential
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max);
        (self.potential.iter().map(|&v| (v - shift).exp()).collect(), shift)
    }

    /// `(Mv)_w = e^{ψ_w} Σ_j v_{(w mod p^{n−1})p + j}`.
    fn apply(&self, weights: &[S], v: &[S], out: &mut [S]) {
        let p = self.alphabet;
        let tail = self.states() / p;
        for (w, slot) in out.iter_mut().enumerate() {
            let base = (w % tail) * p;
            let s: S = v[base..base + p].iter().copied().sum();
            *slot = weights[w] * s;
        }
    }

    /// `(Mᵀu)_{w'} = Σ_i u_w e^{ψ_w}` over the `p` predecessors `w = i·p^{n−1} + ⌊w'/p⌋`.
    fn apply_transpose(&self, weights: &[S], u: &[S], out: &mut [S]) {
        let p = self.alphabet;
        let tail = self.states() / p;
        for (w2, slot) in out.iter_mut().enumerate() {
            let suffix = w2 / p;
            let mut s = S::zero();
            for i in 0..p {
                let w = i * tail + suffix;
                s = s + u[w] * weights[w];
            }
            *slot = s;
        }
    }

    fn power<F>(&self, apply: F, init: Option<&[S]>) -> Result<(S, Vec<S>, usize), DimensionError>
    where
        F: Fn(&[S], &mut [S]),
    {
        let n = self.states();
        let mut v: Vec<S> = match init {
            Some(x) if x.len() == n && x.iter().all(|&e| e > S::zero()) => x.to_vec(),
            _ => vec![S::one(); n],
        };
        normalize(&mut v);
        let mut next = vec![S::zero(); n];
        let tol = S::of(POWER_TOL).max(S::epsilon() * S::of(16.0));
        for step in 1..=MAX_POWER_STEPS {
            apply(&v, &mut next);
            let rho: S = next.iter().copied().sum();
            if !(rho > S::zero()) || !rho.is_finite() {
                return Err(DimensionError::EigenFailure { steps: step });
            }
            let mut change = S::zero();
            let mut top = S::zero();
            for (a, b) in next.iter_mut().zip(&v) {
                *a = *a / rho;
                change = change.max((*a - *b).abs());
                top = top.max(*a);
            }
            std::mem::swap(&mut v, &mut next);
            if change <= tol * top {
                return Ok((rho, v, step));
            }
        }
        Err(DimensionError::EigenFailure {
            steps: MAX_POWER_STEPS,
        })
    }

    /// Right and left Perron vectors and the pressure `log ρ`.
    pub fn perron(&self, warm_start: Option<&[S]>) -> Result<Perron<S>, DimensionError> {
        let (weights, shift) = self.shifted_weights();
        let (rho, right, steps) =
            self.power(|v, out| self.apply(&weights, v, out), warm_start)?;
        let (_, left, steps_left) =
            self.power(|u, out| self.apply_transpose(&weights, u, out), None)?;
        Ok(Perron {
            log_rho: rho.ln() + shift,
            right,
            left,
            steps: steps.max(steps_left),
        })
    }

    /// `log ρ` only.
    pub fn pressure(&self) -> Result<S, DimensionError> {
        let (weights, shift) = self.shifted_weights();
        let (rho, _, _) = self.power(|v, out| self.apply(&weights, v, out), None)?;
        Ok(rho.ln() + shift)
    }
}

fn normalize<S: Scalar>(v: &mut [S]) {
    let total: S = v.iter().copied().sum();
    for e in v.iter_mut() {
        *e = *e / total;
    }
}

/// Topological pressure of `potential` from the depth-`n` cylinder matrix.
pub fn pressure<S: Scalar, F: Fn(CirclePoint<S>) -> S>(
    map: &EnvironmentMap<S>,
    potential: F,
    depth: usize,
) -> Result<S, DimensionError> {
    PressureModel::from_potential(map, depth, potential, "custom")?.pressure()
}

/// `∫ observable dν_Leb`, with the absolutely continuous invariant measure
/// obtained as the equilibrium state of `−log T′`.
pub fn acip_mean<S: Scalar, F: Fn(CirclePoint<S>) -> S>(
    map: &EnvironmentMap<S>,
    observable: F,
    depth: usize,
) -> Result<S, DimensionError> {
    let centers = cylinder_centers(map, depth);
    let values: Vec<S> = centers.iter().map(|&x| observable(x)).collect();
    if map.is_linear() {
        // the equilibrium state of a constant potential is the uniform Bernoulli measure
        return Ok(values.iter().copied().sum::<S>() / S::of_usize(values.len()));
    }
    let psi = centers.iter().map(|&x| -map.derivative(x).ln()).collect();
    let model = PressureModel::new(map.degree() as usize, depth, psi, "-log T'")?;
    Ok(model.perron(None)?.gibbs_mean(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{LN_2, TAU};

    #[test]
    fn zero_potential_gives_entropy() {
        let t = EnvironmentMap::<f64>::doubling();
        for depth in 1..=12 {
            assert_eq!(pressure(&t, |_| 0.0, depth).unwrap(), LN_2);
        }
        let t3 = EnvironmentMap::<f64>::affine(3).unwrap();
        assert_abs_diff_eq!(pressure(&t3, |_| 0.0, 5).unwrap(), 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn constant_potential_shifts_pressure() {
        let t = EnvironmentMap::<f64>::doubling();
        for c in [-1.0, 0.5, 3.0] {
            assert_abs_diff_eq!(pressure(&t, |_| c, 8).unwrap(), LN_2 + c, epsilon = 1e-12);
        }
    }

    #[test]
    fn depth_convergence() {
        let t = EnvironmentMap::<f64>::doubling();
        let psi = |x: CirclePoint<f64>| -(TAU * x.value()).cos();
        let a = pressure(&t, psi, 10).unwrap();
        let b = pressure(&t, psi, 12).unwrap();
        assert!((a - b).abs() < 1e-3);
    }

    #[test]
    fn gibbs_derivative_identity() {
        let t = EnvironmentMap::<f64>::doubling();
        let depth = 8;
        let phi: Vec<f64> = cylinder_centers(&t, depth)
            .iter()
            .map(|x| 0.3 - (TAU * x.value()).cos())
            .collect();
        let at = |s: f64| {
            PressureModel::new(2, depth, phi.iter().map(|v| s * v).collect(), "t·φ").unwrap()
        };
        for s in [-2.0, -0.5, 0.0, 1.3] {
            let h = 1e-4;
            let numeric = (at(s + h).pressure().unwrap() - at(s - h).pressure().unwrap()) / (2.0 * h);
            let gibbs = at(s).perron(None).unwrap().gibbs_mean(&phi);
            assert_abs_diff_eq!(numeric, gibbs, epsilon = 1e-5);
        }
    }

    #[test]
    fn acip_means() {
        let t = EnvironmentMap::<f64>::doubling();
        assert_abs_diff_eq!(acip_mean(&t, |x| (TAU * x.value()).cos(), 12).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(acip_mean(&t, |_| 2.5, 12).unwrap(), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            acip_mean(&t, |x| 0.7 - (TAU * x.value()).cos(), 12).unwrap(),
            0.7,
            epsilon = 1e-10
        );
    }

    #[test]
    fn smooth_acip_is_invariant() {
        // the acip of a circle map is invariant: ∫ f∘T dν = ∫ f dν
        let t = EnvironmentMap::<f64>::smooth_expanding(2, 0.6).unwrap();
        let f = |x: CirclePoint<f64>| (TAU * x.value()).sin() + 0.5 * (2.0 * TAU * x.value()).cos();
        let direct = acip_mean(&t, f, 11).unwrap();
        let pulled = acip_mean(&t, |x| f(t.apply(x)), 11).unwrap();
        assert_abs_diff_eq!(direct, pulled, epsilon = 1e-3);
        // and P(−log T′) = 0
        let p = pressure(&t, |x| -t.derivative(x).ln(), 11).unwrap();
        assert!(p.abs() < 1e-3, "{p}");
    }

    #[test]
    fn left_and_right_vectors_are_eigenvectors() {
        let model = PressureModel::new(2, 3, vec![0.1f64, -0.4, 0.7, 0.2, -1.0, 0.0, 0.3, 0.5], "x").unwrap();
        let perron = model.perron(None).unwrap();
        let (weights, shift) = model.shifted_weights();
        let rho = (perron.log_rho - shift).exp();
        let mut out = vec![0.0; 8];
        model.apply(&weights, &perron.right, &mut out);
        for (a, b) in out.iter().zip(&perron.right) {
            assert_abs_diff_eq!(*a, rho * b, epsilon = 1e-12);
        }
        model.apply_transpose(&weights, &perron.left, &mut out);
        for (a, b) in out.iter().zip(&perron.left) {
            assert_abs_diff_eq!(*a, rho * b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(perron.gibbs().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }
}
