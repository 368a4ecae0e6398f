use serde::{Deserialize, Serialize};

use super::{illinois, DimensionError};
use crate::dynamics::{CirclePoint, EnvironmentMap};
use crate::reproduction::ReproductionFamily;
use crate::scalar::Scalar;

pub const MAX_MEMORY: usize = 6;
const T_LIMIT: f64 = 500.0;
const DENSE_TOL: f64 = 1e-14;
const DENSE_STEPS: usize = 200_000;
const OUTER_STEPS: usize = 100;

const GAUSS_LEGENDRE_8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OracleResult<S> {
    /// `h(ν) / ∫ log T′ dν` for the optimal Markov measure `ν`.
    pub value: S,
    pub entropy: S,
    pub multiplier: S,
    pub memory: usize,
}

/// Lebesgue average of `f` over `[a, b]`.
fn interval_mean<S: Scalar, F: Fn(CirclePoint<S>) -> S>(f: &F, a: S, b: S) -> S {
    let half = (b - a) / S::of(2.0);
    let mid = (a + b) / S::of(2.0);
    let mut acc = S::zero();
    for &(node, weight) in &GAUSS_LEGENDRE_8 {
        let u = half * S::of(node);
        acc = acc + S::of(weight) * (f(CirclePoint::new(mid + u)) + f(CirclePoint::new(mid - u)));
    }
    acc / S::of(2.0)
}

/// Markov chain on words of length `k` whose edges are words of length `k + 1`.
struct EdgeChain<S> {
    states: usize,
    alphabet: usize,
    /// Edge observable: cylinder averages of `log m`.
    psi: Vec<S>,
    /// Edge cylinder averages of `log T′`.
    dlog: Vec<S>,
}

struct MarkovMeasure<S> {
    mean: S,
    entropy: S,
    expansion: S,
}

impl<S: Scalar> EdgeChain<S> {
    fn edge(&self, from: usize, j: usize) -> usize {
        from * self.alphabet + j
    }

    fn target(&self, edge: usize) -> usize {
        edge % self.states
    }

    /// Equilibrium Markov measure of the edge potential `t ψ − D d`.
    fn measure(&self, t: S, d: S) -> Result<MarkovMeasure<S>, DimensionError> {
        let p = self.alphabet;
        let logw: Vec<S> = self.psi.iter().zip(&self.dlog).map(|(&a, &g)| t * a - d * g).collect();
        let top = logw.iter().copied().fold(S::neg_infinity(), S::max);
        let w: Vec<S> = logw.iter().map(|&v| (v - top).exp()).collect();

        let n = self.states;
        let step_right = |r: &[S], out: &mut [S]| {
            for (from, slot) in out.iter_mut().enumerate() {
                *slot = (0..p)
                    .map(|j| {
                        let e = self.edge(from, j);
                        w[e] * r[self.target(e)]
                    })
                    .sum();
            }
        };
        let step_left = |l: &[S], out: &mut [S]| {
            out.iter_mut().for_each(|v| *v = S::zero());
            for (from, &lv) in l.iter().enumerate() {
                for j in 0..p {
                    let e = self.edge(from, j);
                    out[self.target(e)] = out[self.target(e)] + lv * w[e];
                }
            }
        };
        let (rho, r) = dense_power(n, step_right)?;
        let (_, l) = dense_power(n, step_left)?;

        let z: S = l.iter().zip(&r).map(|(&a, &b)| a * b).sum();
        let (mut mean, mut entropy, mut expansion) = (S::zero(), S::zero(), S::zero());
        for from in 0..n {
            let pi = l[from] * r[from] / z;
            for j in 0..p {
                let e = self.edge(from, j);
                let prob = w[e] * r[self.target(e)] / (rho * r[from]);
                if prob > S::zero() {
                    mean = mean + pi * prob * self.psi[e];
                    expansion = expansion + pi * prob * self.dlog[e];
                    entropy = entropy - pi * prob * prob.ln();
                }
            }
        }
        Ok(MarkovMeasure {
            mean,
            entropy,
            expansion,
        })
    }

    /// Multiplier `t` at which the equilibrium measure of `tψ − D d` has `∫ψ = level`.
    fn constrained(&self, level: S, d: S) -> Result<(S, MarkovMeasure<S>), DimensionError> {
        let infeasible = || DimensionError::InfeasibleLevel { level: level.as_f64() };
        let lo = self.psi.iter().copied().fold(S::infinity(), S::min);
        let hi = self.psi.iter().copied().fold(S::neg_infinity(), S::max);
        if !(level > lo && level < hi) {
            return Err(infeasible());
        }
        let g = |t: S| Ok(self.measure(t, d)?.mean - level);
        let g0 = g(S::zero())?;
        let dir = if g0 > S::zero() { -S::one() } else { S::one() };
        let (mut a, mut ga) = (S::zero(), g0);
        let mut step = S::one();
        let (b, gb) = loop {
            let t = dir * step;
            let v = g(t)?;
            if (v > S::zero()) != (g0 > S::zero()) || v == S::zero() {
                break (t, v);
            }
            a = t;
            ga = v;
            step = step * S::of(2.0);
            if step > S::of(T_LIMIT) {
                return Err(infeasible());
            }
        };
        let t = if gb == S::zero() {
            b
        } else {
            illinois(g, a, ga, b, gb, S::of(1e-13).max(S::tol_floor()))?
        };
        Ok((t, self.measure(t, d)?))
    }
}

fn dense_power<S: Scalar, F: Fn(&[S], &mut [S])>(
    n: usize,
    step: F,
) -> Result<(S, Vec<S>), DimensionError> {
    let mut v = vec![S::one() / S::of_usize(n); n];
    let mut next = vec![S::zero(); n];
    for _ in 0..DENSE_STEPS {
        step(&v, &mut next);
        let rho: S = next.iter().copied().sum();
        let mut change = S::zero();
        for (a, b) in next.iter_mut().zip(&v) {
            *a = *a / rho;
            change = change.max((*a - *b).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if change <= S::of(DENSE_TOL).max(S::epsilon() * S::of(16.0)) {
            return Ok((rho, v));
        }
    }
    Err(DimensionError::EigenFailure { steps: DENSE_STEPS })
}

/// Best ratio `h(ν) / ∫ log T′ dν` over Markov measures of memory `k` with
/// `∫ log m dν = level`, with `log m` and `log T′` averaged over `(k+1)`-cylinders.
///
/// Works through Markov chains on words rather than the cylinder pressure used by
/// [`dimension_at`](super::dimension_at), so the two serve as checks on each other.
pub fn entropy_oracle<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    level: S,
    memory: usize,
) -> Result<OracleResult<S>, DimensionError> {
    if memory == 0 || memory > MAX_MEMORY {
        return Err(DimensionError::InvalidArgument(format!(
            "memory must be in 1..={MAX_MEMORY}, got {memory}"
        )));
    }
    family.validate()?;
    let alphabet = map.degree() as usize;
    let states = alphabet.pow(memory as u32);
    let cylinders = map.cylinder_endpoints(memory + 1);
    let log_m = |x: CirclePoint<S>| family.log_mean(x);
    let log_dt = |x: CirclePoint<S>| map.derivative(x).ln();
    let chain = EdgeChain {
        states,
        alphabet,
        psi: cylinders.iter().map(|&(a, b)| interval_mean(&log_m, a, b)).collect(),
        dlog: cylinders.iter().map(|&(a, b)| interval_mean(&log_dt, a, b)).collect(),
    };

    let mut d = S::one();
    for _ in 0..OUTER_STEPS {
        let (t, m) = chain.constrained(level, d)?;
        let next = m.entropy / m.expansion;
        if (next - d).abs() <= S::of(1e-12) || map.is_linear() {
            return Ok(OracleResult {
                value: next,
                entropy: m.entropy,
                multiplier: t,
                memory,
            });
        }
        d = next;
    }
    Err(DimensionError::NoConvergence("ratio iteration did not settle".into()))
}
