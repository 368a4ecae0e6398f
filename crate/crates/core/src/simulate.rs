//! Monte Carlo simulation of `Z_{k+1} = Σ_{i ≤ Z_k} Y_{k,i}` with `Y_{k,i} ~ μ_{T^k x}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CirclePoint, EnvironmentMap};
use crate::reproduction::ReproductionFamily;
use crate::scalar::Scalar;

pub const DEFAULT_CAP: u64 = 1_000_000;
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `Z_0 = 1, Z_1, …`; shorter than `n + 1` when the cap was exceeded.
    pub sizes: Vec<u64>,
    pub capped: bool,
    pub extinct_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ExtinctionEstimate<S> {
    pub x: S,
    pub n: usize,
    pub trials: usize,
    pub frequency: S,
    pub std_error: S,
    pub seed: u64,
}

/// Generator for trial `i`: one ChaCha stream per trial under a common key.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run<S: Scalar>(
    family: &ReproductionFamily<S>,
    environments: &[CirclePoint<S>],
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> Trajectory {
    let mut sizes = Vec::with_capacity(environments.len() + 1);
    sizes.push(1u64);
    let mut z = 1u64;
    for (k, &env) in environments.iter().enumerate() {
        if z == 0 {
            sizes.push(0);
            continue;
        }
        z = family.sample_sum(env, z, rng);
        sizes.push(z);
        if z == 0 {
            return finish(sizes, environments.len(), k + 1);
        }
        if z > cap {
            return Trajectory {
                sizes,
                capped: true,
                extinct_at: None,
            };
        }
    }
    Trajectory {
        sizes,
        capped: false,
        extinct_at: None,
    }
}

fn finish(mut sizes: Vec<u64>, n: usize, at: usize) -> Trajectory {
    sizes.resize(n + 1, 0);
    Trajectory {
        sizes,
        capped: false,
        extinct_at: Some(at),
    }
}

fn check_cap(cap: u64) -> Result<(), SimulationError> {
    if cap == 0 {
        return Err(SimulationError::InvalidArgument("cap must be at least 1".into()));
    }
    Ok(())
}

/// One population history over `n` generations started from `x`.
pub fn simulate_trajectory<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    x: CirclePoint<S>,
    n: usize,
    cap: u64,
    seed: u64,
) -> Result<Trajectory, SimulationError> {
    check_cap(cap)?;
    let environments = map.orbit(x, n);
    Ok(run(family, &environments, cap, &mut trial_rng(seed, 0)))
}

/// Fraction of `trials` independent histories that are extinct by generation `n`.
/// Capped histories count as surviving.
pub fn extinction_frequency<S: Scalar>(
    map: &EnvironmentMap<S>,
    family: &ReproductionFamily<S>,
    x: CirclePoint<S>,
    n: usize,
    trials: usize,
    cap: u64,
    seed: u64,
) -> Result<ExtinctionEstimate<S>, SimulationError> {
    check_cap(cap)?;
    if trials < MIN_TRIALS {
        return Err(SimulationError::InvalidArgument(format!(
            "at least {MIN_TRIALS} trials required, got {trials}"
        )));
    }
    let environments = map.orbit(x, n);
    let extinct = (0..trials as u64)
        .into_par_iter()
        .filter(|&i| {
            run(family, &environments, cap, &mut trial_rng(seed, i))
                .extinct_at
                .is_some()
        })
        .count();
    let f = extinct as f64 / trials as f64;
    Ok(ExtinctionEstimate {
        x: x.value(),
        n,
        trials,
        frequency: S::of(f),
        std_error: S::of((f * (1.0 - f) / trials as f64).sqrt()),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extinction::pgf_iterate;

    fn pt(x: f64) -> CirclePoint<f64> {
        CirclePoint::new(x)
    }

    #[test]
    fn binary_branching_doubles() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::point_mass(2);
        let tr = simulate_trajectory(&t, &f, pt(0.3), 5, DEFAULT_CAP, 1).unwrap();
        assert_eq!(tr.sizes, vec![1, 2, 4, 8, 16, 32]);
        assert!(!tr.capped);
        assert_eq!(tr.extinct_at, None);
        let est = extinction_frequency(&t, &f, pt(0.3), 20, 200, DEFAULT_CAP, 1).unwrap();
        assert_eq!(est.frequency, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn starts_from_one_and_stays_dead() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::finite_support(vec![vec![0.999, 0.001]]).unwrap();
        for seed in 0..20 {
            let tr = simulate_trajectory(&t, &f, pt(0.1), 6, DEFAULT_CAP, seed).unwrap();
            assert_eq!(tr.sizes[0], 1);
            if let Some(k) = tr.extinct_at {
                assert!(tr.sizes[k..].iter().all(|&z| z == 0));
                assert!(tr.sizes[..k].iter().all(|&z| z > 0));
            }
        }
    }

    #[test]
    fn cap_stops_the_run() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::point_mass(3);
        let tr = simulate_trajectory(&t, &f, pt(0.0), 30, 100, 0).unwrap();
        assert!(tr.capped);
        assert_eq!(tr.sizes, vec![1, 3, 9, 27, 81, 243]);
    }

    #[test]
    fn reproducible() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::poisson_cosine(1.0);
        let a = simulate_trajectory(&t, &f, pt(0.2), 30, DEFAULT_CAP, 77).unwrap();
        let b = simulate_trajectory(&t, &f, pt(0.2), 30, DEFAULT_CAP, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_growth_at_fixed_point() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::poisson_cosine(1.0 + 2f64.ln());
        let trials = 10_000u64;
        let finals: Vec<f64> = (0..trials)
            .map(|i| {
                let tr = run(&f, &t.orbit(pt(0.0), 10), DEFAULT_CAP, &mut trial_rng(5, i));
                tr.sizes[10] as f64
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / trials as f64;
        let var = finals.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let sigma = (var / trials as f64).sqrt();
        assert!((mean - 1024.0).abs() < 4.0 * sigma, "mean {mean}, σ {sigma}");
    }

    #[test]
    fn frequency_monotone_in_generations() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::poisson_cosine(0.2);
        let mut last = 0.0;
        for n in [1, 2, 4, 8, 16] {
            let est = extinction_frequency(&t, &f, pt(0.37), n, 2000, DEFAULT_CAP, 3).unwrap();
            assert!(est.frequency >= last);
            last = est.frequency;
        }
    }

    #[test]
    fn subcritical_dies_out() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::poisson_cosine(-2.0);
        let est = extinction_frequency(&t, &f, pt(0.1), 200, 2000, DEFAULT_CAP, 8).unwrap();
        assert!(est.frequency >= 0.999);
        assert!(pgf_iterate(&t, &f, pt(0.1), 0.0, 200).unwrap() > 0.999);
    }

    #[test]
    fn bridge_to_pgf_iterates() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::poisson_cosine(0.5);
        for &(x, n) in &[(0.1, 3usize), (0.7, 8), (0.25, 15)] {
            let est = extinction_frequency(&t, &f, pt(x), n, 20_000, DEFAULT_CAP, 12).unwrap();
            let exact = pgf_iterate(&t, &f, pt(x), 0.0, n).unwrap();
            assert!((est.frequency - exact).abs() <= 4.0 * est.std_error.max(1e-4), "{x} {n}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = EnvironmentMap::doubling();
        let f = ReproductionFamily::poisson_cosine(0.5);
        assert!(extinction_frequency(&t, &f, pt(0.1), 3, 99, 10, 0).is_err());
        assert!(simulate_trajectory(&t, &f, pt(0.1), 3, 0, 0).is_err());
    }
}
