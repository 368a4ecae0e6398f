//! Branching processes in an environment driven by an expanding circle map.
//!
//! A population evolves as `Z_{n+1} = Σ_{i ≤ Z_n} Y_{n,i}` where every individual of
//! generation `n` reproduces according to `μ_{T^n x}`. The crate computes the extinction
//! probability graph `x ↦ q(x)`, its regularity, the criticality regime of the pair
//! `(T, μ)`, and the Hausdorff dimension of the set where `q` fails to be smooth.
//!
//! Every numerical type is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod dimension;
pub mod dynamics;
pub mod ergodic;
pub mod extinction;
pub mod reproduction;
pub mod scalar;
pub mod simulate;

pub type Point = dynamics::CirclePoint<f64>;
pub type Map = dynamics::EnvironmentMap<f64>;
pub type Family = reproduction::ReproductionFamily<f64>;
pub type Grid = extinction::GridFunction<f64>;
pub type Solution = extinction::ExtinctionSolution<f64>;
