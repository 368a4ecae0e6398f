use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExtinctionError;
use crate::dynamics::{CirclePoint, EnvironmentMap};
use crate::scalar::Scalar;

/// How a grid function is composed with the map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Nodes are mapped to nodes; no interpolation enters composition with `T`.
    ExactOnGrid,
    /// Values between nodes are linearly interpolated.
    Linear,
}

/// Samples of a function on the circle at the nodes `j/G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GridFunction<S> {
    pub samples: Vec<S>,
    pub interpolation: Interpolation,
}

impl<S: Scalar> GridFunction<S> {
    pub fn new(samples: Vec<S>, interpolation: Interpolation) -> Result<Self, ExtinctionError> {
        if samples.is_empty() {
            return Err(ExtinctionError::InvalidGrid("no samples".into()));
        }
        Ok(GridFunction {
            samples,
            interpolation,
        })
    }

    pub fn from_fn<F: Fn(CirclePoint<S>) -> S>(g: usize, f: F) -> Self {
        GridFunction {
            samples: (0..g).map(|j| f(node(j, g))).collect(),
            interpolation: Interpolation::Linear,
        }
    }

    pub fn constant(g: usize, c: S) -> Self {
        GridFunction {
            samples: vec![c; g],
            interpolation: Interpolation::Linear,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn node(&self, j: usize) -> CirclePoint<S> {
        node(j, self.len())
    }

    /// Periodic linear interpolation.
    pub fn eval(&self, x: CirclePoint<S>) -> S {
        interpolate(&self.samples, x)
    }

    pub fn sup_norm(&self) -> S {
        self.samples.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> S {
        self.samples.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn max(&self) -> S {
        self.samples.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn map_samples(&self, f: impl Fn(S) -> S) -> Self {
        GridFunction {
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            interpolation: self.interpolation,
        }
    }
}

pub(crate) fn node<S: Scalar>(j: usize, g: usize) -> CirclePoint<S> {
    CirclePoint::new(S::of_usize(j) / S::of_usize(g))
}

pub(crate) fn interpolate<S: Scalar>(samples: &[S], x: CirclePoint<S>) -> S {
    let g = samples.len();
    let u = x.value() * S::of_usize(g);
    let base = u.floor();
    let w = u - base;
    let i = base.to_usize().unwrap_or(0) % g;
    let a = samples[i];
    if w.is_zero() {
        return a;
    }
    a + w * (samples[(i + 1) % g] - a)
}

/// Where each grid node lands under `T`.
#[derive(Clone, Debug)]
pub(crate) enum Transport<S> {
    Exact(Vec<usize>),
    Linear(Vec<(usize, S)>),
}

impl<S: Scalar> Transport<S> {
    pub(crate) fn new(map: &EnvironmentMap<S>, g: usize) -> Self {
        if map.is_linear() {
            Transport::Exact((0..g).map(|j| map.node_image(j, g).expect("linear")).collect())
        } else {
            let gs = S::of_usize(g);
            Transport::Linear(
                (0..g)
                    .map(|j| {
                        let u = map.apply(node(j, g)).value() * gs;
                        let base = u.floor();
                        ((base.to_usize().unwrap_or(0)) % g, u - base)
                    })
                    .collect(),
            )
        }
    }

    pub(crate) fn interpolation(&self) -> Interpolation {
        match self {
            Transport::Exact(_) => Interpolation::ExactOnGrid,
            Transport::Linear(_) => Interpolation::Linear,
        }
    }

    /// `f(T x_j)`.
    #[inline]
    pub(crate) fn pull(&self, f: &[S], j: usize) -> S {
        match self {
            Transport::Exact(img) => f[img[j]],
            Transport::Linear(img) => {
                let (i, w) = img[j];
                let a = f[i];
                if w.is_zero() {
                    a
                } else {
                    a + w * (f[(i + 1) % f.len()] - a)
                }
            }
        }
    }

    /// `out_j = step(j, f(T x_j))` over all nodes, in parallel.
    pub(crate) fn sweep<F>(&self, f: &[S], step: F) -> Vec<S>
    where
        F: Fn(usize, S) -> S + Sync,
    {
        (0..f.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|j| step(j, self.pull(f, j)))
            .collect()
    }
}
