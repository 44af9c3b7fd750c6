//! The uniform matroid, its polytope and the linear oracles over it.
//!
//! The polytope of the rank-`r` uniform matroid over `E` is the box
//! `[0,1]^|E|` cut by `Σ x ≤ r`. Nothing else about it is ever materialized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::submodular::{ElementSubset, FractionalPoint};

/// Absolute tolerance used when the server checks an uploaded gradient.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatroidKind {
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatroidConstraint {
    kind: MatroidKind,
    rank: usize,
    universe: usize,
}

impl MatroidConstraint {
    /// The cardinality constraint `|S| ≤ rank` over `universe` elements.
    pub fn uniform(rank: usize, universe: usize) -> Result<Self> {
        if rank > universe {
            return Err(Error::InvalidConfig(format!(
                "rank {rank} exceeds ground set size {universe}"
            )));
        }
        Ok(Self {
            kind: MatroidKind::Uniform,
            rank,
            universe,
        })
    }

    pub fn kind(&self) -> MatroidKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn is_independent(&self, subset: &ElementSubset) -> bool {
        subset.len() <= self.rank && subset.iter().all(|e| e < self.universe)
    }
}

/// A point of the matroid polytope, as uploaded by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Wraps raw coordinates. No membership check is made here; the server
    /// does that with [`polytope_contains`].
    pub fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn indicator(subset: &ElementSubset, n: usize) -> Self {
        let mut v = vec![0.0; n];
        for e in subset.iter() {
            v[e] = 1.0;
        }
        Self(v)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    /// Number of coordinates above `eps`.
    pub fn support_size(&self, eps: f64) -> usize {
        self.0.iter().filter(|c| c.abs() > eps).count()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn polytope_contains(w: &[f64], constraint: &MatroidConstraint, tol: f64) -> bool {
    w.len() == constraint.universe
        && w.iter().all(|c| c.is_finite() && *c >= -tol && *c <= 1.0 + tol)
        && w.iter().sum::<f64>() <= constraint.rank as f64 + tol
}

/// Indices of the `k` largest values; ties go to the lower index.
pub(crate) fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Indices of the `k` smallest values; ties go to the lower index.
pub(crate) fn bottom_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// `argmax_{w ∈ P} <w, g>`: the indicator of the (at most `r`) largest
/// strictly positive coordinates of `g`.
pub fn linear_maximization_oracle(g: &[f64], constraint: &MatroidConstraint) -> GradientVector {
    let positive = g.iter().filter(|&&v| v > 0.0).count();
    let chosen = top_k(g, constraint.rank.min(positive));
    let mut w = vec![0.0; g.len()];
    for e in chosen {
        w[e] = 1.0;
    }
    GradientVector(w)
}

/// `argmin <w, g>` over the bases of the matroid: the indicator of the `r`
/// smallest coordinates of `g`.
pub fn linear_minimization_over_bases(
    g: &[f64],
    constraint: &MatroidConstraint,
) -> GradientVector {
    let mut w = vec![0.0; g.len()];
    for e in bottom_k(g, constraint.rank) {
        w[e] = 1.0;
    }
    GradientVector(w)
}

/// The `r` elements with the largest coordinates of `x`.
pub fn round_to_subset(x: &FractionalPoint, constraint: &MatroidConstraint) -> ElementSubset {
    ElementSubset::from_sorted(top_k(x.coords(), constraint.rank))
}
