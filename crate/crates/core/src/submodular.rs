//! Ground sets, subsets, submodular objectives and the multilinear extension.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of an element of the ground set.
pub type ElementId = usize;

/// The universe of selectable elements, each carrying a feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSet {
    dim: usize,
    features: Vec<Vec<f64>>,
}

impl GroundSet {
    pub fn new(features: Vec<Vec<f64>>) -> Result<Self> {
        let dim = features.first().map(Vec::len).ok_or(Error::Empty("ground set"))?;
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { dim, features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, e: ElementId) -> &[f64] {
        &self.features[e]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.features.iter().map(Vec::as_slice)
    }
}

/// A set of elements, kept sorted and free of duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementSubset {
    members: Vec<ElementId>,
}

impl ElementSubset {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a subset of a universe of `universe` elements.
    pub fn new(members: impl IntoIterator<Item = ElementId>, universe: usize) -> Result<Self> {
        let mut members: Vec<_> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&e) = members.last() {
            if e >= universe {
                return Err(Error::ElementOutOfRange {
                    element: e,
                    size: universe,
                });
            }
        }
        Ok(Self { members })
    }

    /// Builds a subset without a universe bound. Used where ids come from a
    /// trusted computation.
    pub(crate) fn from_sorted(members: Vec<ElementId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, e: ElementId) -> bool {
        self.members.binary_search(&e).is_ok()
    }

    pub fn as_slice(&self) -> &[ElementId] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.members.iter().copied()
    }

    pub fn with(&self, e: ElementId) -> Self {
        let mut members = self.members.clone();
        if let Err(pos) = members.binary_search(&e) {
            members.insert(pos, e);
        }
        Self { members }
    }

    pub fn mask(&self, universe: usize) -> Vec<bool> {
        let mut mask = vec![false; universe];
        for &e in &self.members {
            mask[e] = true;
        }
        mask
    }
}

/// A point of the box `[0,1]^|E|`, the relaxed form of a subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalPoint(Vec<f64>);

impl FractionalPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidConfig(
                "fractional point coordinates must lie in [0,1]".into(),
            ));
        }
        Ok(Self(coords))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The characteristic vector of `subset`.
    pub fn indicator(subset: &ElementSubset, n: usize) -> Self {
        let mut v = vec![0.0; n];
        for e in subset.iter() {
            v[e] = 1.0;
        }
        Self(v)
    }

    /// Clamps every coordinate of `raw` into `[0,1]`.
    pub fn clamped(raw: &[f64]) -> Self {
        Self(raw.iter().map(|c| c.clamp(0.0, 1.0)).collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
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

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// How two feature vectors are compared. Every metric maps into `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// `(1 - cos(a, b)) / 2`.
    Cosine,
    /// Euclidean distance divided by a dataset-level diameter.
    ScaledEuclidean { diameter: f64 },
}

pub fn normalized_distance(a: &[f64], b: &[f64], metric: DistanceMetric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    match metric {
        DistanceMetric::Cosine => {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                return Err(Error::ZeroVector);
            }
            let cos = dot / (na.sqrt() * nb.sqrt());
            Ok(((1.0 - cos) / 2.0).clamp(0.0, 1.0))
        }
        DistanceMetric::ScaledEuclidean { diameter } => {
            if !(diameter > 0.0) {
                return Err(Error::InvalidConfig("diameter must be positive".into()));
            }
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            Ok((d.sqrt() / diameter).clamp(0.0, 1.0))
        }
    }
}

/// A set function over a ground set of fixed size.
///
/// Subsets are passed as membership masks, which is what the samplers produce.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;

    fn eval(&self, mask: &[bool]) -> f64;

    fn value(&self, subset: &ElementSubset) -> f64 {
        self.eval(&subset.mask(self.ground_size()))
    }

    /// Adds `f(S ∪ {e}) - f(S \ {e})` to `out[e]` for every element `e`.
    fn add_flip_differences(&self, mask: &mut [bool], out: &mut [f64]) {
        for e in 0..mask.len() {
            let orig = mask[e];
            mask[e] = true;
            let with = self.eval(mask);
            mask[e] = false;
            let without = self.eval(mask);
            mask[e] = orig;
            out[e] += with - without;
        }
    }
}

/// `f(S) = Σ_{d ∈ demand} max_{s ∈ S} (1 - dist(d, s))`, with `f(∅) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilityLocationFn {
    n_demand: usize,
    n_ground: usize,
    // row-major demand × ground similarity, 1 - distance
    sim: Vec<f64>,
}

impl FacilityLocationFn {
    pub fn new(demand: &[Vec<f64>], ground: &GroundSet, metric: DistanceMetric) -> Result<Self> {
        if demand.is_empty() {
            return Err(Error::Empty("facility location demand"));
        }
        let mut sim = Vec::with_capacity(demand.len() * ground.len());
        for d in demand {
            for s in ground.iter() {
                sim.push(1.0 - normalized_distance(d, s, metric)?);
            }
        }
        Ok(Self {
            n_demand: demand.len(),
            n_ground: ground.len(),
            sim,
        })
    }

    /// Builds the function from a precomputed demand × ground similarity table.
    pub fn from_similarity(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_ground = rows.first().map(Vec::len).ok_or(Error::Empty("facility location demand"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != n_ground) {
            return Err(Error::DimensionMismatch {
                expected: n_ground,
                got: bad.len(),
            });
        }
        if rows.iter().flatten().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidConfig("similarities must lie in [0,1]".into()));
        }
        Ok(Self {
            n_demand: rows.len(),
            n_ground,
            sim: rows.into_iter().flatten().collect(),
        })
    }

    pub fn demand_len(&self) -> usize {
        self.n_demand
    }

    pub fn similarity(&self, demand: usize, e: ElementId) -> f64 {
        self.sim[demand * self.n_ground + e]
    }

    fn row(&self, d: usize) -> &[f64] {
        &self.sim[d * self.n_ground..(d + 1) * self.n_ground]
    }
}

impl SetFunction for FacilityLocationFn {
    fn ground_size(&self) -> usize {
        self.n_ground
    }

    fn eval(&self, mask: &[bool]) -> f64 {
        (0..self.n_demand)
            .map(|d| {
                self.row(d)
                    .iter()
                    .zip(mask)
                    .filter(|(_, &m)| m)
                    .fold(0.0_f64, |best, (&s, _)| best.max(s))
            })
            .sum()
    }

    fn add_flip_differences(&self, mask: &mut [bool], out: &mut [f64]) {
        // Per demand point, the best and runner-up coverage inside S decide
        // every element's flip difference in O(|E|).
        for d in 0..self.n_demand {
            let row = self.row(d);
            let (mut best, mut best_at, mut second) = (0.0_f64, usize::MAX, 0.0_f64);
            for (e, &s) in row.iter().enumerate() {
                if !mask[e] {
                    continue;
                }
                if s > best {
                    second = best;
                    best = s;
                    best_at = e;
                } else if s > second {
                    second = s;
                }
            }
            for (e, &s) in row.iter().enumerate() {
                let others = if e == best_at { second } else { best };
                if s > others {
                    out[e] += s - others;
                }
            }
        }
    }
}

/// An additive set function `f(S) = Σ_{e ∈ S} w_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularFn {
    weights: Vec<f64>,
}

impl ModularFn {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SetFunction for ModularFn {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, mask: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum()
    }

    fn add_flip_differences(&self, _mask: &mut [bool], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o += w;
        }
    }
}

/// `f(S ∪ {e}) - f(S)`.
pub fn marginal_gain(f: &dyn SetFunction, subset: &ElementSubset, e: ElementId) -> Result<f64> {
    let n = f.ground_size();
    if e >= n {
        return Err(Error::ElementOutOfRange { element: e, size: n });
    }
    if subset.contains(e) {
        return Err(Error::ElementInSubset(e));
    }
    let mut mask = subset.mask(n);
    let base = f.eval(&mask);
    mask[e] = true;
    Ok(f.eval(&mask) - base)
}

/// Draws a random subset that contains each `e` independently with probability `x[e]`.
pub fn sample_subset<R: Rng + ?Sized>(x: &FractionalPoint, rng: &mut R, mask: &mut [bool]) {
    for (m, &p) in mask.iter_mut().zip(x.coords()) {
        *m = rng.random::<f64>() < p;
    }
}

/// Monte-Carlo estimate of the multilinear extension `F(x) = E_{S~x}[f(S)]`.
pub fn multilinear_value<R: Rng + ?Sized>(
    f: &dyn SetFunction,
    x: &FractionalPoint,
    n_samples: usize,
    rng: &mut R,
) -> f64 {
    let n_samples = n_samples.max(1);
    let mut mask = vec![false; x.len()];
    let mut total = 0.0;
    for _ in 0..n_samples {
        sample_subset(x, rng, &mut mask);
        total += f.eval(&mask);
    }
    total / n_samples as f64
}

/// A sampled gradient of the multilinear extension.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    /// Per-coordinate standard error of the mean.
    pub std_error: Vec<f64>,
    pub sample_count: usize,
}

/// Estimates `∂F/∂x[e] = E_{S~x}[f(S ∪ {e}) - f(S \ {e})]`.
///
/// All coordinates share the same `n_samples` subset draws.
pub fn multilinear_gradient<R: Rng + ?Sized>(
    f: &dyn SetFunction,
    x: &FractionalPoint,
    n_samples: usize,
    rng: &mut R,
) -> GradientEstimate {
    let n = x.len();
    let n_samples = n_samples.max(1);
    let mut mask = vec![false; n];
    let mut sample = vec![0.0; n];
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..n_samples {
        sample_subset(x, rng, &mut mask);
        sample.iter_mut().for_each(|v| *v = 0.0);
        f.add_flip_differences(&mut mask, &mut sample);
        for ((s, q), v) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&sample) {
            *s += v;
            *q += v * v;
        }
    }
    let k = n_samples as f64;
    let grad: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let std_error = if n_samples > 1 {
        grad.iter()
            .zip(&sum_sq)
            .map(|(m, q)| {
                let var = ((q - k * m * m) / (k - 1.0)).max(0.0);
                (var / k).sqrt()
            })
            .collect()
    } else {
        vec![0.0; n]
    };
    GradientEstimate {
        grad,
        std_error,
        sample_count: n_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, Seeder};

    fn two_point_fn() -> FacilityLocationFn {
        let ground = GroundSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        FacilityLocationFn::new(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &ground,
            DistanceMetric::Cosine,
        )
        .unwrap()
    }

    #[test]
    fn cosine_distance_examples() {
        let c = DistanceMetric::Cosine;
        assert_eq!(normalized_distance(&[1.0, 0.0], &[1.0, 0.0], c).unwrap(), 0.0);
        assert_eq!(normalized_distance(&[1.0, 0.0], &[-1.0, 0.0], c).unwrap(), 1.0);
        assert_eq!(normalized_distance(&[1.0, 0.0], &[0.0, 1.0], c).unwrap(), 0.5);
    }

    #[test]
    fn distance_errors() {
        let c = DistanceMetric::Cosine;
        assert!(matches!(
            normalized_distance(&[1.0], &[1.0, 0.0], c),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            normalized_distance(&[0.0, 0.0], &[1.0, 0.0], c),
            Err(Error::ZeroVector)
        ));
        let e = DistanceMetric::ScaledEuclidean { diameter: 5.0 };
        assert_eq!(normalized_distance(&[0.0, 0.0], &[3.0, 4.0], e).unwrap(), 1.0);
        assert_eq!(normalized_distance(&[1.0, 1.0], &[1.0, 1.0], e).unwrap(), 0.0);
    }

    #[test]
    fn facility_location_examples() {
        let f = two_point_fn();
        assert_eq!(f.value(&ElementSubset::empty()), 0.0);
        let both = ElementSubset::new([0, 1], 2).unwrap();
        assert_eq!(f.value(&both), 2.0);
        // the demand point (1,0) is served exactly by element 0
        let one = ElementSubset::new([0], 2).unwrap();
        assert_eq!(f.value(&one), 1.0 + 0.5);
    }

    #[test]
    fn marginal_gain_examples() {
        let f = two_point_fn();
        let empty = ElementSubset::empty();
        assert_eq!(marginal_gain(&f, &empty, 1).unwrap(), f.value(&empty.with(1)));
        assert!(matches!(
            marginal_gain(&f, &empty.with(1), 1),
            Err(Error::ElementInSubset(1))
        ));

        // element 2 duplicates element 0, so it is dominated once 0 is chosen
        let ground =
            GroundSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = FacilityLocationFn::new(
            &[vec![1.0, 0.1], vec![0.2, 1.0]],
            &ground,
            DistanceMetric::Cosine,
        )
        .unwrap();
        let s = ElementSubset::new([0], 3).unwrap();
        assert_eq!(marginal_gain(&f, &s, 2).unwrap(), 0.0);
    }

    #[test]
    fn subset_rejects_out_of_range() {
        assert!(ElementSubset::new([0, 5], 3).is_err());
        let s = ElementSubset::new([2, 0, 2], 3).unwrap();
        assert_eq!(s.as_slice(), &[0, 2]);
    }

    #[test]
    fn multilinear_is_exact_on_vertices() {
        let f = two_point_fn();
        let s = ElementSubset::new([1], 2).unwrap();
        let mut rng = Seeder::new(1).stream(Domain::Misc, 0, 0);
        let x = FractionalPoint::indicator(&s, 2);
        for n in [1, 7, 50] {
            assert_eq!(multilinear_value(&f, &x, n, &mut rng), f.value(&s));
        }
        assert_eq!(multilinear_value(&f, &FractionalPoint::zeros(2), 9, &mut rng), 0.0);
    }

    #[test]
    fn single_element_gradient_is_exact() {
        let ground = GroundSet::new(vec![vec![1.0, 0.0]]).unwrap();
        let f = FacilityLocationFn::new(&[vec![1.0, 1.0]], &ground, DistanceMetric::Cosine)
            .unwrap();
        let x = FractionalPoint::new(vec![0.5]).unwrap();
        let mut rng = Seeder::new(2).stream(Domain::Misc, 0, 0);
        let est = multilinear_gradient(&f, &x, 25, &mut rng);
        let single = f.value(&ElementSubset::new([0], 1).unwrap());
        assert!((est.grad[0] - single).abs() < 1e-12);
        assert!(est.std_error[0] < 1e-6);
        assert_eq!(est.sample_count, 25);
    }

    #[test]
    fn flip_differences_match_generic_definition() {
        let rows = vec![
            vec![0.1, 0.9, 0.4, 0.9],
            vec![0.7, 0.2, 0.3, 0.0],
            vec![0.5, 0.5, 0.5, 0.5],
        ];
        let f = FacilityLocationFn::from_similarity(rows).unwrap();
        for bits in 0u32..16 {
            let mut mask: Vec<bool> = (0..4).map(|i| bits >> i & 1 == 1).collect();
            let mut fast = vec![0.0; 4];
            f.add_flip_differences(&mut mask, &mut fast);
            for e in 0..4 {
                let mut m = mask.clone();
                m[e] = true;
                let with = f.eval(&m);
                m[e] = false;
                let without = f.eval(&m);
                assert!((fast[e] - (with - without)).abs() < 1e-12, "bits={bits} e={e}");
            }
        }
    }
}
