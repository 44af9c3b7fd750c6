//! Dual-coreset robust aggregation and the geometric-median baseline.
//!
//! The server picks two subsets of client gradients of size `round(q n)`: one
//! maximally similar and one maximally diverse under Hamming distance between
//! gradient supports. Each subset is averaged into a candidate solution, and
//! every client keeps whichever candidate its own objective values more.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matroid::{round_to_subset, GradientVector, MatroidConstraint};
use crate::continuous::raw_step;
use crate::protocol::{mean_aggregate, ClientId};
use crate::submodular::{multilinear_value, FractionalPoint, SetFunction};

/// Default coreset fraction.
pub const DEFAULT_Q: f64 = 2.0 / 3.0;

/// Coordinates with magnitude at or below this are outside a gradient's support.
pub const SUPPORT_EPS: f64 = 1e-12;

pub const GM_TOL: f64 = 1e-9;
pub const GM_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoresetObjective {
    MaxSimilar,
    MaxDiverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoresetParams {
    pub q: f64,
    pub objective: CoresetObjective,
}

impl CoresetParams {
    pub fn new(q: f64, objective: CoresetObjective) -> Result<Self> {
        validate_q(q)?;
        Ok(Self { q, objective })
    }
}

pub fn validate_q(q: f64) -> Result<()> {
    if !(q > 0.5 && q < 1.0) {
        return Err(Error::InvalidConfig(format!("coreset fraction {q} must lie in (0.5, 1)")));
    }
    Ok(())
}

/// Hamming distance between the supports of two gradients.
pub fn gradient_hamming(a: &GradientVector, b: &GradientVector) -> usize {
    a.coords()
        .iter()
        .zip(b.coords())
        .filter(|(x, y)| (x.abs() > SUPPORT_EPS) != (y.abs() > SUPPORT_EPS))
        .count()
}

/// `c = 1 - Hamming / 2r`.
pub fn similarity_coefficient(a: &GradientVector, b: &GradientVector, rank: usize) -> f64 {
    1.0 - gradient_hamming(a, b) as f64 / (2 * rank.max(1)) as f64
}

/// `round(q n)` with halves rounded up, never below one.
pub fn coreset_size(q: f64, n: usize) -> usize {
    ((q * n as f64 + 0.5 + 1e-9).floor() as usize).clamp(1, n.max(1))
}

/// Greedy max-similar or max-diverse client subset.
///
/// Seeds with the best pair, then adds the client whose summed Hamming
/// distance to the current set is smallest (similar) or largest (diverse).
/// Since `Σ c_ij = |C+| - Σ Hamming_ij / 2r`, the similar variant is exactly
/// argmax of summed similarity. Ties go to the lowest client id.
pub fn coreset(
    gradients: &[(ClientId, &GradientVector)],
    q: f64,
    objective: CoresetObjective,
) -> Result<Vec<ClientId>> {
    if gradients.len() < 2 {
        return Err(Error::Empty("coreset needs at least two gradients"));
    }
    let mut pool: Vec<(ClientId, &GradientVector)> = gradients.to_vec();
    pool.sort_by_key(|(id, _)| *id);
    let n = pool.len();
    let target = coreset_size(q, n);

    let mut dist = vec![0i64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = gradient_hamming(pool[i].1, pool[j].1) as i64;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    // larger score is better
    let score = |d: i64| match objective {
        CoresetObjective::MaxSimilar => -d,
        CoresetObjective::MaxDiverse => d,
    };

    let mut seed = (0, 1);
    for i in 0..n {
        for j in i + 1..n {
            if score(dist[i * n + j]) > score(dist[seed.0 * n + seed.1]) {
                seed = (i, j);
            }
        }
    }
    let mut chosen = vec![false; n];
    let mut members = vec![seed.0];
    chosen[seed.0] = true;
    if target >= 2 {
        members.push(seed.1);
        chosen[seed.1] = true;
    }
    let mut sums: Vec<i64> = (0..n)
        .map(|i| members.iter().map(|&m| score(dist[i * n + m])).sum())
        .collect();
    while members.len() < target {
        let next = (0..n)
            .filter(|&i| !chosen[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if sums[b] >= sums[i] => Some(b),
                _ => Some(i),
            })
            .expect("target never exceeds pool size");
        chosen[next] = true;
        members.push(next);
        for i in 0..n {
            sums[i] += score(dist[i * n + next]);
        }
    }
    let mut ids: Vec<ClientId> = members.into_iter().map(|i| pool[i].0).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Averages the gradients of `members` and steps from `x_prev`.
///
/// Returns the clamped candidate and the unclamped point.
pub fn coreset_candidate(
    pool: &[(ClientId, GradientVector)],
    members: &[ClientId],
    x_prev: &FractionalPoint,
    eta: f64,
) -> Result<(FractionalPoint, Vec<f64>)> {
    let picked: Vec<&GradientVector> = pool
        .iter()
        .filter(|(id, _)| members.binary_search(id).is_ok())
        .map(|(_, w)| w)
        .collect();
    let mean = mean_aggregate(&picked)?;
    let raw = raw_step(x_prev, mean.coords(), eta);
    Ok((FractionalPoint::clamped(&raw), raw))
}

/// Members of a pool selected by one coreset objective. A pool with a single
/// gradient is its own coreset.
pub fn pool_coreset(
    pool: &[(ClientId, GradientVector)],
    q: f64,
    objective: CoresetObjective,
) -> Result<Vec<ClientId>> {
    match pool {
        [] => Err(Error::Empty("gradient pool")),
        [(id, _)] => Ok(vec![*id]),
        _ => {
            let refs: Vec<(ClientId, &GradientVector)> = pool.iter().map(|(id, w)| (*id, w)).collect();
            coreset(&refs, q, objective)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub x_sim: FractionalPoint,
    pub x_div: FractionalPoint,
}

impl CandidatePair {
    pub fn get(&self, which: Candidate) -> &FractionalPoint {
        match which {
            Candidate::Sim => &self.x_sim,
            Candidate::Div => &self.x_div,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Sim,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustAggregate {
    pub pair: CandidatePair,
    pub sim_members: Vec<ClientId>,
    pub div_members: Vec<ClientId>,
}

/// Builds both coresets over `pool` and the two candidate solutions.
pub fn robust_aggregate(
    pool: &[(ClientId, GradientVector)],
    x_prev: &FractionalPoint,
    eta: f64,
    q: f64,
) -> Result<RobustAggregate> {
    validate_q(q)?;
    let sim_members = pool_coreset(pool, q, CoresetObjective::MaxSimilar)?;
    let div_members = pool_coreset(pool, q, CoresetObjective::MaxDiverse)?;
    let (x_sim, _) = coreset_candidate(pool, &sim_members, x_prev, eta)?;
    let (x_div, _) = coreset_candidate(pool, &div_members, x_prev, eta)?;
    Ok(RobustAggregate {
        pair: CandidatePair { x_sim, x_div },
        sim_members,
        div_members,
    })
}

/// A client's pick between the two candidates. Ties go to the similar one.
///
/// The fast path compares `f(top-r of x)`; otherwise sampled multilinear
/// values are compared, both drawn from `rng`.
pub fn client_select_candidate<R: Rng + ?Sized>(
    f: &dyn SetFunction,
    pair: &CandidatePair,
    constraint: &MatroidConstraint,
    fast: bool,
    n_samples: usize,
    rng: &mut R,
) -> Candidate {
    if pair.x_sim == pair.x_div {
        return Candidate::Sim;
    }
    let (sim, div) = if fast {
        (
            f.value(&round_to_subset(&pair.x_sim, constraint)),
            f.value(&round_to_subset(&pair.x_div, constraint)),
        )
    } else {
        (
            multilinear_value(f, &pair.x_sim, n_samples, rng),
            multilinear_value(f, &pair.x_div, n_samples, rng),
        )
    };
    if div > sim {
        Candidate::Div
    } else {
        Candidate::Sim
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `Σ_p ‖p - y‖`.
pub fn weiszfeld_objective(points: &[Vec<f64>], y: &[f64]) -> f64 {
    points.iter().map(|p| distance(p, y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeiszfeldRun {
    pub point: Vec<f64>,
    /// Objective at the initial mean and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Weiszfeld iteration started at the coordinate-wise mean.
pub fn weiszfeld(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<WeiszfeldRun> {
    let dim = points.first().map(Vec::len).ok_or(Error::Empty("geometric median points"))?;
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("geometric median tolerance must be positive".into()));
    }
    let k = points.len() as f64;
    let mut y: Vec<f64> = (0..dim).map(|d| points.iter().map(|p| p[d]).sum::<f64>() / k).collect();
    let mut trace = vec![weiszfeld_objective(points, &y)];
    let mut iterations = 0;
    while iterations < max_iter {
        if let Some(anchor) = points.iter().find(|p| distance(p, &y) < 1e-12) {
            y = anchor.clone();
            break;
        }
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        for p in points {
            let inv = 1.0 / distance(p, &y);
            den += inv;
            for (n, v) in num.iter_mut().zip(p) {
                *n += v * inv;
            }
        }
        let next: Vec<f64> = num.iter().map(|n| n / den).collect();
        let step = distance(&next, &y);
        y = next;
        iterations += 1;
        trace.push(weiszfeld_objective(points, &y));
        if step < tol {
            break;
        }
    }
    Ok(WeiszfeldRun { point: y, objective_trace: trace, iterations })
}

pub fn geometric_median(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    weiszfeld(points, tol, max_iter).map(|run| run.point)
}

/// Geometric median of gradient vectors, as an aggregator.
pub fn median_aggregate(gradients: &[&GradientVector]) -> Result<GradientVector> {
    let points: Vec<Vec<f64>> = gradients.iter().map(|g| g.coords().to_vec()).collect();
    geometric_median(&points, GM_TOL, GM_MAX_ITER).map(GradientVector::from_raw)
}
