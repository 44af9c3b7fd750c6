//! Centralized continuous greedy over the multilinear extension.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matroid::{linear_maximization_oracle, round_to_subset, GradientVector, MatroidConstraint};
use crate::rng::{Domain, Seeder};
use crate::submodular::{
    multilinear_gradient, multilinear_value, ElementSubset, FractionalPoint, SetFunction,
};

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub learning_rate: f64,
    pub rounds: usize,
    pub n_samples: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            rounds: DEFAULT_ROUNDS,
            n_samples: DEFAULT_SAMPLES,
        }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must lie in (0,1)",
                self.learning_rate
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether `rounds` steps of size `learning_rate` stay inside the polytope
    /// without relying on clamping.
    pub fn within_budget(&self) -> bool {
        self.learning_rate * self.rounds as f64 <= 1.0 + 1e-9
    }
}

/// `x + η w`, coordinate-wise, without clamping.
pub(crate) fn raw_step(x: &FractionalPoint, w: &[f64], eta: f64) -> Vec<f64> {
    x.coords().iter().zip(w).map(|(a, b)| a + eta * b).collect()
}

/// The projected gradient a client would compute at `x`: `LMO(∇F(x))`.
pub fn projected_gradient<R: Rng + ?Sized>(
    f: &dyn SetFunction,
    x: &FractionalPoint,
    n_samples: usize,
    constraint: &MatroidConstraint,
    rng: &mut R,
) -> GradientVector {
    let est = multilinear_gradient(f, x, n_samples, rng);
    linear_maximization_oracle(&est.grad, constraint)
}

/// One step: `w = LMO(∇F(x))`, `x' = clamp(x + η w, 0, 1)`.
pub fn continuous_greedy_step<R: Rng + ?Sized>(
    f: &dyn SetFunction,
    x: &FractionalPoint,
    config: &GreedyConfig,
    constraint: &MatroidConstraint,
    rng: &mut R,
) -> (FractionalPoint, GradientVector) {
    let w = projected_gradient(f, x, config.n_samples, constraint, rng);
    let next = FractionalPoint::clamped(&raw_step(x, w.coords(), config.learning_rate));
    (next, w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousGreedyRun {
    pub x: FractionalPoint,
    pub subset: ElementSubset,
    /// Estimated `F(x)` after each step.
    pub trace: Vec<f64>,
    /// Every iterate, starting with `x = 0`.
    pub trajectory: Vec<FractionalPoint>,
}

/// Runs `config.rounds` steps from `x = 0`.
///
/// Step `t` (1-based) draws from `seeder.client_step(0, t)`, the same stream a
/// lone federated client with id 0 would use in round `t`.
pub fn run_continuous_greedy(
    f: &dyn SetFunction,
    config: &GreedyConfig,
    constraint: &MatroidConstraint,
    seeder: &Seeder,
) -> Result<ContinuousGreedyRun> {
    config.validate()?;
    let n = f.ground_size();
    let mut x = FractionalPoint::zeros(n);
    let mut trace = Vec::with_capacity(config.rounds);
    let mut trajectory = vec![x.clone()];
    for t in 1..=config.rounds {
        let mut rng = seeder.client_step(0, t);
        let (next, _) = continuous_greedy_step(f, &x, config, constraint, &mut rng);
        x = next;
        let mut trace_rng = seeder.stream(Domain::Trace, 0, t as u64);
        trace.push(multilinear_value(f, &x, config.n_samples, &mut trace_rng));
        trajectory.push(x.clone());
    }
    let subset = round_to_subset(&x, constraint);
    Ok(ContinuousGreedyRun {
        x,
        subset,
        trace,
        trajectory,
    })
}
