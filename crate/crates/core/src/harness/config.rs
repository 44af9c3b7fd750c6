//! Experiment configuration files.
//!
//! A run config is a single JSON object; a grid config wraps one under
//! `base` and lists the axes to sweep. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::data::{CategoryWeights, SyntheticSpec};
use crate::adversary::{AdversaryConfig, AttackSpec};
use crate::continuous::GreedyConfig;
use crate::error::{Error, Result};
use crate::protocol::{Aggregator, FedConfig, Participation};
use crate::robust::{validate_q, DEFAULT_Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceChoice {
    Cosine,
    /// Euclidean distance over the dataset diameter.
    ScaledEuclidean,
}

macro_rules! default_fn {
    ($name:ident, $ty:ty, $v:expr) => {
        fn $name() -> $ty {
            $v
        }
    };
}

default_fn!(d_seed, u64, 1);
default_fn!(d_clients, usize, 60);
default_fn!(d_items, usize, 3000);
default_fn!(d_ground, usize, 500);
default_fn!(d_dim, usize, 16);
default_fn!(d_categories, usize, 10);
default_fn!(d_weights, CategoryWeights, CategoryWeights::Uniform);
default_fn!(d_std, f64, 0.15);
default_fn!(d_distance, DistanceChoice, DistanceChoice::ScaledEuclidean);
default_fn!(d_alpha, f64, 0.5);
default_fn!(d_rank, usize, 10);
default_fn!(d_rounds, usize, 100);
default_fn!(d_eta, f64, 0.01);
default_fn!(d_samples, usize, 10);
default_fn!(d_participation, Participation, Participation::Full);
default_fn!(d_aggregator, Aggregator, Aggregator::RobustFsm);
default_fn!(d_q, f64, DEFAULT_Q);
default_fn!(d_true, bool, true);
default_fn!(d_repeats, usize, 1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario label used in output file names. Derived when absent.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_clients")]
    pub n_clients: usize,
    /// Size of the full collection `D`.
    #[serde(default = "d_items")]
    pub n_items: usize,
    #[serde(default = "d_ground")]
    pub n_ground: usize,
    #[serde(default = "d_dim")]
    pub feature_dim: usize,
    #[serde(default = "d_categories")]
    pub n_categories: usize,
    #[serde(default = "d_weights")]
    pub category_weights: CategoryWeights,
    #[serde(default = "d_std")]
    pub cluster_std: f64,
    #[serde(default = "d_distance")]
    pub distance: DistanceChoice,
    #[serde(default = "d_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default = "d_rank")]
    pub rank: usize,
    #[serde(default = "d_rounds")]
    pub rounds: usize,
    #[serde(default = "d_eta")]
    pub learning_rate: f64,
    #[serde(default = "d_samples")]
    pub n_samples: usize,
    #[serde(default = "d_participation")]
    pub participation: Participation,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default = "d_aggregator")]
    pub aggregator: Aggregator,
    #[serde(default = "d_q")]
    pub q: f64,
    #[serde(default = "d_true")]
    pub fast_select: bool,
    #[serde(default = "d_repeats")]
    pub repeats: usize,
    /// Compute the no-attack and random-subset references and report normalized quality.
    #[serde(default = "d_true")]
    pub normalize: bool,
    /// Read `id,category,f0..` rows instead of generating data.
    #[serde(default)]
    pub features_csv: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_clients == 0 {
            return bad("n_clients must be positive".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.rank == 0 || self.rank > self.n_ground {
            return bad(format!("rank {} must lie in 1..={}", self.rank, self.n_ground));
        }
        if self.features_csv.is_none() && self.n_ground > self.n_items {
            return bad(format!("n_ground {} exceeds n_items {}", self.n_ground, self.n_items));
        }
        if let Participation::Partial(k) = self.participation {
            if k == 0 || k > self.n_clients {
                return bad(format!("partial participation k={k} must lie in 1..={}", self.n_clients));
            }
        }
        self.greedy().validate()?;
        validate_q(self.q)?;
        if self.beta > 0.0 {
            let attack = self.attack.clone().ok_or_else(|| {
                Error::InvalidConfig("beta > 0 requires an attack".into())
            })?;
            AdversaryConfig { beta: self.beta, attack: attack.clone() }.validate()?;
            attack.validate(self.n_ground)?;
        } else if self.beta < 0.0 {
            return bad(format!("beta {} must be non-negative", self.beta));
        }
        Ok(())
    }

    pub fn greedy(&self) -> GreedyConfig {
        GreedyConfig { learning_rate: self.learning_rate, rounds: self.rounds, n_samples: self.n_samples }
    }

    pub fn fed(&self) -> FedConfig {
        FedConfig { greedy: self.greedy(), q: self.q, fast_select: self.fast_select }
    }

    pub fn adversary(&self) -> Option<AdversaryConfig> {
        match (&self.attack, self.beta > 0.0) {
            (Some(attack), true) => Some(AdversaryConfig { beta: self.beta, attack: attack.clone() }),
            _ => None,
        }
    }

    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_items: self.n_items,
            n_ground: self.n_ground,
            feature_dim: self.feature_dim,
            n_categories: self.n_categories,
            weights: self.category_weights.clone(),
            cluster_std: self.cluster_std,
        }
    }

    pub fn attack_name(&self) -> &'static str {
        self.adversary().map_or("none", |a| a.attack.name())
    }

    pub fn scenario(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!("{}_{}_b{}", self.aggregator.name(), self.attack_name(), self.beta)
        })
    }
}

/// Axes of a scenario grid. Absent axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    #[serde(default)]
    pub attack: Option<Vec<Option<AttackSpec>>>,
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub aggregator: Option<Vec<Aggregator>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub base: ExperimentConfig,
    #[serde(default)]
    pub grid: GridAxes,
}

impl GridConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Self = serde_json::from_str(text)?;
        grid.expand()?;
        Ok(grid)
    }

    /// Every cell of the grid, attack-major, then beta, then aggregator.
    /// A `beta = 0` cell drops its attack; duplicate cells are kept once.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let attacks = self.grid.attack.clone().unwrap_or_else(|| vec![self.base.attack.clone()]);
        let betas = self.grid.beta.clone().unwrap_or_else(|| vec![self.base.beta]);
        let aggregators = self.grid.aggregator.clone().unwrap_or_else(|| vec![self.base.aggregator]);
        let mut cells: Vec<ExperimentConfig> = Vec::new();
        for attack in &attacks {
            for &beta in &betas {
                for &aggregator in &aggregators {
                    let mut cell = self.base.clone();
                    cell.name = None;
                    cell.attack = if beta > 0.0 { attack.clone() } else { None };
                    cell.beta = beta;
                    cell.aggregator = aggregator;
                    cell.validate()?;
                    if !cells.contains(&cell) {
                        cells.push(cell);
                    }
                }
            }
        }
        Ok(cells)
    }
}
