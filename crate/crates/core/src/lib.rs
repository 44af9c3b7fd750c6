//! Federated submodular maximization under Byzantine client attacks.
//!
//! - [`submodular`]: ground sets, facility-location objectives, the multilinear extension
//! - [`matroid`]: the uniform matroid polytope and its linear oracles
//! - [`greedy`], [`continuous`]: discrete and continuous greedy
//! - [`protocol`]: the FedCG round protocol with pluggable aggregation
//! - [`adversary`]: Random, Reverse, Include and Exclude attacks
//! - [`robust`]: dual-coreset robust aggregation (RobustFSM) and the geometric median
//! - [`harness`]: synthetic data, non-iid partitioning, metrics and experiment runs
//! - [`oracle`]: exhaustive reference computations for small instances

pub mod adversary;
pub mod continuous;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod matroid;
pub mod oracle;
pub mod protocol;
pub mod rng;
pub mod robust;
pub mod submodular;

pub use adversary::{AdversaryConfig, AttackSpec, TargetPolicy};
pub use continuous::{run_continuous_greedy, GreedyConfig};
pub use error::{Error, Result};
pub use matroid::{GradientVector, MatroidConstraint};
pub use protocol::{run_fedcg, Aggregator, Client, ClientId, FedConfig, FedRun, Participation, RoundRecord};
pub use rng::Seeder;
pub use robust::{Candidate, CandidatePair, CoresetObjective};
pub use submodular::{
    DistanceMetric, ElementId, ElementSubset, FacilityLocationFn, FractionalPoint, GroundSet,
    ModularFn, SetFunction,
};
