//! Experiment orchestration: data, partitioning, metrics, configs and CSV output.

pub mod config;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod partition;

pub use config::{DistanceChoice, ExperimentConfig, GridAxes, GridConfig};
pub use data::{generate_synthetic_dataset, load_features_csv, CategoryWeights, Dataset, SyntheticSpec};
pub use experiment::{
    prepare, run_experiment, run_grid, run_single, ExperimentSummary, MetricRow, Prepared, References,
    RunResult,
};
pub use metrics::{normalize_quality, quality_metric, random_subset_quality};
pub use output::{fmt_sig9, write_outputs};
pub use partition::dirichlet_partition;
