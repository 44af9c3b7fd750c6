//! End-to-end runs: data, clients, references and per-round metrics.

use std::sync::Arc;

use rand::seq::index::sample;

use super::config::{DistanceChoice, ExperimentConfig, GridConfig};
use super::data::{generate_synthetic_dataset, load_features_csv, Dataset};
use super::metrics::{
    degenerate_references, normalize_quality, quality_metric, random_subset_quality,
    RANDOM_REFERENCE_DRAWS,
};
use super::partition::dirichlet_partition;
use crate::error::{Error, Result};
use crate::matroid::{round_to_subset, MatroidConstraint};
use crate::protocol::{run_fedcg, Aggregator, Client, ClientId, FedRun, Honesty, RoundRecord};
use crate::rng::{Domain, Seeder};
use crate::robust::{Candidate, CoresetObjective};
use crate::submodular::{DistanceMetric, FacilityLocationFn, SetFunction};

/// Data and local objectives shared by every scenario with the same seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub partitions: Vec<Vec<usize>>,
    pub local_fns: Vec<Arc<FacilityLocationFn>>,
    pub constraint: MatroidConstraint,
}

impl Prepared {
    pub fn clients(&self, malicious: &[ClientId], attack: Option<&crate::adversary::AttackSpec>) -> Vec<Client> {
        self.local_fns
            .iter()
            .enumerate()
            .map(|(id, f)| {
                let honesty = match attack {
                    Some(a) if malicious.binary_search(&id).is_ok() => Honesty::Malicious(a.clone()),
                    _ => Honesty::Honest,
                };
                Client { id, local_fn: f.clone(), honesty }
            })
            .collect()
    }
}

/// Builds the dataset, partitions it over clients and sets up each client's
/// facility-location function over the ground set.
pub fn prepare(config: &ExperimentConfig, seeder: &Seeder) -> Result<Prepared> {
    let dataset = match &config.features_csv {
        Some(path) => {
            let (items, categories) = load_features_csv(path)?;
            let n_categories = categories.iter().max().map_or(0, |m| m + 1);
            // the ground set is a stratified sample of the file
            let mut counts = vec![0.0; n_categories];
            for &c in &categories {
                counts[c] += 1.0;
            }
            Dataset::from_items(items, categories, n_categories, &counts, config.n_ground, seeder)?
        }
        None => generate_synthetic_dataset(&config.synthetic(), seeder)?,
    };
    let partitions = dirichlet_partition(
        &dataset.categories,
        dataset.n_categories,
        config.n_clients,
        config.dirichlet_alpha,
        seeder,
    )?;
    let ground = dataset.ground_set()?;
    let metric = match config.distance {
        DistanceChoice::Cosine => DistanceMetric::Cosine,
        DistanceChoice::ScaledEuclidean => DistanceMetric::ScaledEuclidean { diameter: dataset.diameter() },
    };
    let local_fns = partitions
        .iter()
        .map(|part| {
            let demand: Vec<Vec<f64>> = part.iter().map(|&i| dataset.items[i].clone()).collect();
            FacilityLocationFn::new(&demand, &ground, metric).map(Arc::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let constraint = MatroidConstraint::uniform(config.rank, ground.len())?;
    Ok(Prepared { dataset, partitions, local_fns, constraint })
}

/// Picks `floor(beta * n)` malicious clients, sorted by id.
pub fn assign_malicious(config: &ExperimentConfig, seeder: &Seeder) -> Vec<ClientId> {
    let Some(adversary) = config.adversary() else {
        return Vec::new();
    };
    let m = adversary.malicious_count(config.n_clients);
    let mut rng = seeder.stream(Domain::Adversary, 0, 0);
    let mut ids = sample(&mut rng, config.n_clients, m).into_vec();
    ids.sort_unstable();
    ids
}

/// The all-honest mean-aggregated run that defines the upper reference.
pub fn reference_run(config: &ExperimentConfig, prepared: &Prepared, seeder: &Seeder) -> Result<FedRun> {
    run_fedcg(
        &prepared.clients(&[], None),
        &prepared.constraint,
        &config.fed(),
        config.participation,
        Aggregator::Mean,
        seeder,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    /// Mean quality of random `r`-subsets.
    pub min_ref: f64,
    /// Quality of the no-attack FedCG solution.
    pub max_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoresetDiagnostics {
    pub members: Vec<ClientId>,
    /// Share of malicious clients among `members`.
    pub bad_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub round: usize,
    pub raw: f64,
    pub normalized: Option<f64>,
    /// Which candidate the clients adopted; `None` for single-candidate aggregators.
    pub adopted: Option<Candidate>,
    pub sim: Option<CoresetDiagnostics>,
    pub div: Option<CoresetDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub malicious: Vec<ClientId>,
    pub references: Option<References>,
    /// Raw quality per round of the reference run, when references were computed.
    pub reference_trace: Vec<f64>,
    pub rows: Vec<MetricRow>,
    pub final_raw: f64,
    pub final_normalized: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunResult {
    /// Normalized final quality when available, raw otherwise.
    pub fn final_value(&self) -> f64 {
        self.final_normalized.unwrap_or(self.final_raw)
    }
}

fn diagnostics(record: &RoundRecord, objective: CoresetObjective, malicious: &[ClientId]) -> Option<CoresetDiagnostics> {
    let c = record.coresets.iter().find(|c| c.objective == objective)?;
    let bad = c.members.iter().filter(|id| malicious.binary_search(id).is_ok()).count();
    let bad_fraction = if c.members.is_empty() { 0.0 } else { bad as f64 / c.members.len() as f64 };
    Some(CoresetDiagnostics { members: c.members.clone(), bad_fraction })
}

fn adopted(record: &RoundRecord) -> Option<Candidate> {
    record.coresets.get(record.adopted).map(|c| match c.objective {
        CoresetObjective::MaxSimilar => Candidate::Sim,
        CoresetObjective::MaxDiverse => Candidate::Div,
    })
}

/// One seeded run on already prepared data. `reference` is the all-honest
/// mean run for the same seed, required when the config asks for normalization.
pub fn run_prepared(
    config: &ExperimentConfig,
    prepared: &Prepared,
    reference: Option<&FedRun>,
    seeder: &Seeder,
) -> Result<RunResult> {
    let malicious = assign_malicious(config, seeder);
    let adversary = config.adversary();
    let clients = prepared.clients(&malicious, adversary.as_ref().map(|a| &a.attack));
    let honest: Vec<&dyn SetFunction> = clients
        .iter()
        .filter(|c| c.is_honest())
        .map(|c| c.local_fn.as_ref())
        .collect();
    let run = run_fedcg(
        &clients,
        &prepared.constraint,
        &config.fed(),
        config.participation,
        config.aggregator,
        seeder,
    )?;

    let mut warnings = Vec::new();
    let mut reference_trace = Vec::new();
    let references = if config.normalize {
        let reference = reference.ok_or_else(|| Error::InvalidConfig("normalization needs a reference run".into()))?;
        let mut rng = seeder.stream(Domain::Reference, 0, 0);
        let min_ref = random_subset_quality(&honest, &prepared.constraint, RANDOM_REFERENCE_DRAWS, &mut rng)?;
        let max_ref = quality_metric(&reference.subset, &honest)?;
        if degenerate_references(min_ref, max_ref) {
            warnings.push(format!(
                "seed {}: reference range is empty (min {min_ref}, max {max_ref}); normalized values are 0",
                seeder.base()
            ));
        }
        for record in &reference.rounds {
            reference_trace.push(quality_metric(&round_to_subset(record.solution(), &prepared.constraint), &honest)?);
        }
        Some(References { min_ref, max_ref })
    } else {
        None
    };

    let mut rows = Vec::with_capacity(run.rounds.len());
    for record in &run.rounds {
        let subset = round_to_subset(record.solution(), &prepared.constraint);
        let raw = quality_metric(&subset, &honest)?;
        rows.push(MetricRow {
            round: record.round,
            raw,
            normalized: references.map(|r| normalize_quality(raw, r.min_ref, r.max_ref)),
            adopted: adopted(record),
            sim: diagnostics(record, CoresetObjective::MaxSimilar, &malicious),
            div: diagnostics(record, CoresetObjective::MaxDiverse, &malicious),
        });
    }
    let final_raw = quality_metric(&run.subset, &honest)?;
    Ok(RunResult {
        scenario: config.scenario(),
        seed: seeder.base(),
        malicious,
        references,
        reference_trace,
        rows,
        final_raw,
        final_normalized: references.map(|r| normalize_quality(final_raw, r.min_ref, r.max_ref)),
        warnings,
    })
}

/// One run of `config` with base seed `seed`, data included.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let seeder = Seeder::new(seed);
    let prepared = prepare(config, &seeder)?;
    let reference = if config.normalize { Some(reference_run(config, &prepared, &seeder)?) } else { None };
    run_prepared(config, &prepared, reference.as_ref(), &seeder)
}

/// Results of all repeats of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub runs: Vec<RunResult>,
    /// Mean of the final (normalized when available) quality over repeats.
    pub mean_final: f64,
    /// Sample standard deviation over repeats; 0 for a single repeat.
    pub std_final: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentSummary {
    pub fn from_runs(scenario: String, runs: Vec<RunResult>) -> Self {
        let finals: Vec<f64> = runs.iter().map(RunResult::final_value).collect();
        let (mean_final, std_final) = mean_std(&finals);
        Self { scenario, runs, mean_final, std_final }
    }

    /// `(round, mean, std)` of the per-round quality across repeats.
    pub fn curve(&self) -> Vec<(usize, f64, f64)> {
        let Some(first) = self.runs.first() else {
            return Vec::new();
        };
        (0..first.rows.len())
            .map(|i| {
                let vals: Vec<f64> = self
                    .runs
                    .iter()
                    .map(|r| r.rows[i].normalized.unwrap_or(r.rows[i].raw))
                    .collect();
                let (m, s) = mean_std(&vals);
                (first.rows[i].round, m, s)
            })
            .collect()
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}

fn repeat_seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.repeats as u64).map(|k| config.seed.wrapping_add(k)).collect()
}

/// `repeats` runs with seeds `seed, seed+1, ...`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let runs = par_map(&repeat_seeds(config), |&seed| run_single(config, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary::from_runs(config.scenario(), runs))
}

/// Every grid cell, each with the base repeats. Data and the reference run
/// are built once per seed and shared by all cells.
pub fn run_grid(grid: &GridConfig) -> Result<Vec<ExperimentSummary>> {
    let cells = grid.expand()?;
    let base = &grid.base;
    let seeds = repeat_seeds(base);
    let shared = par_map(&seeds, |&seed| -> Result<(Prepared, Option<FedRun>)> {
        let seeder = Seeder::new(seed);
        let prepared = prepare(base, &seeder)?;
        let reference = if base.normalize { Some(reference_run(base, &prepared, &seeder)?) } else { None };
        Ok((prepared, reference))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..seeds.len()).map(move |s| (c, s))).collect();
    let mut results = par_map(&jobs, |&(c, s)| {
        let (prepared, reference) = &shared[s];
        run_prepared(&cells[c], prepared, reference.as_ref(), &Seeder::new(seeds[s]))
    })
    .into_iter();
    let mut out = Vec::with_capacity(cells.len());
    for cell in &cells {
        let runs = results.by_ref().take(seeds.len()).collect::<Result<Vec<_>>>()?;
        out.push(ExperimentSummary::from_runs(cell.scenario(), runs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_clients: 8,
            n_items: 160,
            n_ground: 30,
            feature_dim: 4,
            n_categories: 4,
            rank: 3,
            rounds: 12,
            learning_rate: 0.1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn no_attack_mean_normalizes_to_one() {
        let config = ExperimentConfig { aggregator: Aggregator::Mean, ..small() };
        let r = run_single(&config, 5).unwrap();
        assert_eq!(r.final_normalized, Some(1.0));
        assert!(r.malicious.is_empty());
        assert_eq!(r.rows.len(), 12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn malicious_count_and_diagnostics() {
        let config = ExperimentConfig {
            beta: 0.3,
            attack: Some(crate::adversary::AttackSpec::include()),
            ..small()
        };
        let r = run_single(&config, 2).unwrap();
        assert_eq!(r.malicious.len(), 2);
        for row in &r.rows {
            for d in [&row.sim, &row.div] {
                let d = d.as_ref().unwrap();
                let bad = d.members.iter().filter(|m| r.malicious.contains(m)).count();
                assert_eq!(d.bad_fraction, bad as f64 / d.members.len() as f64);
            }
            assert!(row.normalized.unwrap().is_finite());
        }
    }

    #[test]
    fn grid_matches_individual_runs() {
        let text = r#"{"base": {"n_clients": 6, "n_items": 120, "n_ground": 20, "feature_dim": 3,
            "n_categories": 3, "rank": 2, "rounds": 5, "learning_rate": 0.2, "repeats": 2},
            "grid": {"attack": [{"kind": "reverse"}], "beta": [0.34], "aggregator": ["mean", "robustfsm"]}}"#;
        let grid = GridConfig::from_json(text).unwrap();
        let summaries = run_grid(&grid).unwrap();
        let cells = grid.expand().unwrap();
        assert_eq!(summaries.len(), 2);
        for (cell, summary) in cells.iter().zip(&summaries) {
            let alone = run_experiment(cell).unwrap();
            assert_eq!(&alone, summary);
        }
    }
}
