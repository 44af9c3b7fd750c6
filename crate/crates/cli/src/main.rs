use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use robustfsm::greedy::discrete_greedy;
use robustfsm::harness::{run_experiment, run_grid, write_outputs, ExperimentConfig, ExperimentSummary, GridConfig};
use robustfsm::oracle::{brute_force_opt, exact_multilinear_gradient, exact_multilinear_value};
use robustfsm::robust::{coreset, weiszfeld, CoresetObjective, DEFAULT_Q, GM_MAX_ITER, GM_TOL};
use robustfsm::{FacilityLocationFn, FractionalPoint, GradientVector, MatroidConstraint, SetFunction};

#[derive(Parser)]
#[command(name = "robustfsm", version, about = "Federated submodular maximization under client attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the number of repeats.
        #[arg(long)]
        repeats: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every cell of a scenario grid.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Exhaustive reference computations for small instances.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Subcommand)]
enum Oracle {
    /// Best subset of size at most r, next to the greedy answer.
    BruteForce {
        /// JSON `{"similarity": [[..]], "rank": r}`; rows are demand points, columns elements.
        #[arg(long)]
        instance: PathBuf,
    },
    /// Exact multilinear value and gradient at a point.
    Gradient {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated coordinates in [0,1].
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Greedy coreset over a JSON array of gradient vectors.
    Coreset {
        #[arg(long)]
        gradients: PathBuf,
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long, default_value_t = DEFAULT_Q)]
        q: f64,
    },
    /// Geometric median of a JSON array of points.
    Median {
        #[arg(long)]
        points: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Sim,
    Div,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    similarity: Vec<Vec<f64>>,
    rank: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<(FacilityLocationFn, MatroidConstraint)> {
    let inst: Instance = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let f = FacilityLocationFn::from_similarity(inst.similarity)?;
    let c = MatroidConstraint::uniform(inst.rank, f.ground_size())?;
    Ok((f, c))
}

fn report(summaries: &[ExperimentSummary], out: &Path) -> Result<()> {
    for s in summaries {
        for w in s.runs.iter().flat_map(|r| &r.warnings) {
            eprintln!("warning: {w}");
        }
        println!("{}: {:.4} ± {:.4} over {} run(s)", s.scenario, s.mean_final, s.std_final, s.runs.len());
    }
    let written = write_outputs(summaries, out)?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn oracle(cmd: Oracle) -> Result<serde_json::Value> {
    Ok(match cmd {
        Oracle::BruteForce { instance } => {
            let (f, c) = load_instance(&instance)?;
            let (best, value) = brute_force_opt(&f, &c)?;
            let greedy = discrete_greedy(&f, &c);
            json!({
                "optimum": best.as_slice(),
                "value": value,
                "greedy": greedy.as_slice(),
                "greedy_value": f.value(&greedy),
            })
        }
        Oracle::Gradient { instance, x } => {
            let (f, _) = load_instance(&instance)?;
            if x.len() != f.ground_size() {
                bail!("--x has {} coordinates, the instance has {} elements", x.len(), f.ground_size());
            }
            let x = FractionalPoint::new(x)?;
            let (grad, sd) = exact_multilinear_gradient(&f, &x)?;
            json!({ "value": exact_multilinear_value(&f, &x)?, "gradient": grad, "sample_sd": sd })
        }
        Oracle::Coreset { gradients, objective, q } => {
            let rows: Vec<Vec<f64>> = serde_json::from_str(&read(&gradients)?)?;
            let vs: Vec<GradientVector> = rows.into_iter().map(GradientVector::from_raw).collect();
            let pool: Vec<(usize, &GradientVector)> = vs.iter().enumerate().collect();
            let objective = match objective {
                Objective::Sim => CoresetObjective::MaxSimilar,
                Objective::Div => CoresetObjective::MaxDiverse,
            };
            json!({ "members": coreset(&pool, q, objective)? })
        }
        Oracle::Median { points } => {
            let pts: Vec<Vec<f64>> = serde_json::from_str(&read(&points)?)?;
            let run = weiszfeld(&pts, GM_TOL, GM_MAX_ITER)?;
            json!({
                "median": run.point,
                "iterations": run.iterations,
                "objective": run.objective_trace.last(),
            })
        }
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, repeats, seed } => {
            let mut cfg = ExperimentConfig::from_json(&read(&config)?)
                .with_context(|| format!("in {}", config.display()))?;
            if let Some(n) = repeats {
                cfg.repeats = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = run_experiment(&cfg)?;
            report(std::slice::from_ref(&summary), &out)
        }
        Command::Grid { config, out } => {
            let grid = GridConfig::from_json(&read(&config)?).with_context(|| format!("in {}", config.display()))?;
            report(&run_grid(&grid)?, &out)
        }
        Command::Oracle(cmd) => {
            println!("{}", serde_json::to_string_pretty(&oracle(cmd)?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
