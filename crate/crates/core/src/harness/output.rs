//! CSV emission. Every number goes through [`fmt_sig9`], so files are
//! byte-identical across platforms for a given config and seed.
//!
//! Files written by [`write_outputs`]:
//!
//! * `run_<scenario>_<seed>.csv`: `round,raw_f,normalized_f,adopted,sim_bad_fraction,div_bad_fraction,sim_coreset,div_coreset`
//! * `summary.csv`: `scenario,repeats,mean_final,std_final`
//! * `plot.csv`: `scenario,round,mean_normalized,std_normalized`
//! * `references.csv`: `seed,min_ref,max_ref` (normalized runs only)
//! * `reference_<seed>.csv`: `round,raw_f` of the no-attack run (normalized runs only)
//!
//! Empty cells mean "not applicable". Coreset members are `;`-separated client ids.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::experiment::{CoresetDiagnostics, ExperimentSummary, RunResult};
use crate::error::Result;
use crate::robust::Candidate;

/// Plain decimal with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;
    let mut out = String::from(sign);
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(&digits);
    } else if point as usize >= digits.len() {
        out.push_str(&digits);
        out.extend(std::iter::repeat_n('0', point as usize - digits.len()));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

fn members(d: &Option<CoresetDiagnostics>) -> String {
    d.as_ref()
        .map(|d| d.members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"))
        .unwrap_or_default()
}

pub fn write_run_csv(path: &Path, run: &RunResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "round",
        "raw_f",
        "normalized_f",
        "adopted",
        "sim_bad_fraction",
        "div_bad_fraction",
        "sim_coreset",
        "div_coreset",
    ])?;
    for row in &run.rows {
        let adopted = match row.adopted {
            Some(Candidate::Sim) => "sim",
            Some(Candidate::Div) => "div",
            None => "",
        };
        w.write_record([
            row.round.to_string(),
            fmt_sig9(row.raw),
            opt(row.normalized),
            adopted.to_string(),
            opt(row.sim.as_ref().map(|d| d.bad_fraction)),
            opt(row.div.as_ref().map(|d| d.bad_fraction)),
            members(&row.sim),
            members(&row.div),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes all CSVs for `summaries` into `dir` and returns the paths written.
pub fn write_outputs(summaries: &[ExperimentSummary], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut references = BTreeMap::new();
    for summary in summaries {
        for run in &summary.runs {
            let path = dir.join(format!("run_{}_{}.csv", summary.scenario, run.seed));
            write_run_csv(&path, run)?;
            written.push(path);
            if let Some(r) = run.references {
                references.entry(run.seed).or_insert((r, run.reference_trace.clone()));
            }
        }
    }

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["scenario", "repeats", "mean_final", "std_final"])?;
    for s in summaries {
        w.write_record([s.scenario.clone(), s.runs.len().to_string(), fmt_sig9(s.mean_final), fmt_sig9(s.std_final)])?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("plot.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["scenario", "round", "mean_normalized", "std_normalized"])?;
    for s in summaries {
        for (round, mean, std) in s.curve() {
            w.write_record([s.scenario.clone(), round.to_string(), fmt_sig9(mean), fmt_sig9(std)])?;
        }
    }
    w.flush()?;
    written.push(path);

    if !references.is_empty() {
        let path = dir.join("references.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["seed", "min_ref", "max_ref"])?;
        for (seed, (r, _)) in &references {
            w.write_record([seed.to_string(), fmt_sig9(r.min_ref), fmt_sig9(r.max_ref)])?;
        }
        w.flush()?;
        written.push(path);
        for (seed, (_, trace)) in &references {
            let path = dir.join(format!("reference_{seed}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["round", "raw_f"])?;
            for (i, v) in trace.iter().enumerate() {
                w.write_record([(i + 1).to_string(), fmt_sig9(*v)])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
