//! Synthetic feature data and CSV feature ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, Seeder};
use crate::submodular::GroundSet;

/// Relative category frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryWeights {
    Uniform,
    /// Weight of category `k` (0-based) is `1 / (k+1)^exponent`.
    Zipf(f64),
    Explicit(Vec<f64>),
}

impl CategoryWeights {
    pub fn resolve(&self, n_categories: usize) -> Result<Vec<f64>> {
        let w = match self {
            CategoryWeights::Uniform => vec![1.0; n_categories],
            CategoryWeights::Zipf(s) => (0..n_categories).map(|k| 1.0 / ((k + 1) as f64).powf(*s)).collect(),
            CategoryWeights::Explicit(w) => {
                if w.len() != n_categories {
                    return Err(Error::InvalidConfig(format!(
                        "{} category weights given for {n_categories} categories",
                        w.len()
                    )));
                }
                w.clone()
            }
        };
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig("category weights must be non-negative and not all zero".into()));
        }
        Ok(w)
    }
}

/// Splits `total` into integer parts proportional to `weights` (largest remainder).
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for k in order {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// The full collection `D` with a category label per item, and the items
/// that make up the ground set `E ⊆ D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<Vec<f64>>,
    pub categories: Vec<usize>,
    pub n_categories: usize,
    /// Indices into `items`, sorted.
    pub ground_items: Vec<usize>,
}

impl Dataset {
    /// Picks the ground set from labelled items, `n_ground` in total, split
    /// across categories by `weights`.
    pub fn from_items(
        items: Vec<Vec<f64>>,
        categories: Vec<usize>,
        n_categories: usize,
        weights: &[f64],
        n_ground: usize,
        seeder: &Seeder,
    ) -> Result<Self> {
        if items.len() != categories.len() {
            return Err(Error::DimensionMismatch { expected: items.len(), got: categories.len() });
        }
        if n_ground == 0 || n_ground > items.len() {
            return Err(Error::InvalidConfig(format!(
                "ground set size {n_ground} must lie in 1..={}",
                items.len()
            )));
        }
        let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); n_categories];
        for (i, &c) in categories.iter().enumerate() {
            by_cat.get_mut(c).ok_or_else(|| Error::InvalidConfig(format!("category {c} out of range")))?.push(i);
        }
        let mut rng = seeder.stream(Domain::Data, 1, 0);
        let mut ground_items = Vec::with_capacity(n_ground);
        for (k, want) in apportion(weights, n_ground).into_iter().enumerate() {
            let pool = &mut by_cat[k];
            if want > pool.len() {
                return Err(Error::InvalidConfig(format!(
                    "category {k} has {} items but the ground set needs {want}",
                    pool.len()
                )));
            }
            pool.shuffle(&mut rng);
            ground_items.extend_from_slice(&pool[..want]);
        }
        ground_items.sort_unstable();
        Ok(Self { items, categories, n_categories, ground_items })
    }

    pub fn ground_set(&self) -> Result<GroundSet> {
        GroundSet::new(self.ground_items.iter().map(|&i| self.items[i].clone()).collect())
    }

    /// Category counts of the ground set.
    pub fn ground_category_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_categories];
        for &i in &self.ground_items {
            counts[self.categories[i]] += 1;
        }
        counts
    }

    /// Largest Euclidean distance between any item and any ground element.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for &g in &self.ground_items {
            for item in &self.items {
                let d: f64 = item.iter().zip(&self.items[g]).map(|(a, b)| (a - b) * (a - b)).sum();
                best = best.max(d);
            }
        }
        best.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_items: usize,
    pub n_ground: usize,
    pub feature_dim: usize,
    pub n_categories: usize,
    pub weights: CategoryWeights,
    pub cluster_std: f64,
}

/// Gaussian clusters, one per category, around the means `e_k / √2`, which
/// are pairwise at distance one.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, seeder: &Seeder) -> Result<Dataset> {
    if spec.n_categories < 2 {
        return Err(Error::InvalidConfig("at least two categories are needed".into()));
    }
    if spec.feature_dim < spec.n_categories {
        return Err(Error::InvalidConfig(format!(
            "feature_dim {} must be at least n_categories {}",
            spec.feature_dim, spec.n_categories
        )));
    }
    if !(spec.cluster_std >= 0.0) {
        return Err(Error::InvalidConfig("cluster_std must be non-negative".into()));
    }
    let weights = spec.weights.resolve(spec.n_categories)?;
    let counts = apportion(&weights, spec.n_items);
    let noise = Normal::new(0.0, spec.cluster_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = seeder.stream(Domain::Data, 0, 0);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut items = Vec::with_capacity(spec.n_items);
    let mut categories = Vec::with_capacity(spec.n_items);
    for (k, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let mut v: Vec<f64> = (0..spec.feature_dim).map(|_| noise.sample(&mut rng)).collect();
            v[k] += scale;
            items.push(v);
            categories.push(k);
        }
    }
    Dataset::from_items(items, categories, spec.n_categories, &weights, spec.n_ground, seeder)
}

/// Reads `id,category,f0,...,f{d-1}` rows. Ids must be `0..n` in order.
pub fn load_features_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let dim = header.len().saturating_sub(2);
    let expected: Vec<String> = ["id".to_string(), "category".to_string()]
        .into_iter()
        .chain((0..dim).map(|i| format!("f{i}")))
        .collect();
    if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Features(format!("header must be id,category,f0..f{{d-1}}; got {:?}", header)));
    }
    let mut items = Vec::new();
    let mut categories = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let parse_err = |what: &str| Error::Features(format!("line {line}: bad {what}"));
        let id: usize = record[0].trim().parse().map_err(|_| parse_err("id"))?;
        if id != row {
            return Err(Error::Features(format!("line {line}: expected id {row}, got {id}")));
        }
        categories.push(record[1].trim().parse().map_err(|_| parse_err("category"))?);
        let v = (2..record.len())
            .map(|i| record[i].trim().parse::<f64>().map_err(|_| parse_err("feature")))
            .collect::<Result<Vec<_>>>()?;
        items.push(v);
    }
    if items.is_empty() {
        return Err(Error::Features("no rows".into()));
    }
    Ok((items, categories))
}
