//! Solution quality as seen by the honest clients.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matroid::MatroidConstraint;
use crate::submodular::{ElementSubset, SetFunction};

/// Number of random subsets averaged into the lower reference.
pub const RANDOM_REFERENCE_DRAWS: usize = 100;

/// `f* = (1/|G|) Σ_{i∈G} f_i(S*)`.
pub fn quality_metric(subset: &ElementSubset, honest: &[&dyn SetFunction]) -> Result<f64> {
    if honest.is_empty() {
        return Err(Error::Empty("honest clients"));
    }
    Ok(honest.iter().map(|f| f.value(subset)).sum::<f64>() / honest.len() as f64)
}

/// `(raw - min) / (max - min)`, unclamped. A degenerate range (`max <= min`)
/// gives 0; callers report it with [`degenerate_references`].
pub fn normalize_quality(raw: f64, min_ref: f64, max_ref: f64) -> f64 {
    if degenerate_references(min_ref, max_ref) {
        0.0
    } else {
        (raw - min_ref) / (max_ref - min_ref)
    }
}

pub fn degenerate_references(min_ref: f64, max_ref: f64) -> bool {
    !(max_ref > min_ref)
}

/// Mean quality of `draws` uniformly random `r`-subsets.
pub fn random_subset_quality<R: Rng + ?Sized>(
    honest: &[&dyn SetFunction],
    constraint: &MatroidConstraint,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..draws.max(1) {
        let mut ids = sample(rng, constraint.universe(), constraint.rank()).into_vec();
        ids.sort_unstable();
        total += quality_metric(&ElementSubset::from_sorted(ids), honest)?;
    }
    Ok(total / draws.max(1) as f64)
}
