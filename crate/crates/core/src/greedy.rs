//! The standard (discrete) greedy algorithm.

use crate::matroid::MatroidConstraint;
use crate::submodular::{ElementSubset, SetFunction};

/// Grows `S` from the empty set, each step adding the feasible element with
/// the largest marginal gain. Stops at the rank or when no element has a
/// positive gain. Ties go to the lowest element id.
pub fn discrete_greedy(f: &dyn SetFunction, constraint: &MatroidConstraint) -> ElementSubset {
    let n = f.ground_size();
    let mut mask = vec![false; n];
    let mut chosen = Vec::with_capacity(constraint.rank());
    let mut current = 0.0;
    while chosen.len() < constraint.rank() {
        let mut best: Option<(usize, f64)> = None;
        for e in 0..n {
            if mask[e] {
                continue;
            }
            mask[e] = true;
            let gain = f.eval(&mask) - current;
            mask[e] = false;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((e, gain));
            }
        }
        match best {
            Some((e, gain)) if gain > 0.0 => {
                mask[e] = true;
                current += gain;
                chosen.push(e);
            }
            _ => break,
        }
    }
    chosen.sort_unstable();
    ElementSubset::from_sorted(chosen)
}
