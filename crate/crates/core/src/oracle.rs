//! Exhaustive reference computations for small ground sets.
//!
//! These enumerate subsets directly and share no code with the samplers or
//! the greedy routines they are used to check.

use crate::error::{Error, Result};
use crate::matroid::MatroidConstraint;
use crate::submodular::{ElementSubset, FractionalPoint, SetFunction};

/// Default bound on `|E|` for exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 20;

fn guard(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::GroundSetTooLarge { size: n, limit });
    }
    Ok(())
}

/// Exact maximizer of `f` over all subsets with `|S| ≤ r`, using the default size guard.
pub fn brute_force_opt(
    f: &dyn SetFunction,
    constraint: &MatroidConstraint,
) -> Result<(ElementSubset, f64)> {
    brute_force_opt_with_limit(f, constraint, BRUTE_FORCE_LIMIT)
}

/// Subsets are visited by size, then lexicographically; the first maximum wins.
pub fn brute_force_opt_with_limit(
    f: &dyn SetFunction,
    constraint: &MatroidConstraint,
    limit: usize,
) -> Result<(ElementSubset, f64)> {
    let n = f.ground_size();
    guard(n, limit)?;
    let mut best = (Vec::new(), f.eval(&vec![false; n]));
    let mut mask = vec![false; n];
    for k in 1..=constraint.rank().min(n) {
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            mask.iter_mut().for_each(|m| *m = false);
            for &e in &comb {
                mask[e] = true;
            }
            let v = f.eval(&mask);
            if v > best.1 {
                best = (comb.clone(), v);
            }
            // next combination in lexicographic order
            let mut i = k;
            while i > 0 && comb[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..k {
                comb[j] = comb[j - 1] + 1;
            }
        }
    }
    Ok((ElementSubset::from_sorted(best.0), best.1))
}

fn subset_probability(bits: u64, x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(e, &p)| if bits >> e & 1 == 1 { p } else { 1.0 - p })
        .product()
}

fn mask_of(bits: u64, n: usize) -> Vec<bool> {
    (0..n).map(|e| bits >> e & 1 == 1).collect()
}

/// `F(x) = Σ_S f(S) Π_{e∈S} x[e] Π_{e∉S} (1 - x[e])`, summed over all `2^|E|` subsets.
pub fn exact_multilinear_value(f: &dyn SetFunction, x: &FractionalPoint) -> Result<f64> {
    let n = x.len();
    guard(n, BRUTE_FORCE_LIMIT)?;
    Ok((0..1u64 << n)
        .map(|bits| subset_probability(bits, x.coords()) * f.eval(&mask_of(bits, n)))
        .sum())
}

/// Exact gradient `∂F/∂x[e] = F(x | x[e]=1) - F(x | x[e]=0)`, by enumeration.
///
/// Returned with the per-coordinate standard deviation of the single-sample
/// estimator `f(S ∪ {e}) - f(S \ {e})`, which sets the scale of sampling error.
pub fn exact_multilinear_gradient(
    f: &dyn SetFunction,
    x: &FractionalPoint,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    guard(n, BRUTE_FORCE_LIMIT)?;
    let mut mean = vec![0.0; n];
    let mut second = vec![0.0; n];
    for bits in 0..1u64 << n {
        let p = subset_probability(bits, x.coords());
        if p == 0.0 {
            continue;
        }
        for e in 0..n {
            let with = f.eval(&mask_of(bits | 1 << e, n));
            let without = f.eval(&mask_of(bits & !(1 << e), n));
            let d = with - without;
            mean[e] += p * d;
            second[e] += p * d * d;
        }
    }
    let sd = mean
        .iter()
        .zip(&second)
        .map(|(m, s)| (s - m * m).max(0.0).sqrt())
        .collect();
    Ok((mean, sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::ModularFn;

    #[test]
    fn single_element() {
        let f = ModularFn::new(vec![2.5]);
        let m = MatroidConstraint::uniform(1, 1).unwrap();
        let (s, v) = brute_force_opt(&f, &m).unwrap();
        assert_eq!(s.as_slice(), &[0]);
        assert_eq!(v, 2.5);
    }

    #[test]
    fn modular_top_r() {
        let f = ModularFn::new(vec![1.0, 5.0, 2.0, 4.0, 3.0]);
        let m = MatroidConstraint::uniform(2, 5).unwrap();
        let (s, v) = brute_force_opt(&f, &m).unwrap();
        assert_eq!(s.as_slice(), &[1, 3]);
        assert_eq!(v, 9.0);
    }

    #[test]
    fn size_guard() {
        let f = ModularFn::new(vec![1.0; 21]);
        let m = MatroidConstraint::uniform(2, 21).unwrap();
        assert!(matches!(brute_force_opt(&f, &m), Err(Error::GroundSetTooLarge { .. })));
        assert!(brute_force_opt_with_limit(&f, &m, 21).is_ok());
    }

    #[test]
    fn exact_extension_of_modular_is_linear() {
        let f = ModularFn::new(vec![1.0, 2.0, 3.0]);
        let x = FractionalPoint::new(vec![0.2, 0.5, 1.0]).unwrap();
        let v = exact_multilinear_value(&f, &x).unwrap();
        assert!((v - (0.2 + 1.0 + 3.0)).abs() < 1e-12);
        let (g, sd) = exact_multilinear_gradient(&f, &x).unwrap();
        assert_eq!(g, vec![1.0, 2.0, 3.0]);
        assert!(sd.iter().all(|s| *s < 1e-6));
    }
}
