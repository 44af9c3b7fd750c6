//! Byzantine client attacks.
//!
//! Every attack produces a vector inside the matroid polytope, so the server's
//! validity check cannot tell it apart from an honest upload.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::continuous::projected_gradient;
use crate::error::{Error, Result};
use crate::matroid::{bottom_k, linear_minimization_over_bases, top_k, GradientVector, MatroidConstraint};
use crate::submodular::{ElementId, ElementSubset, FractionalPoint, SetFunction};

/// Which elements an Include or Exclude attack targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// The `r` lowest-ranked elements of the current global solution.
    WorstR,
    /// The `r` highest-ranked elements of the current global solution.
    TopR,
    Explicit(Vec<ElementId>),
}

fn worst_r() -> TargetPolicy {
    TargetPolicy::WorstR
}

fn top_r() -> TargetPolicy {
    TargetPolicy::TopR
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Random,
    Reverse,
    Include {
        #[serde(default = "worst_r")]
        target: TargetPolicy,
    },
    Exclude {
        #[serde(default = "top_r")]
        target: TargetPolicy,
    },
}

impl AttackSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::Random => "random",
            AttackSpec::Reverse => "reverse",
            AttackSpec::Include { .. } => "include",
            AttackSpec::Exclude { .. } => "exclude",
        }
    }

    pub fn include() -> Self {
        AttackSpec::Include { target: worst_r() }
    }

    pub fn exclude() -> Self {
        AttackSpec::Exclude { target: top_r() }
    }

    pub fn validate(&self, universe: usize) -> Result<()> {
        if let AttackSpec::Include { target: TargetPolicy::Explicit(ids) }
        | AttackSpec::Exclude { target: TargetPolicy::Explicit(ids) } = self
        {
            if ids.is_empty() {
                return Err(Error::InvalidConfig("explicit target set is empty".into()));
            }
            if let Some(&e) = ids.iter().find(|&&e| e >= universe) {
                return Err(Error::ElementOutOfRange { element: e, size: universe });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    /// Fraction of malicious clients, `0 ≤ beta < 0.5`.
    pub beta: f64,
    pub attack: AttackSpec,
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!(
                "beta {} must lie in [0, 0.5)",
                self.beta
            )));
        }
        Ok(())
    }

    /// `floor(beta * n)`.
    pub fn malicious_count(&self, n_clients: usize) -> usize {
        (self.beta * n_clients as f64 + 1e-9).floor() as usize
    }
}

/// Scales `v` down until `Σ v ≤ cap` holds exactly in floating point.
fn fit_sum(v: &mut [f64], cap: f64) {
    for _ in 0..8 {
        let s: f64 = v.iter().sum();
        if s <= cap {
            return;
        }
        let k = cap / s;
        v.iter_mut().for_each(|c| *c *= k);
    }
    // rounding kept pushing the sum over; shave the excess off the largest entry
    let s: f64 = v.iter().sum();
    if s > cap {
        if let Some(m) = v.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *m = (*m - (s - cap) * 2.0).max(0.0);
        }
    }
}

/// A uniform draw from the box, rescaled onto `Σ w = r` when it exceeds the rank.
pub fn random_attack<R: Rng + ?Sized>(constraint: &MatroidConstraint, rng: &mut R) -> GradientVector {
    let mut w: Vec<f64> = (0..constraint.universe()).map(|_| rng.random::<f64>()).collect();
    fit_sum(&mut w, constraint.rank() as f64);
    GradientVector::from_raw(w)
}

/// Pushes the global ranking toward its reverse: ones on the `r` elements
/// with the smallest `x_prev`.
pub fn reverse_attack(x_prev: &FractionalPoint, constraint: &MatroidConstraint) -> GradientVector {
    linear_minimization_over_bases(x_prev.coords(), constraint)
}

/// The unclamped Include update for each member of `e0`, in `e0` order:
/// `min(1, r/|E0|) + mean_{j∈E0} x[j] - x[e]`.
pub fn include_closed_form(x_prev: &FractionalPoint, e0: &ElementSubset, rank: usize) -> Vec<f64> {
    let k = e0.len() as f64;
    let level = (rank as f64 / k).min(1.0);
    let mean = e0.iter().map(|e| x_prev.coords()[e]).sum::<f64>() / k;
    e0.iter().map(|e| level + mean - x_prev.coords()[e]).collect()
}

/// Raises the elements of `e0` toward a common level and leaves the rest at zero.
pub fn include_attack(
    x_prev: &FractionalPoint,
    e0: &ElementSubset,
    constraint: &MatroidConstraint,
) -> Result<GradientVector> {
    if e0.is_empty() {
        return Err(Error::Empty("include target set"));
    }
    let raw = include_closed_form(x_prev, e0, constraint.rank());
    let mut block: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    fit_sum(&mut block, constraint.rank() as f64);
    let mut w = vec![0.0; x_prev.len()];
    for (e, v) in e0.iter().zip(block) {
        w[e] = v;
    }
    Ok(GradientVector::from_raw(w))
}

/// An honest projected gradient with every coordinate in `e0` zeroed.
pub fn exclude_attack<R: Rng + ?Sized>(
    f: &dyn SetFunction,
    x_prev: &FractionalPoint,
    e0: &ElementSubset,
    constraint: &MatroidConstraint,
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientVector> {
    if e0.is_empty() {
        return Err(Error::Empty("exclude target set"));
    }
    let mut w = projected_gradient(f, x_prev, n_samples, constraint, rng);
    for e in e0.iter() {
        w.coords_mut()[e] = 0.0;
    }
    Ok(w)
}

pub fn choose_target_set(
    policy: &TargetPolicy,
    x_prev: &FractionalPoint,
    constraint: &MatroidConstraint,
) -> Result<ElementSubset> {
    match policy {
        TargetPolicy::WorstR => Ok(ElementSubset::from_sorted(bottom_k(
            x_prev.coords(),
            constraint.rank(),
        ))),
        TargetPolicy::TopR => Ok(ElementSubset::from_sorted(top_k(
            x_prev.coords(),
            constraint.rank(),
        ))),
        TargetPolicy::Explicit(ids) => ElementSubset::new(ids.iter().copied(), x_prev.len()),
    }
}

/// Computes the fake upload of a malicious client.
///
/// `f` is the attacker-controlled client's own local function; only the
/// Exclude attack reads it.
pub fn attack_gradient<R: Rng + ?Sized>(
    spec: &AttackSpec,
    f: &dyn SetFunction,
    x_prev: &FractionalPoint,
    constraint: &MatroidConstraint,
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientVector> {
    match spec {
        AttackSpec::Random => Ok(random_attack(constraint, rng)),
        AttackSpec::Reverse => Ok(reverse_attack(x_prev, constraint)),
        AttackSpec::Include { target } => {
            let e0 = choose_target_set(target, x_prev, constraint)?;
            include_attack(x_prev, &e0, constraint)
        }
        AttackSpec::Exclude { target } => {
            let e0 = choose_target_set(target, x_prev, constraint)?;
            exclude_attack(f, x_prev, &e0, constraint, n_samples, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matroid::{polytope_contains, MEMBERSHIP_TOL};
    use crate::rng::{Domain, Seeder};
    use crate::submodular::ModularFn;

    fn c(r: usize, n: usize) -> MatroidConstraint {
        MatroidConstraint::uniform(r, n).unwrap()
    }

    fn x(v: &[f64]) -> FractionalPoint {
        FractionalPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn random_attack_is_valid() {
        let m = c(3, 10);
        let s = Seeder::new(9);
        for i in 0..200 {
            let w = random_attack(&m, &mut s.stream(Domain::Misc, i, 0));
            assert!(polytope_contains(w.coords(), &m, 0.0));
        }
    }

    #[test]
    fn random_attack_full_rank_is_unscaled() {
        let m = c(6, 6);
        let mut a = Seeder::new(3).stream(Domain::Misc, 0, 0);
        let mut b = Seeder::new(3).stream(Domain::Misc, 0, 0);
        let w = random_attack(&m, &mut a);
        let u: Vec<f64> = (0..6).map(|_| b.random::<f64>()).collect();
        assert_eq!(w.coords(), u.as_slice());
    }

    #[test]
    fn random_attack_differs_across_streams() {
        let m = c(2, 8);
        let s = Seeder::new(4);
        let draws: Vec<_> = (0..12)
            .map(|i| random_attack(&m, &mut s.stream(Domain::Misc, i, 0)))
            .collect();
        for i in 0..draws.len() {
            for j in i + 1..draws.len() {
                assert_ne!(draws[i], draws[j]);
            }
        }
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(reverse_attack(&x(&[0.9, 0.1, 0.5]), &c(2, 3)).coords(), &[0.0, 1.0, 1.0]);
        assert_eq!(reverse_attack(&FractionalPoint::zeros(4), &c(2, 4)).coords(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn include_examples() {
        let m = c(2, 6);
        let e0 = ElementSubset::new([1, 4], 6).unwrap();
        let w = include_attack(&FractionalPoint::zeros(6), &e0, &m).unwrap();
        assert_eq!(w.coords(), &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);

        let e0 = ElementSubset::new([0, 1, 2, 3], 6).unwrap();
        let w = include_attack(&FractionalPoint::zeros(6), &e0, &m).unwrap();
        assert_eq!(w.coords(), &[0.5, 0.5, 0.5, 0.5, 0.0, 0.0]);

        let xp = x(&[0.3, 0.3, 0.3, 0.9, 0.0, 0.0]);
        let e0 = ElementSubset::new([0, 1, 2], 6).unwrap();
        let w = include_attack(&xp, &e0, &c(2, 6)).unwrap();
        assert!(w.coords()[..3].iter().all(|v| (v - w.coords()[0]).abs() < 1e-15));
        assert!(include_attack(&xp, &ElementSubset::empty(), &m).is_err());
    }

    #[test]
    fn include_skewed_prev_is_clamped_and_rescaled() {
        // raw values: 1 + 0.5 - 0 = 1.5 and 1 + 0.5 - 1 = 0.5, then clamped
        let xp = x(&[0.0, 1.0, 0.2]);
        let e0 = ElementSubset::new([0, 1], 3).unwrap();
        let m = c(1, 3);
        let raw = include_closed_form(&xp, &e0, 1);
        assert_eq!(raw, vec![1.0, 0.0]);
        let w = include_attack(&xp, &e0, &m).unwrap();
        assert!(polytope_contains(w.coords(), &m, 0.0));

        let xp = x(&[0.0, 1.0, 0.0, 0.0]);
        let e0 = ElementSubset::new([0, 1], 4).unwrap();
        let m = c(2, 4);
        assert_eq!(include_closed_form(&xp, &e0, 2), vec![1.5, 0.5]);
        let w = include_attack(&xp, &e0, &m).unwrap();
        assert_eq!(w.coords(), &[1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn exclude_examples() {
        let f = ModularFn::new(vec![5.0, 4.0, 1.0, 0.5]);
        let m = c(2, 4);
        let x0 = FractionalPoint::zeros(4);
        let mut rng = Seeder::new(1).stream(Domain::Misc, 0, 0);
        let disjoint = ElementSubset::new([3], 4).unwrap();
        let w = exclude_attack(&f, &x0, &disjoint, &m, 3, &mut rng).unwrap();
        assert_eq!(w.coords(), &[1.0, 1.0, 0.0, 0.0]);
        let cover = ElementSubset::new([0, 1, 2], 4).unwrap();
        let w = exclude_attack(&f, &x0, &cover, &m, 3, &mut rng).unwrap();
        assert_eq!(w.coords(), &[0.0; 4]);
        assert!(polytope_contains(w.coords(), &m, MEMBERSHIP_TOL));
    }

    #[test]
    fn target_set_examples() {
        let m = c(2, 3);
        let xp = x(&[0.9, 0.1, 0.5]);
        assert_eq!(choose_target_set(&TargetPolicy::WorstR, &xp, &m).unwrap().as_slice(), &[1, 2]);
        assert_eq!(choose_target_set(&TargetPolicy::TopR, &xp, &m).unwrap().as_slice(), &[0, 2]);
        let flat = x(&[0.2; 3]);
        assert_eq!(choose_target_set(&TargetPolicy::WorstR, &flat, &m).unwrap().as_slice(), &[0, 1]);
        assert_eq!(choose_target_set(&TargetPolicy::TopR, &flat, &m).unwrap().as_slice(), &[0, 1]);
        let explicit = TargetPolicy::Explicit(vec![2]);
        assert_eq!(choose_target_set(&explicit, &xp, &m).unwrap().as_slice(), &[2]);
    }

    #[test]
    fn attack_spec_json() {
        let s: AttackSpec = serde_json::from_str(r#"{"kind":"include"}"#).unwrap();
        assert_eq!(s, AttackSpec::include());
        let s: AttackSpec =
            serde_json::from_str(r#"{"kind":"exclude","target":{"explicit":[1,2]}}"#).unwrap();
        assert_eq!(s, AttackSpec::Exclude { target: TargetPolicy::Explicit(vec![1, 2]) });
        assert!(s.validate(2).is_err());
        assert!(serde_json::from_str::<AttackSpec>(r#"{"kind":"flood"}"#).is_err());
        assert!(serde_json::from_str::<AttackSpec>(r#"{"kind":"include","targets":"top_r"}"#).is_err());
    }

    #[test]
    fn beta_bounds() {
        let bad = AdversaryConfig { beta: 0.5, attack: AttackSpec::Random };
        assert!(bad.validate().is_err());
        let ok = AdversaryConfig { beta: 0.33, attack: AttackSpec::Random };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.malicious_count(30), 9);
        assert_eq!(AdversaryConfig { beta: 0.25, attack: AttackSpec::Random }.malicious_count(60), 15);
    }
}
