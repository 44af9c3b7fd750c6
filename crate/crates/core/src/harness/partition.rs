//! Non-iid client partitioning.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::{Domain, Seeder};

fn dirichlet<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut p: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        p.iter_mut().for_each(|v| *v /= sum);
    } else {
        // every draw underflowed; the limit of a tiny alpha is a one-hot vector
        p.iter_mut().for_each(|v| *v = 0.0);
        p[rng.random_range(0..k)] = 1.0;
    }
    Ok(p)
}

/// Assigns every item to exactly one client.
///
/// For each category, client shares are drawn from `Dirichlet(alpha)` and the
/// category's shuffled items are cut at the cumulative shares. Clients left
/// empty then take one item from the currently largest client.
pub fn dirichlet_partition(
    categories: &[usize],
    n_categories: usize,
    n_clients: usize,
    alpha: f64,
    seeder: &Seeder,
) -> Result<Vec<Vec<usize>>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("dirichlet alpha {alpha} must be positive")));
    }
    if n_clients == 0 {
        return Err(Error::InvalidConfig("at least one client is needed".into()));
    }
    if categories.len() < n_clients {
        return Err(Error::InvalidConfig(format!(
            "{} items cannot fill {n_clients} clients",
            categories.len()
        )));
    }
    let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); n_categories];
    for (i, &c) in categories.iter().enumerate() {
        by_cat
            .get_mut(c)
            .ok_or_else(|| Error::InvalidConfig(format!("category {c} out of range")))?
            .push(i);
    }
    let mut rng = seeder.stream(Domain::Partition, 0, 0);
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for items in by_cat.iter_mut() {
        if items.is_empty() {
            continue;
        }
        items.shuffle(&mut rng);
        let shares = dirichlet(alpha, n_clients, &mut rng)?;
        let m = items.len() as f64;
        let mut cum = 0.0;
        let mut start = 0;
        for (client, share) in shares.iter().enumerate() {
            cum += share;
            let end = if client + 1 == n_clients { items.len() } else { ((cum * m).round() as usize).min(items.len()) };
            if end > start {
                parts[client].extend_from_slice(&items[start..end]);
                start = end;
            }
        }
    }
    while let Some(empty) = parts.iter().position(Vec::is_empty) {
        let donor = (0..n_clients)
            .max_by(|&a, &b| parts[a].len().cmp(&parts[b].len()).then(b.cmp(&a)))
            .expect("at least one client");
        let item = parts[donor].pop().expect("donor holds at least two items");
        parts[empty].push(item);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}
