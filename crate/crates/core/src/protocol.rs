//! The federated continuous greedy round protocol.
//!
//! Each round the server broadcasts the global solution (or, under the robust
//! aggregators, a pair of candidates), every selected client uploads one
//! projected gradient, and the server aggregates the uploads into the next
//! global solution. Client steps within a round are independent and run in
//! parallel when the `parallel` feature is on; results never depend on it.

use std::sync::Arc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::adversary::{attack_gradient, AttackSpec};
use crate::continuous::{projected_gradient, raw_step, GreedyConfig};
use crate::error::{Error, Result};
use crate::matroid::{polytope_contains, round_to_subset, GradientVector, MatroidConstraint, MEMBERSHIP_TOL};
use crate::rng::{Domain, Seeder};
use crate::robust::{
    client_select_candidate, coreset_candidate, median_aggregate, pool_coreset, validate_q,
    Candidate, CandidatePair, CoresetObjective, DEFAULT_Q,
};
use crate::submodular::{ElementSubset, FractionalPoint, SetFunction};

pub type ClientId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Honesty {
    Honest,
    Malicious(AttackSpec),
}

/// A participant: its private objective and whether it follows the protocol.
#[derive(Clone)]
pub struct Client {
    pub id: ClientId,
    pub local_fn: Arc<dyn SetFunction>,
    pub honesty: Honesty,
}

impl Client {
    pub fn honest(id: ClientId, local_fn: Arc<dyn SetFunction>) -> Self {
        Self { id, local_fn, honesty: Honesty::Honest }
    }

    pub fn is_honest(&self) -> bool {
        self.honesty == Honesty::Honest
    }
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client")
            .field("id", &self.id)
            .field("honesty", &self.honesty)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Participation {
    Full,
    /// `k` clients sampled uniformly without replacement each round.
    Partial(usize),
}

/// How the server combines uploaded gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregator {
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "geometric_median")]
    GeometricMedian,
    #[serde(rename = "robustfsm")]
    RobustFsm,
    #[serde(rename = "robustfsm_sim")]
    RobustFsmSim,
    #[serde(rename = "robustfsm_div")]
    RobustFsmDiv,
}

impl Aggregator {
    pub const ALL: [Aggregator; 5] = [
        Aggregator::Mean,
        Aggregator::GeometricMedian,
        Aggregator::RobustFsm,
        Aggregator::RobustFsmSim,
        Aggregator::RobustFsmDiv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::GeometricMedian => "geometric_median",
            Aggregator::RobustFsm => "robustfsm",
            Aggregator::RobustFsmSim => "robustfsm_sim",
            Aggregator::RobustFsmDiv => "robustfsm_div",
        }
    }

    fn coreset_objectives(&self) -> &'static [CoresetObjective] {
        match self {
            Aggregator::RobustFsm => &[CoresetObjective::MaxSimilar, CoresetObjective::MaxDiverse],
            Aggregator::RobustFsmSim => &[CoresetObjective::MaxSimilar],
            Aggregator::RobustFsmDiv => &[CoresetObjective::MaxDiverse],
            _ => &[],
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Aggregator::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown aggregator '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub greedy: GreedyConfig,
    /// Coreset fraction for the robust aggregators.
    pub q: f64,
    /// Compare candidates by `f(top-r)` instead of sampled multilinear values.
    pub fast_select: bool,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self { greedy: GreedyConfig::default(), q: DEFAULT_Q, fast_select: true }
    }
}

/// One client's upload for a round, starting from `x_global`.
///
/// Honest clients return `LMO(∇F_i(x_global))`; malicious ones return their
/// attack vector, computed against the same point.
pub fn client_local_step(
    client: &Client,
    x_global: &FractionalPoint,
    config: &GreedyConfig,
    constraint: &MatroidConstraint,
    seeder: &Seeder,
    round: usize,
) -> Result<GradientVector> {
    let mut rng = seeder.client_step(client.id, round);
    match &client.honesty {
        Honesty::Honest => Ok(projected_gradient(
            client.local_fn.as_ref(),
            x_global,
            config.n_samples,
            constraint,
            &mut rng,
        )),
        Honesty::Malicious(spec) => attack_gradient(
            spec,
            client.local_fn.as_ref(),
            x_global,
            constraint,
            config.n_samples,
            &mut rng,
        ),
    }
}

/// Coordinate-wise arithmetic mean.
pub fn mean_aggregate(gradients: &[&GradientVector]) -> Result<GradientVector> {
    let first = gradients.first().ok_or(Error::Empty("gradients to aggregate"))?;
    let n = first.len();
    let mut sum = vec![0.0; n];
    for g in gradients {
        if g.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.len() });
        }
        for (s, v) in sum.iter_mut().zip(g.coords()) {
            *s += v;
        }
    }
    let k = gradients.len() as f64;
    Ok(GradientVector::from_raw(sum.into_iter().map(|s| s / k).collect()))
}

/// Last gradient uploaded by each client.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCache {
    universe: usize,
    last: Vec<Option<GradientVector>>,
}

impl GradientCache {
    pub fn new(n_clients: usize, universe: usize) -> Self {
        Self { universe, last: vec![None; n_clients] }
    }

    pub fn get(&self, client: ClientId) -> Option<&GradientVector> {
        self.last.get(client).and_then(Option::as_ref)
    }
}

/// Fresh gradients from this round plus the cached gradient of every other
/// client, in client-id order. A client that never uploaded contributes zero.
pub fn stale_gradient_pool(
    round_gradients: &[(ClientId, GradientVector)],
    cache: &mut GradientCache,
) -> Vec<(ClientId, GradientVector)> {
    for (id, w) in round_gradients {
        cache.last[*id] = Some(w.clone());
    }
    cache
        .last
        .iter()
        .enumerate()
        .map(|(id, w)| (id, w.clone().unwrap_or_else(|| GradientVector::zeros(cache.universe))))
        .collect()
}

/// Members of one coreset in a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetRecord {
    pub objective: CoresetObjective,
    pub members: Vec<ClientId>,
}

/// Everything observed in one aggregation round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub participants: Vec<ClientId>,
    /// The global solution `x^(t-1)`: the adopted candidate when two were
    /// broadcast. Malicious clients attack at this point.
    pub base: FractionalPoint,
    /// Candidate each participant started from, when two were broadcast.
    pub choices: Vec<(ClientId, Candidate)>,
    pub uploads: Vec<(ClientId, GradientVector)>,
    /// New global solution(s): one for the single-candidate aggregators, `[sim, div]` for RobustFSM.
    pub candidates: Vec<FractionalPoint>,
    /// `x_prev + η w` for each candidate, before clamping. Each RobustFSM
    /// candidate steps from its own previous value; the others step from `base`.
    pub pre_clamp: Vec<Vec<f64>>,
    pub coresets: Vec<CoresetRecord>,
    /// Index into `candidates` of the solution the clients adopted.
    pub adopted: usize,
}

impl RoundRecord {
    pub fn solution(&self) -> &FractionalPoint {
        &self.candidates[self.adopted]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedRun {
    pub x: FractionalPoint,
    pub subset: ElementSubset,
    pub rounds: Vec<RoundRecord>,
}

fn select_participants(
    participation: Participation,
    n: usize,
    seeder: &Seeder,
    round: usize,
) -> Vec<ClientId> {
    match participation {
        Participation::Full => (0..n).collect(),
        Participation::Partial(k) => {
            let mut rng = seeder.stream(Domain::Participation, round as u64, 0);
            let mut ids = sample(&mut rng, n, k).into_vec();
            ids.sort_unstable();
            ids
        }
    }
}

#[cfg(feature = "parallel")]
fn map_clients<T, F>(ids: &[ClientId], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(ClientId) -> T + Sync + Send,
{
    use rayon::prelude::*;
    ids.par_iter().map(|&id| f(id)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_clients<T, F>(ids: &[ClientId], f: F) -> Vec<T>
where
    F: Fn(ClientId) -> T,
{
    ids.iter().map(|&id| f(id)).collect()
}

/// Each voter picks a candidate; the majority wins and ties go to `sim`.
fn vote(
    clients: &[Client],
    voters: &[ClientId],
    pair: &CandidatePair,
    constraint: &MatroidConstraint,
    config: &FedConfig,
    seeder: &Seeder,
    round: usize,
) -> (Vec<(ClientId, Candidate)>, Candidate) {
    let choices: Vec<(ClientId, Candidate)> = map_clients(voters, |id| {
        let mut rng = seeder.stream(Domain::Selection, id as u64, round as u64);
        let c = client_select_candidate(
            clients[id].local_fn.as_ref(),
            pair,
            constraint,
            config.fast_select,
            config.greedy.n_samples,
            &mut rng,
        );
        (id, c)
    });
    let div = choices.iter().filter(|(_, c)| *c == Candidate::Div).count();
    let winner = if 2 * div > choices.len() { Candidate::Div } else { Candidate::Sim };
    (choices, winner)
}

fn candidate_index(c: Candidate) -> usize {
    match c {
        Candidate::Sim => 0,
        Candidate::Div => 1,
    }
}

/// Runs `config.greedy.rounds` rounds of the protocol from `x = 0`.
///
/// With [`Aggregator::RobustFsm`] two candidates are broadcast each round.
/// Every participant picks one and honest clients step from their pick. The
/// `sim` and `div` candidates each advance from their own previous value, and
/// the majority pick (ties to `sim`) is recorded as adopted. After the last
/// round all clients vote once more to choose the returned solution.
///
/// Client ids must equal their position in `clients`. Any upload outside the
/// matroid polytope aborts the run with [`Error::InvalidGradient`].
pub fn run_fedcg(
    clients: &[Client],
    constraint: &MatroidConstraint,
    config: &FedConfig,
    participation: Participation,
    aggregator: Aggregator,
    seeder: &Seeder,
) -> Result<FedRun> {
    config.greedy.validate()?;
    validate_q(config.q)?;
    let n_clients = clients.len();
    if n_clients == 0 {
        return Err(Error::Empty("clients"));
    }
    if let Some((pos, c)) = clients.iter().enumerate().find(|(i, c)| c.id != *i) {
        return Err(Error::InvalidConfig(format!("client at position {pos} has id {}", c.id)));
    }
    if let Participation::Partial(k) = participation {
        if k == 0 || k > n_clients {
            return Err(Error::InvalidConfig(format!(
                "partial participation of {k} clients out of {n_clients}"
            )));
        }
    }
    let n = constraint.universe();
    if let Some(c) = clients.iter().find(|c| c.local_fn.ground_size() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: c.local_fn.ground_size() });
    }
    let eta = config.greedy.learning_rate;
    let mut cache = GradientCache::new(n_clients, n);
    let mut records: Vec<RoundRecord> = Vec::with_capacity(config.greedy.rounds);
    let mut broadcast = vec![FractionalPoint::zeros(n)];

    for t in 1..=config.greedy.rounds {
        let participants = select_participants(participation, n_clients, seeder, t);

        let (choices, base_choice) = if broadcast.len() == 2 {
            let pair = CandidatePair { x_sim: broadcast[0].clone(), x_div: broadcast[1].clone() };
            let (choices, winner) = vote(clients, &participants, &pair, constraint, config, seeder, t);
            if let Some(prev) = records.last_mut() {
                prev.adopted = candidate_index(winner);
            }
            (choices, winner)
        } else {
            (Vec::new(), Candidate::Sim)
        };
        let base = broadcast[candidate_index(base_choice).min(broadcast.len() - 1)].clone();

        let uploads: Vec<Result<(ClientId, GradientVector)>> = map_clients(&participants, |id| {
            let client = &clients[id];
            // an honest client steps from the candidate it picked
            let start = match choices.iter().find(|(c, _)| *c == id) {
                Some((_, pick)) if client.is_honest() => &broadcast[candidate_index(*pick)],
                _ => &base,
            };
            client_local_step(client, start, &config.greedy, constraint, seeder, t).map(|w| (id, w))
        });
        let uploads = uploads.into_iter().collect::<Result<Vec<_>>>()?;
        if let Some((id, _)) = uploads
            .iter()
            .find(|(_, w)| !polytope_contains(w.coords(), constraint, MEMBERSHIP_TOL))
        {
            return Err(Error::InvalidGradient { client: *id, round: t });
        }

        let pool = match participation {
            Participation::Full => uploads.clone(),
            Participation::Partial(_) => stale_gradient_pool(&uploads, &mut cache),
        };

        let mut candidates = Vec::new();
        let mut pre_clamp = Vec::new();
        let mut coresets = Vec::new();
        match aggregator {
            Aggregator::Mean | Aggregator::GeometricMedian => {
                let refs: Vec<&GradientVector> = uploads.iter().map(|(_, w)| w).collect();
                let w = if aggregator == Aggregator::Mean {
                    mean_aggregate(&refs)?
                } else {
                    median_aggregate(&refs)?
                };
                let raw = raw_step(&base, w.coords(), eta);
                candidates.push(FractionalPoint::clamped(&raw));
                pre_clamp.push(raw);
            }
            _ => {
                for (k, &objective) in aggregator.coreset_objectives().iter().enumerate() {
                    let members = pool_coreset(&pool, config.q, objective)?;
                    let prev = &broadcast[k.min(broadcast.len() - 1)];
                    let (x, raw) = coreset_candidate(&pool, &members, prev, eta)?;
                    candidates.push(x);
                    pre_clamp.push(raw);
                    coresets.push(CoresetRecord { objective, members });
                }
            }
        }

        broadcast = candidates.clone();
        records.push(RoundRecord {
            round: t,
            participants,
            base,
            choices,
            uploads,
            candidates,
            pre_clamp,
            coresets,
            adopted: 0,
        });
    }

    let x = if broadcast.len() == 2 {
        let pair = CandidatePair { x_sim: broadcast[0].clone(), x_div: broadcast[1].clone() };
        let everyone: Vec<ClientId> = (0..n_clients).collect();
        let (_, winner) =
            vote(clients, &everyone, &pair, constraint, config, seeder, config.greedy.rounds + 1);
        if let Some(last) = records.last_mut() {
            last.adopted = candidate_index(winner);
        }
        broadcast.swap_remove(candidate_index(winner))
    } else {
        broadcast.swap_remove(0)
    };
    let subset = round_to_subset(&x, constraint);
    Ok(FedRun { x, subset, rounds: records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::ModularFn;

    fn modular_client(id: ClientId, w: Vec<f64>) -> Client {
        Client::honest(id, Arc::new(ModularFn::new(w)))
    }

    #[test]
    fn mean_examples() {
        let a = GradientVector::from_raw(vec![1.0, 0.0]);
        let b = GradientVector::from_raw(vec![0.0, 1.0]);
        assert_eq!(mean_aggregate(&[&a]).unwrap(), a);
        assert_eq!(mean_aggregate(&[&a, &b]).unwrap().coords(), &[0.5, 0.5]);
        assert!(mean_aggregate(&[]).is_err());
        let m = MatroidConstraint::uniform(1, 2).unwrap();
        assert!(polytope_contains(mean_aggregate(&[&a, &b]).unwrap().coords(), &m, 0.0));
    }

    #[test]
    fn zero_weight_client_uploads_zero() {
        let c = modular_client(0, vec![0.0; 4]);
        let m = MatroidConstraint::uniform(2, 4).unwrap();
        let w = client_local_step(&c, &FractionalPoint::zeros(4), &GreedyConfig::default(), &m, &Seeder::new(1), 1)
            .unwrap();
        assert_eq!(w.coords(), &[0.0; 4]);
    }

    #[test]
    fn stale_pool_semantics() {
        let mut cache = GradientCache::new(3, 2);
        let g = |a: f64, b: f64| GradientVector::from_raw(vec![a, b]);
        let pool = stale_gradient_pool(&[(0, g(1.0, 0.0)), (1, g(0.0, 1.0)), (2, g(1.0, 1.0))], &mut cache);
        assert_eq!(pool.len(), 3);
        assert_eq!(pool[2].1, g(1.0, 1.0));

        let mut cache = GradientCache::new(3, 2);
        stale_gradient_pool(&[(1, g(0.0, 1.0))], &mut cache);
        let pool = stale_gradient_pool(&[(0, g(1.0, 0.0))], &mut cache);
        assert_eq!(pool[0].1, g(1.0, 0.0));
        assert_eq!(pool[1].1, g(0.0, 1.0));
        assert_eq!(pool[2].1, GradientVector::zeros(2));
    }

    #[test]
    fn shared_function_matches_single_client() {
        let m = MatroidConstraint::uniform(2, 4).unwrap();
        let w = vec![1.0, 3.0, 2.0, 0.5];
        let config = FedConfig { greedy: GreedyConfig { rounds: 20, ..GreedyConfig::default() }, ..FedConfig::default() };
        let seeder = Seeder::new(3);
        let many: Vec<Client> = (0..5).map(|i| modular_client(i, w.clone())).collect();
        let one = vec![modular_client(0, w)];
        let a = run_fedcg(&many, &m, &config, Participation::Full, Aggregator::Mean, &seeder).unwrap();
        let b = run_fedcg(&one, &m, &config, Participation::Full, Aggregator::Mean, &seeder).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.subset.as_slice(), &[1, 2]);
    }

    #[test]
    fn partial_participation_samples_k() {
        let m = MatroidConstraint::uniform(1, 3).unwrap();
        let clients: Vec<Client> = (0..6).map(|i| modular_client(i, vec![1.0, i as f64, 2.0])).collect();
        let config = FedConfig { greedy: GreedyConfig { rounds: 8, ..GreedyConfig::default() }, ..FedConfig::default() };
        for agg in Aggregator::ALL {
            let run = run_fedcg(&clients, &m, &config, Participation::Partial(2), agg, &Seeder::new(11)).unwrap();
            assert!(run.rounds.iter().all(|r| r.participants.len() == 2 && r.uploads.len() == 2));
            if agg == Aggregator::RobustFsm {
                // coresets come from the full stale pool of six
                assert!(run.rounds.iter().all(|r| r.coresets.iter().all(|c| c.members.len() == 4)));
            }
        }
        assert!(run_fedcg(&clients, &m, &config, Participation::Partial(7), Aggregator::Mean, &Seeder::new(1)).is_err());
    }

    #[test]
    fn rejects_misnumbered_clients() {
        let m = MatroidConstraint::uniform(1, 2).unwrap();
        let clients = vec![modular_client(1, vec![1.0, 0.0])];
        assert!(run_fedcg(&clients, &m, &FedConfig::default(), Participation::Full, Aggregator::Mean, &Seeder::new(0)).is_err());
    }

    #[test]
    fn aggregator_names_round_trip() {
        for a in Aggregator::ALL {
            assert_eq!(a.name().parse::<Aggregator>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert!("median".parse::<Aggregator>().is_err());
    }
}
