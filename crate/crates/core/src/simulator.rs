//! Finite-population Monte Carlo of frameless ALOHA with perfect SIC.
//!
//! A trial draws a random bipartite contention graph (user `u` of class `l`
//! transmits in slot `s` of class `j` with probability `alpha_lj / (a_l N)`),
//! marks every replica as lost with its class loss probability, and then
//! peels the graph: a slot left with exactly one unresolved user resolves
//! that user unless the surviving replica is lost, and resolved users are
//! cancelled from every slot they occupy.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SystemConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ContentionGraph {
    pub num_users: usize,
    pub num_slots: usize,
    pub user_class_of: Vec<usize>,
    pub slot_class_of: Vec<usize>,
    /// `(user, slot)` pairs, sorted, without duplicates.
    pub edges: Vec<(usize, usize)>,
    /// `lost[e]` is true when the replica on edge `e` is erased by noise.
    pub lost: Vec<bool>,
    pub num_user_classes: usize,
}

impl ContentionGraph {
    /// Builds a graph from explicit edges. All users and slots belong to
    /// class 0.
    pub fn from_edges(
        num_users: usize,
        num_slots: usize,
        edges: Vec<(usize, usize)>,
        lost: Vec<bool>,
    ) -> Result<Self> {
        let graph = Self {
            num_users,
            num_slots,
            user_class_of: vec![0; num_users],
            slot_class_of: vec![0; num_slots],
            edges,
            lost,
            num_user_classes: 1,
        };
        graph.check()?;
        Ok(graph)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn check(&self) -> Result<()> {
        if self.lost.len() != self.edges.len() {
            return Err(Error::InvalidArgument(format!(
                "{} edges but {} loss flags",
                self.edges.len(),
                self.lost.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.edges.len());
        for &(u, s) in &self.edges {
            if u >= self.num_users || s >= self.num_slots {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {s}) out of range"
                )));
            }
            if !seen.insert((u, s)) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {s})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub resolved: Vec<bool>,
    pub resolved_count: usize,
    pub resolved_fraction: f64,
    pub per_class_resolved_fraction: Vec<f64>,
    /// Resolved users per slot.
    pub throughput: f64,
    /// Number of parallel peeling rounds that resolved at least one user.
    pub peel_rounds: usize,
}

/// Splits `total` items into classes proportional to `fractions` using
/// largest-remainder rounding, so that the counts sum to `total` exactly.
pub fn largest_remainder(fractions: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // larger remainder first, lower index on ties
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Number of slots `round((1 + epsilon) N)`.
pub fn num_slots(config: &SystemConfig, num_users: usize) -> usize {
    (config.slots_per_user() * num_users as f64).round() as usize
}

/// Draws a contention graph for `num_users` users from `rng`.
pub fn build_graph_with_rng<R: Rng + ?Sized>(
    config: &SystemConfig,
    num_users: usize,
    rng: &mut R,
) -> Result<ContentionGraph> {
    config.validate()?;
    let l_count = config.num_user_classes();
    let j_count = config.num_slot_classes();
    if num_users < l_count {
        return Err(Error::Population(format!(
            "N = {num_users} is smaller than the number of user classes ({l_count})"
        )));
    }
    let user_counts = largest_remainder(
        &config.user_classes.iter().map(|u| u.fraction).collect::<Vec<_>>(),
        num_users,
    );
    if let Some(l) = user_counts.iter().position(|&c| c == 0) {
        return Err(Error::Population(format!(
            "user class {l} is empty at N = {num_users}"
        )));
    }
    let m = num_slots(config, num_users);
    if m == 0 {
        return Err(Error::Population(format!(
            "epsilon = {} leaves no slots at N = {num_users}",
            config.epsilon
        )));
    }
    let slot_counts = largest_remainder(
        &config.slot_classes.iter().map(|s| s.fraction).collect::<Vec<_>>(),
        m,
    );
    let mut probs = vec![0.0; l_count * j_count];
    for l in 0..l_count {
        for j in 0..j_count {
            probs[l * j_count + j] = config.access_probability(l, j, num_users)?;
        }
    }

    let user_class_of: Vec<usize> = expand(&user_counts);
    let slot_class_of: Vec<usize> = expand(&slot_counts);
    let slot_offsets: Vec<usize> = offsets(&slot_counts);

    let mut edges = Vec::new();
    let mut lost = Vec::new();
    for (user, &l) in user_class_of.iter().enumerate() {
        let loss_prob = config.user_classes[l].loss_prob;
        for j in 0..j_count {
            let p = probs[l * j_count + j];
            let available = slot_counts[j];
            if p == 0.0 || available == 0 {
                continue;
            }
            // each of the class-j slots is hit independently with probability p
            let degree = Binomial::new(available as u64, p)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng) as usize;
            let mut chosen = index::sample(rng, available, degree).into_vec();
            chosen.sort_unstable();
            for s in chosen {
                edges.push((user, slot_offsets[j] + s));
                lost.push(rng.gen_bool(loss_prob));
            }
        }
    }
    Ok(ContentionGraph {
        num_users,
        num_slots: m,
        user_class_of,
        slot_class_of,
        edges,
        lost,
        num_user_classes: l_count,
    })
}

/// Deterministic graph for `(config, num_users, seed)`.
pub fn build_graph(config: &SystemConfig, num_users: usize, seed: u64) -> Result<ContentionGraph> {
    build_graph_with_rng(config, num_users, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn expand(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(class, &c)| std::iter::repeat_n(class, c))
        .collect()
}

fn offsets(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .scan(0, |acc, &c| {
            let start = *acc;
            *acc += c;
            Some(start)
        })
        .collect()
}

struct Adjacency {
    slot_edges: Vec<Vec<usize>>,
    user_edges: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(graph: &ContentionGraph) -> Self {
        let mut slot_edges = vec![Vec::new(); graph.num_slots];
        let mut user_edges = vec![Vec::new(); graph.num_users];
        for (e, &(u, s)) in graph.edges.iter().enumerate() {
            slot_edges[s].push(e);
            user_edges[u].push(e);
        }
        Self {
            slot_edges,
            user_edges,
        }
    }
}

/// Peeling decoder state shared by the round-based and randomized schedules.
struct Peeler<'a> {
    graph: &'a ContentionGraph,
    adj: Adjacency,
    degree: Vec<usize>,
    exhausted: Vec<bool>,
    resolved: Vec<bool>,
}

impl<'a> Peeler<'a> {
    fn new(graph: &'a ContentionGraph) -> Self {
        let adj = Adjacency::new(graph);
        let degree = adj.slot_edges.iter().map(Vec::len).collect();
        Self {
            graph,
            adj,
            degree,
            exhausted: vec![false; graph.num_slots],
            resolved: vec![false; graph.num_users],
        }
    }

    fn initial_singletons(&self) -> Vec<usize> {
        (0..self.graph.num_slots)
            .filter(|&s| self.degree[s] == 1)
            .collect()
    }

    /// Processes a slot that reached degree one. Returns the slots that
    /// dropped to degree one as a consequence.
    fn process(&mut self, slot: usize, newly_singleton: &mut Vec<usize>) -> bool {
        if self.exhausted[slot] || self.degree[slot] != 1 {
            return false;
        }
        self.exhausted[slot] = true;
        let edge = self.adj.slot_edges[slot]
            .iter()
            .copied()
            .find(|&e| !self.resolved[self.graph.edges[e].0])
            .expect("degree-one slot has an unresolved user");
        if self.graph.lost[edge] {
            return false;
        }
        let user = self.graph.edges[edge].0;
        self.resolved[user] = true;
        for &e in &self.adj.user_edges[user] {
            let s = self.graph.edges[e].1;
            self.degree[s] -= 1;
            if self.degree[s] == 1 && !self.exhausted[s] {
                newly_singleton.push(s);
            }
        }
        true
    }

    fn finish(self, peel_rounds: usize) -> TrialOutcome {
        let graph = self.graph;
        let resolved_count = self.resolved.iter().filter(|&&r| r).count();
        let mut class_sizes = vec![0usize; graph.num_user_classes];
        let mut class_resolved = vec![0usize; graph.num_user_classes];
        for (u, &c) in graph.user_class_of.iter().enumerate() {
            class_sizes[c] += 1;
            if self.resolved[u] {
                class_resolved[c] += 1;
            }
        }
        TrialOutcome {
            resolved_fraction: if graph.num_users == 0 {
                0.0
            } else {
                resolved_count as f64 / graph.num_users as f64
            },
            per_class_resolved_fraction: class_resolved
                .iter()
                .zip(&class_sizes)
                .map(|(&r, &n)| if n == 0 { 0.0 } else { r as f64 / n as f64 })
                .collect(),
            throughput: if graph.num_slots == 0 {
                0.0
            } else {
                resolved_count as f64 / graph.num_slots as f64
            },
            resolved_count,
            resolved: self.resolved,
            peel_rounds,
        }
    }
}

/// Peels `graph` in parallel rounds: every slot at degree one at the start of
/// a round is processed before the slots it exposes.
pub fn peel(graph: &ContentionGraph) -> TrialOutcome {
    let mut peeler = Peeler::new(graph);
    let mut frontier = peeler.initial_singletons();
    let mut next = Vec::new();
    let mut rounds = 0;
    while !frontier.is_empty() {
        let mut progress = false;
        for &s in &frontier {
            progress |= peeler.process(s, &mut next);
        }
        if progress {
            rounds += 1;
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    peeler.finish(rounds)
}

/// Peels `graph` picking the next degree-one slot uniformly at random from
/// the pending set. The resolved set does not depend on the order.
pub fn peel_randomized<R: Rng + ?Sized>(graph: &ContentionGraph, rng: &mut R) -> TrialOutcome {
    let mut peeler = Peeler::new(graph);
    let mut pending = peeler.initial_singletons();
    let mut exposed = Vec::new();
    let mut steps = 0;
    while !pending.is_empty() {
        let pick = rng.gen_range(0..pending.len());
        let s = pending.swap_remove(pick);
        if peeler.process(s, &mut exposed) {
            steps += 1;
        }
        pending.append(&mut exposed);
    }
    peeler.finish(steps)
}

/// Summary of one trial, without the per-user resolved flags.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: u64,
    pub num_slots: usize,
    pub num_edges: usize,
    pub resolved_fraction: f64,
    pub per_class_resolved_fraction: Vec<f64>,
    pub throughput: f64,
    pub peel_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub trials: Vec<TrialSummary>,
    pub mean_resolved_fraction: f64,
    pub stderr_resolved_fraction: f64,
    pub mean_per_class_resolved_fraction: Vec<f64>,
    pub stderr_per_class_resolved_fraction: Vec<f64>,
    pub mean_throughput: f64,
    pub stderr_throughput: f64,
}

/// RNG for trial `trial` of a run seeded with `master_seed`: a ChaCha8
/// stream keyed by the master seed, one stream per trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent trials in parallel and aggregates them.
pub fn run_trials(
    config: &SystemConfig,
    num_users: usize,
    trials: usize,
    master_seed: u64,
) -> Result<TrialStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    config.validate()?;
    let summaries = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t);
            let graph = build_graph_with_rng(config, num_users, &mut rng)?;
            let outcome = peel(&graph);
            Ok(TrialSummary {
                trial: t,
                num_slots: graph.num_slots,
                num_edges: graph.num_edges(),
                resolved_fraction: outcome.resolved_fraction,
                per_class_resolved_fraction: outcome.per_class_resolved_fraction,
                throughput: outcome.throughput,
                peel_rounds: outcome.peel_rounds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(summaries))
}

fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(trials: Vec<TrialSummary>) -> TrialStats {
    let (mean_resolved_fraction, stderr_resolved_fraction) =
        mean_stderr(trials.iter().map(|t| t.resolved_fraction));
    let (mean_throughput, stderr_throughput) = mean_stderr(trials.iter().map(|t| t.throughput));
    let classes = trials[0].per_class_resolved_fraction.len();
    let (mean_per_class, stderr_per_class) = (0..classes)
        .map(|c| mean_stderr(trials.iter().map(move |t| t.per_class_resolved_fraction[c])))
        .unzip();
    TrialStats {
        trials,
        mean_resolved_fraction,
        stderr_resolved_fraction,
        mean_per_class_resolved_fraction: mean_per_class,
        stderr_per_class_resolved_fraction: stderr_per_class,
        mean_throughput,
        stderr_throughput,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccessMatrix, SlotClass, UserClass};

    fn single(e: f64, alpha: f64, eps: f64) -> SystemConfig {
        SystemConfig::new(
            vec![UserClass::new(1.0, e)],
            vec![SlotClass::new(1.0)],
            AccessMatrix::from_rows(&[vec![alpha]]).unwrap(),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn largest_remainder_sums_exactly() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 7), vec![4, 3]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 100), vec![34, 33, 33]);
        assert_eq!(largest_remainder(&[0.25, 0.75], 3).iter().sum::<usize>(), 3);
    }

    #[test]
    fn zero_access_gives_empty_graph() {
        let g = build_graph(&single(0.0, 0.0, 0.0), 100, 5).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.num_slots, 100);
        assert_eq!(peel(&g).resolved_count, 0);
    }

    #[test]
    fn graph_is_deterministic() {
        let c = single(0.3, 3.1, 0.1);
        assert_eq!(build_graph(&c, 500, 42).unwrap(), build_graph(&c, 500, 42).unwrap());
        assert_ne!(build_graph(&c, 500, 42).unwrap(), build_graph(&c, 500, 43).unwrap());
    }

    #[test]
    fn class_partitions() {
        let c = SystemConfig::new(
            vec![UserClass::new(0.3, 0.0), UserClass::new(0.7, 0.5)],
            vec![SlotClass::new(0.4), SlotClass::new(0.6)],
            AccessMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            0.25,
        )
        .unwrap();
        let g = build_graph(&c, 101, 1).unwrap();
        assert_eq!(g.num_slots, 126);
        let users: Vec<usize> = (0..2).map(|l| g.user_class_of.iter().filter(|&&c| c == l).count()).collect();
        assert_eq!(users, largest_remainder(&[0.3, 0.7], 101));
        let slots: Vec<usize> = (0..2).map(|j| g.slot_class_of.iter().filter(|&&c| c == j).count()).collect();
        assert_eq!(slots, largest_remainder(&[0.4, 0.6], 126));
        let mut sorted = g.edges.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), g.edges.len());
    }

    #[test]
    fn infeasible_probability_is_error() {
        assert!(matches!(
            build_graph(&single(0.0, 3.1, 0.0), 3, 0),
            Err(Error::InfeasibleAccess { .. })
        ));
    }

    #[test]
    fn too_few_users() {
        let c = SystemConfig::new(
            vec![UserClass::new(0.5, 0.0), UserClass::new(0.5, 0.0)],
            vec![SlotClass::new(1.0)],
            AccessMatrix::from_rows(&[vec![0.1], vec![0.1]]).unwrap(),
            0.0,
        )
        .unwrap();
        assert!(matches!(build_graph(&c, 1, 0), Err(Error::Population(_))));
    }

    #[test]
    fn mean_edge_count_matches_binomial() {
        let c = single(0.0, 3.1, 0.0);
        let n = 1000usize;
        let total: usize = (0..100).map(|s| build_graph(&c, n, s).unwrap().num_edges()).sum();
        let mean = total as f64 / 100.0;
        let p = 3.1 / n as f64;
        let pairs = (n * n) as f64;
        let expected = pairs * p;
        let sd_of_mean = (pairs * p * (1.0 - p) / 100.0).sqrt();
        assert!((expected - 3100.0).abs() < 1e-9);
        assert!((mean - expected).abs() < 3.0 * sd_of_mean, "mean {mean}");
    }

    #[test]
    fn hand_peeled_examples() {
        // users A=0, B=1; slots s1=0, s2=1
        let edges = vec![(0, 0), (1, 0), (1, 1)];
        let g = ContentionGraph::from_edges(2, 2, edges.clone(), vec![false; 3]).unwrap();
        let out = peel(&g);
        assert_eq!(out.resolved, vec![true, true]);
        assert_eq!(out.peel_rounds, 2);

        let g = ContentionGraph::from_edges(2, 2, edges, vec![false, false, true]).unwrap();
        assert_eq!(peel(&g).resolved, vec![false, false]);

        let g = ContentionGraph::from_edges(1, 1, vec![(0, 0)], vec![false]).unwrap();
        let out = peel(&g);
        assert_eq!(out.resolved_fraction, 1.0);
        assert_eq!(out.throughput, 1.0);
    }

    #[test]
    fn exhausted_slot_stays_exhausted() {
        // slot 0 holds only user 0 with a lost replica; user 0 is also alone
        // in slot 1 with a clean replica, so it resolves there.
        let g = ContentionGraph::from_edges(1, 2, vec![(0, 0), (0, 1)], vec![true, false]).unwrap();
        assert_eq!(peel(&g).resolved, vec![true]);
    }

    #[test]
    fn graph_validation() {
        assert!(ContentionGraph::from_edges(1, 1, vec![(0, 0), (0, 0)], vec![false; 2]).is_err());
        assert!(ContentionGraph::from_edges(1, 1, vec![(1, 0)], vec![false]).is_err());
        assert!(ContentionGraph::from_edges(1, 1, vec![(0, 0)], vec![]).is_err());
    }

    #[test]
    fn all_lost_resolves_nobody() {
        let stats = run_trials(&single(1.0, 3.1, 0.1), 300, 10, 9).unwrap();
        assert!(stats.trials.iter().all(|t| t.resolved_fraction == 0.0));
        assert_eq!(stats.mean_resolved_fraction, 0.0);
    }

    #[test]
    fn run_trials_is_deterministic() {
        let c = single(0.2, 3.0, 0.2);
        let a = run_trials(&c, 400, 1, 77).unwrap();
        let b = run_trials(&c, 400, 1, 77).unwrap();
        assert_eq!(a, b);
        let many = run_trials(&c, 400, 8, 77).unwrap();
        assert_eq!(many.trials[0], a.trials[0]);
        assert!(run_trials(&c, 400, 0, 77).is_err());
    }

    #[test]
    fn throughput_accounting() {
        let c = single(0.1, 2.8, 0.3);
        for seed in 0..20 {
            let g = build_graph(&c, 700, seed).unwrap();
            let out = peel(&g);
            assert_eq!((out.throughput * g.num_slots as f64).round() as usize, out.resolved_count);
            assert_eq!(out.resolved_fraction, out.resolved_count as f64 / 700.0);
        }
    }
}
