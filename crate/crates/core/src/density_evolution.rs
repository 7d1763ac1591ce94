//! And-or tree evaluation of SIC decoding with per-class packet loss.
//!
//! Messages are probabilities of *not* being resolved. A class-`l` user is
//! unresolved after iteration `i` when every slot it transmitted in sent an
//! erasure in the previous round:
//!
//! ```text
//! y_l(i) = prod_j lambda_lj( r_j(i-1) )
//! r_j    = 1 - sum_m (Omega'_jm(1) / beta_j) (1 - e_m) prod_k omega_jk(1 - y_k)
//! ```
//!
//! where `beta_j = sum_n Omega'_jn(1)` is the expected degree of a class-`j`
//! slot. The iteration starts from `y_l(0) = 1`.

use crate::degree::{self, DegreeDistribution};
use crate::error::{Error, Result};
use crate::model::SystemConfig;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Keep the full per-class trajectories in the result.
    pub record_trajectories: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            record_trajectories: true,
        }
    }
}

impl EvolveOptions {
    pub fn new(max_iter: usize, tol: f64) -> Self {
        Self {
            max_iter,
            tol,
            ..Self::default()
        }
    }

    pub fn without_trajectories(self) -> Self {
        Self {
            record_trajectories: false,
            ..self
        }
    }

    fn check(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    /// `trajectories[l][i] = y_l(i)`, starting with `y_l(0) = 1`. Empty when
    /// trajectories were not recorded.
    pub trajectories: Vec<Vec<f64>>,
    /// Final unresolved probability per user class.
    pub final_unresolved: Vec<f64>,
    /// `P_Rl = 1 - y_l(final)`.
    pub resolution_probs: Vec<f64>,
    /// `P_R = sum_l a_l P_Rl`.
    pub aggregate_resolution: f64,
    /// `T = P_R / (1 + epsilon)`.
    pub throughput: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Fixed-point residual of the final iterate.
    pub residual: f64,
}

/// Degree structure of a multi-class ensemble, ready for iteration.
///
/// [`Ensemble::frameless`] instantiates it for per-slot random access, where
/// every distribution is Poisson. [`Ensemble::from_node_distributions`]
/// accepts arbitrary node-perspective distributions.
#[derive(Debug, Clone)]
pub struct Ensemble {
    user_fractions: Vec<f64>,
    loss: Vec<f64>,
    epsilon: f64,
    /// `user_edge[l][j]`: lambda_lj, `None` when class l sends nothing to class j.
    user_edge: Vec<Vec<Option<DegreeDistribution>>>,
    /// `slot_edge[j][k]`: omega_jk, `None` when class k sends nothing to class j.
    slot_edge: Vec<Vec<Option<DegreeDistribution>>>,
    /// `slot_weights[j][m] = Omega'_jm(1) / beta_j`, `None` when beta_j = 0.
    slot_weights: Vec<Option<Vec<f64>>>,
}

impl Ensemble {
    pub fn frameless(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let l_count = config.num_user_classes();
        let j_count = config.num_slot_classes();
        let mut user_node = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let row = (0..j_count)
                .map(|j| degree::user_degree_distribution(config, l, j))
                .collect::<Result<Vec<_>>>()?;
            user_node.push(row);
        }
        let mut slot_node = Vec::with_capacity(j_count);
        for j in 0..j_count {
            let row = (0..l_count)
                .map(|k| degree::slot_degree_distribution(config, j, k))
                .collect::<Result<Vec<_>>>()?;
            slot_node.push(row);
        }
        Self::from_node_distributions(
            config.user_classes.iter().map(|u| u.fraction).collect(),
            config.user_classes.iter().map(|u| u.loss_prob).collect(),
            config.epsilon,
            user_node,
            slot_node,
        )
    }

    /// `user_node[l][j]` is Lambda_lj and `slot_node[j][k]` is Omega_jk.
    pub fn from_node_distributions(
        user_fractions: Vec<f64>,
        loss: Vec<f64>,
        epsilon: f64,
        user_node: Vec<Vec<DegreeDistribution>>,
        slot_node: Vec<Vec<DegreeDistribution>>,
    ) -> Result<Self> {
        let l_count = user_fractions.len();
        let j_count = slot_node.len();
        if l_count == 0 || j_count == 0 {
            return Err(Error::EmptyClasses);
        }
        if loss.len() != l_count
            || user_node.len() != l_count
            || user_node.iter().any(|r| r.len() != j_count)
            || slot_node.iter().any(|r| r.len() != l_count)
        {
            return Err(Error::InvalidArgument(
                "ensemble dimensions are inconsistent".into(),
            ));
        }
        let edge = |d: &DegreeDistribution| -> Result<Option<DegreeDistribution>> {
            if d.derivative_at_one() > 0.0 {
                d.node_to_edge().map(Some)
            } else {
                Ok(None)
            }
        };
        let user_edge = user_node
            .iter()
            .map(|row| row.iter().map(edge).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let slot_edge = slot_node
            .iter()
            .map(|row| row.iter().map(edge).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let slot_weights = slot_node
            .iter()
            .map(|row| {
                let means: Vec<f64> = row.iter().map(DegreeDistribution::derivative_at_one).collect();
                let beta: f64 = means.iter().sum();
                (beta > 0.0).then(|| means.iter().map(|m| m / beta).collect())
            })
            .collect();
        Ok(Self {
            user_fractions,
            loss,
            epsilon,
            user_edge,
            slot_edge,
            slot_weights,
        })
    }

    pub fn num_user_classes(&self) -> usize {
        self.user_fractions.len()
    }

    pub fn num_slot_classes(&self) -> usize {
        self.slot_edge.len()
    }

    /// Erasure probability `r_j` of a message from a class-`slot` slot given
    /// the current per-class unresolved probabilities.
    pub fn slot_message(&self, slot: usize, y: &[f64]) -> Result<f64> {
        if slot >= self.num_slot_classes() {
            return Err(Error::ClassIndex(slot));
        }
        self.check_messages(y)?;
        self.slot_message_unchecked(slot, y)
            .ok_or(Error::IdleSlotClass(slot))
    }

    fn slot_message_unchecked(&self, slot: usize, y: &[f64]) -> Option<f64> {
        let weights = self.slot_weights[slot].as_ref()?;
        let all_others_resolved: f64 = self.slot_edge[slot]
            .iter()
            .zip(y)
            .map(|(w, &yk)| w.as_ref().map_or(1.0, |w| w.eval(1.0 - yk)))
            .product();
        let useful: f64 = weights
            .iter()
            .zip(&self.loss)
            .map(|(w, e)| w * (1.0 - e))
            .sum();
        Some(1.0 - useful * all_others_resolved)
    }

    /// One application of the recursion: `next[l] = prod_j lambda_lj(r_j(y))`.
    /// Slot classes nobody transmits in are skipped.
    pub fn step(&self, y: &[f64], next: &mut [f64]) {
        next.iter_mut().for_each(|v| *v = 1.0);
        for j in 0..self.num_slot_classes() {
            let Some(r) = self.slot_message_unchecked(j, y) else {
                continue;
            };
            for (l, out) in next.iter_mut().enumerate() {
                if let Some(lambda) = &self.user_edge[l][j] {
                    *out *= lambda.eval(r);
                }
            }
        }
    }

    pub fn fixed_point_residual(&self, y: &[f64]) -> Result<f64> {
        self.check_messages(y)?;
        let mut next = vec![0.0; y.len()];
        self.step(y, &mut next);
        Ok(max_abs_diff(y, &next))
    }

    pub fn evolve(&self, options: &EvolveOptions) -> Result<EvolutionResult> {
        options.check()?;
        let l_count = self.num_user_classes();
        let mut y = vec![1.0; l_count];
        let mut next = vec![0.0; l_count];
        let mut trajectories: Vec<Vec<f64>> = if options.record_trajectories {
            (0..l_count).map(|_| vec![1.0]).collect()
        } else {
            Vec::new()
        };
        let mut converged = false;
        let mut iterations_used = 0;
        for i in 1..=options.max_iter {
            self.step(&y, &mut next);
            let delta = max_abs_diff(&y, &next);
            std::mem::swap(&mut y, &mut next);
            iterations_used = i;
            if options.record_trajectories {
                trajectories.iter_mut().zip(&y).for_each(|(t, &v)| t.push(v));
            }
            if delta < options.tol {
                converged = true;
                break;
            }
        }
        self.step(&y, &mut next);
        let residual = max_abs_diff(&y, &next);
        let resolution_probs: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
        let aggregate_resolution = aggregate(&self.user_fractions, &resolution_probs);
        Ok(EvolutionResult {
            trajectories,
            final_unresolved: y,
            aggregate_resolution,
            throughput: aggregate_resolution / (1.0 + self.epsilon),
            resolution_probs,
            iterations_used,
            converged,
            residual,
        })
    }

    fn check_messages(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.num_user_classes() {
            return Err(Error::InvalidArgument(format!(
                "expected {} per-class values, got {}",
                self.num_user_classes(),
                y.len()
            )));
        }
        if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "unresolved probability {v} outside [0, 1]"
            )));
        }
        Ok(())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn aggregate(fractions: &[f64], probs: &[f64]) -> f64 {
    fractions.iter().zip(probs).map(|(a, p)| a * p).sum()
}

/// Erasure probability of a message leaving a class-`slot` slot under
/// frameless access.
pub fn slot_message(config: &SystemConfig, slot: usize, y: &[f64]) -> Result<f64> {
    Ensemble::frameless(config)?.slot_message(slot, y)
}

/// Runs the recursion for the frameless instantiation of `config`.
pub fn evolve(config: &SystemConfig, options: &EvolveOptions) -> Result<EvolutionResult> {
    Ensemble::frameless(config)?.evolve(options)
}

/// `max_l |y_l - next_l(y)|`.
pub fn fixed_point_residual(config: &SystemConfig, y: &[f64]) -> Result<f64> {
    Ensemble::frameless(config)?.fixed_point_residual(y)
}

/// Expected throughput `sum_l a_l P_Rl / (1 + epsilon)`.
pub fn throughput(config: &SystemConfig, resolution_probs: &[f64]) -> Result<f64> {
    if resolution_probs.len() != config.num_user_classes() {
        return Err(Error::InvalidArgument(format!(
            "expected {} resolution probabilities, got {}",
            config.num_user_classes(),
            resolution_probs.len()
        )));
    }
    let fractions: Vec<f64> = config.user_classes.iter().map(|u| u.fraction).collect();
    Ok(aggregate(&fractions, resolution_probs) / config.slots_per_user())
}
