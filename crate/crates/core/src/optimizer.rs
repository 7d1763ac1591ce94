//! Grid search over access constants and contention length.
//!
//! Every free entry of the access matrix is scanned on a regular grid
//! `0, step, 2 step, ..., max`; the best cell is then refined with
//! successively finer local grids. Grid points are evaluated in parallel but
//! reduced sequentially in grid order, so results do not depend on the
//! thread count. Among equal throughputs the point with the smaller total
//! access `sum alpha_lj` wins.

use rayon::prelude::*;

use crate::degree::expected_slot_degree;
use crate::density_evolution::{Ensemble, EvolveOptions};
use crate::error::{Error, Result};
use crate::model::{AccessMatrix, SystemConfig};

/// Largest number of points a single grid may contain.
pub const MAX_GRID_POINTS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    /// Upper bound for every access constant.
    pub max: f64,
    /// Coarse grid spacing.
    pub step: f64,
    /// Number of local refinements around the coarse optimum.
    pub refinements: usize,
    /// Each refinement divides the spacing by this factor.
    pub refine_factor: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            max: 8.0,
            step: 0.1,
            refinements: 2,
            refine_factor: 10,
        }
    }
}

impl AlphaGrid {
    pub fn new(max: f64, step: f64) -> Self {
        Self {
            max,
            step,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha step must be positive, got {}",
                self.step
            )));
        }
        if !(self.max >= 0.0 && self.max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha max must be >= 0, got {}",
                self.max
            )));
        }
        if self.refinements > 0 && self.refine_factor < 2 {
            return Err(Error::InvalidArgument(
                "refine factor must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Coarse values `k * step` for `k = 0..` up to `max`.
    pub fn coarse_values(&self) -> Vec<f64> {
        let count = (self.max / self.step + 1e-9).floor() as usize;
        (0..=count).map(|k| k as f64 * self.step).collect()
    }
}

/// Throughput-optimal access matrix at one contention length.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaOptimum {
    pub epsilon: f64,
    pub access: AccessMatrix,
    pub throughput: f64,
    pub resolution: f64,
    pub per_class_resolution: Vec<f64>,
    /// Expected degree per slot class.
    pub slot_degrees: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub best_alpha: AccessMatrix,
    pub best_epsilon: f64,
    pub best_throughput: f64,
    pub best_resolution: f64,
    pub per_class_resolution: Vec<f64>,
    pub best_slot_degrees: Vec<f64>,
    /// One entry per epsilon sample, in increasing epsilon order.
    pub sweep_samples: Vec<AlphaOptimum>,
}

impl OptimizationReport {
    pub fn best_m_over_n(&self) -> f64 {
        1.0 + self.best_epsilon
    }
}

#[derive(Debug, Clone, Copy)]
struct Score {
    throughput: f64,
    resolution: f64,
    alpha_sum: f64,
}

impl Score {
    fn beats(&self, other: &Score) -> bool {
        self.throughput > other.throughput
            || (self.throughput == other.throughput && self.alpha_sum < other.alpha_sum)
    }
}

/// Evaluates one access matrix at one contention length.
pub fn evaluate(
    template: &SystemConfig,
    epsilon: f64,
    access: &AccessMatrix,
    options: &EvolveOptions,
) -> Result<AlphaOptimum> {
    let config = SystemConfig {
        access: access.clone(),
        epsilon,
        ..template.clone()
    };
    let result = Ensemble::frameless(&config)?.evolve(&options.without_trajectories())?;
    let slot_degrees = (0..config.num_slot_classes())
        .map(|j| expected_slot_degree(&config, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(AlphaOptimum {
        epsilon,
        access: access.clone(),
        throughput: result.throughput,
        resolution: result.aggregate_resolution,
        per_class_resolution: result.resolution_probs,
        slot_degrees,
        converged: result.converged,
    })
}

fn score_point(
    template: &SystemConfig,
    epsilon: f64,
    values: &[f64],
    options: &EvolveOptions,
) -> Result<Score> {
    let config = SystemConfig {
        access: AccessMatrix::from_flat(template.access.rows(), template.access.cols(), values.to_vec())?,
        epsilon,
        ..template.clone()
    };
    let result = Ensemble::frameless(&config)?.evolve(options)?;
    Ok(Score {
        throughput: result.throughput,
        resolution: result.aggregate_resolution,
        alpha_sum: values.iter().sum(),
    })
}

/// Cartesian product of per-dimension value lists, row-major with the last
/// dimension varying fastest.
struct Product<'a> {
    axes: &'a [Vec<f64>],
    len: usize,
}

impl<'a> Product<'a> {
    fn new(axes: &'a [Vec<f64>]) -> Result<Self> {
        let mut len: usize = 1;
        for axis in axes {
            if axis.is_empty() {
                return Err(Error::InvalidArgument("empty alpha grid".into()));
            }
            len = len
                .checked_mul(axis.len())
                .filter(|&n| n <= MAX_GRID_POINTS)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "alpha grid exceeds {MAX_GRID_POINTS} points; use a coarser step"
                    ))
                })?;
        }
        Ok(Self { axes, len })
    }

    fn point(&self, mut index: usize, out: &mut [f64]) {
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = axis[index % axis.len()];
            index /= axis.len();
        }
    }
}

/// Scores every point of `axes` and returns them in grid order.
fn score_grid(
    template: &SystemConfig,
    epsilon: f64,
    axes: &[Vec<f64>],
    options: &EvolveOptions,
) -> Result<Vec<(Vec<f64>, Score)>> {
    let product = Product::new(axes)?;
    let dims = axes.len();
    (0..product.len)
        .into_par_iter()
        .map(|i| {
            let mut values = vec![0.0; dims];
            product.point(i, &mut values);
            let score = score_point(template, epsilon, &values, options)?;
            Ok((values, score))
        })
        .collect()
}

fn best_of(
    scored: Vec<(Vec<f64>, Score)>,
    incumbent: Option<(Vec<f64>, Score)>,
) -> Option<(Vec<f64>, Score)> {
    scored.into_iter().fold(incumbent, |best, cand| match best {
        Some(b) if !cand.1.beats(&b.1) => Some(b),
        _ => Some(cand),
    })
}

/// Local grid of `2 * factor + 1` points per dimension spanning one old
/// spacing on each side of `center`, clipped to `[0, max]`.
fn local_axes(center: &[f64], spacing: f64, factor: usize, max: f64) -> Vec<Vec<f64>> {
    let fine = spacing / factor as f64;
    center
        .iter()
        .map(|&c| {
            let k = factor as i64;
            (-k..=k)
                .map(|i| c + i as f64 * fine)
                .filter(|&v| v >= -1e-12 && v <= max + 1e-12)
                .map(|v| v.clamp(0.0, max))
                .collect()
        })
        .collect()
}

fn validate_template(template: &SystemConfig, epsilon: f64) -> Result<()> {
    template.with_epsilon(epsilon).validate()
}

/// Maximizes throughput over the access matrix at a fixed `epsilon`.
pub fn optimize_alpha_at_eps(
    template: &SystemConfig,
    epsilon: f64,
    grid: &AlphaGrid,
    options: &EvolveOptions,
) -> Result<AlphaOptimum> {
    grid.check()?;
    validate_template(template, epsilon)?;
    let options = options.without_trajectories();
    let dims = template.access.rows() * template.access.cols();
    let coarse: Vec<Vec<f64>> = vec![grid.coarse_values(); dims];
    let mut best = best_of(score_grid(template, epsilon, &coarse, &options)?, None)
        .ok_or_else(|| Error::InvalidArgument("empty alpha grid".into()))?;
    let mut spacing = grid.step;
    for _ in 0..grid.refinements {
        let axes = local_axes(&best.0, spacing, grid.refine_factor, grid.max);
        let scored = score_grid(template, epsilon, &axes, &options)?;
        best = best_of(scored, Some(best)).expect("incumbent present");
        spacing /= grid.refine_factor as f64;
    }
    let access = AccessMatrix::from_flat(template.access.rows(), template.access.cols(), best.0)?;
    evaluate(template, epsilon, &access, &options)
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn epsilon_samples(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > -1.0) {
        return Err(Error::EpsilonOutOfRange(lo));
    }
    if !(hi >= lo) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "invalid epsilon range [{lo}, {hi}] with {steps} steps"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let width = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps).map(|i| lo + i as f64 * width).collect())
}

/// Optimizes the access matrix at each epsilon sample and reports the
/// global throughput maximum together with the whole curve.
pub fn sweep_eps(
    template: &SystemConfig,
    eps_lo: f64,
    eps_hi: f64,
    eps_steps: usize,
    grid: &AlphaGrid,
    options: &EvolveOptions,
) -> Result<OptimizationReport> {
    let samples = epsilon_samples(eps_lo, eps_hi, eps_steps)?;
    let sweep_samples = samples
        .iter()
        .map(|&eps| optimize_alpha_at_eps(template, eps, grid, options))
        .collect::<Result<Vec<_>>>()?;
    let best = sweep_samples
        .iter()
        .fold(None::<&AlphaOptimum>, |best, cand| match best {
            Some(b)
                if !(cand.throughput > b.throughput
                    || (cand.throughput == b.throughput && cand.access.sum() < b.access.sum())) =>
            {
                Some(b)
            }
            _ => Some(cand),
        })
        .expect("at least one epsilon sample");
    Ok(OptimizationReport {
        best_alpha: best.access.clone(),
        best_epsilon: best.epsilon,
        best_throughput: best.throughput,
        best_resolution: best.resolution,
        per_class_resolution: best.per_class_resolution.clone(),
        best_slot_degrees: best.slot_degrees.clone(),
        sweep_samples: sweep_samples.clone(),
    })
}

/// Precomputed coarse grid over `(epsilon, alpha)` answering
/// throughput-maximization queries under a resolution-probability floor.
///
/// The candidate set is fixed once, so raising the floor can only shrink
/// the feasible set and the returned throughput never increases.
#[derive(Debug, Clone)]
pub struct FloorSearch {
    template: SystemConfig,
    /// `(epsilon, alpha values, score)` in grid order.
    points: Vec<(f64, Vec<f64>, Score)>,
    options: EvolveOptions,
}

impl FloorSearch {
    pub fn new(
        template: &SystemConfig,
        epsilons: &[f64],
        grid: &AlphaGrid,
        options: &EvolveOptions,
    ) -> Result<Self> {
        grid.check()?;
        if epsilons.is_empty() {
            return Err(Error::InvalidArgument("no epsilon samples".into()));
        }
        let options = options.without_trajectories();
        let dims = template.access.rows() * template.access.cols();
        let axes: Vec<Vec<f64>> = vec![grid.coarse_values(); dims];
        let mut points = Vec::new();
        for &eps in epsilons {
            validate_template(template, eps)?;
            points.extend(
                score_grid(template, eps, &axes, &options)?
                    .into_iter()
                    .map(|(v, s)| (eps, v, s)),
            );
        }
        Ok(Self {
            template: template.clone(),
            points,
            options,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest resolution probability found anywhere on the grid.
    pub fn max_resolution(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.2.resolution)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best point with `P_R >= target`, or [`Error::Infeasible`].
    pub fn best_with_floor(&self, target: f64) -> Result<AlphaOptimum> {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::InvalidArgument(format!(
                "target resolution probability {target} outside [0, 1]"
            )));
        }
        let best = self
            .points
            .iter()
            .filter(|p| p.2.resolution >= target)
            .fold(None::<&(f64, Vec<f64>, Score)>, |best, cand| match best {
                Some(b) if !cand.2.beats(&b.2) => Some(b),
                _ => Some(cand),
            })
            .ok_or(Error::Infeasible { target })?;
        let access = AccessMatrix::from_flat(
            self.template.access.rows(),
            self.template.access.cols(),
            best.1.clone(),
        )?;
        evaluate(&self.template, best.0, &access, &self.options)
    }
}

/// Maximizes throughput at fixed `epsilon` subject to `P_R >= target`, by
/// exhaustive filtering of the coarse grid.
pub fn optimize_with_resolution_floor(
    template: &SystemConfig,
    epsilon: f64,
    target: f64,
    grid: &AlphaGrid,
    options: &EvolveOptions,
) -> Result<AlphaOptimum> {
    FloorSearch::new(template, &[epsilon], grid, options)?.best_with_floor(target)
}
