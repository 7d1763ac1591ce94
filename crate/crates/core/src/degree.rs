//! Degree-distribution generating functions.
//!
//! Two representations share one interface: the closed-form Poisson
//! generating function `x -> exp(-r (1 - x))`, which is what random per-slot
//! access produces in the large-population limit, and an explicit polynomial
//! `sum_d c_d x^d` for arbitrary distributions.

use crate::error::{Error, Result};
use crate::model::SystemConfig;

/// Default truncation degree when a Poisson law is expanded into a polynomial.
pub const DEFAULT_TRUNCATION: usize = 60;

const COEFF_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeDistribution {
    /// `x -> exp(-rate (1 - x))`, the generating function of Poisson(rate).
    Exponential { rate: f64 },
    /// `x -> sum_d coeffs[d] x^d`.
    Polynomial(Vec<f64>),
}

impl DegreeDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "exponential rate must be finite and >= 0, got {rate}"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    /// Polynomial from degree probabilities; coefficients must be non-negative
    /// and sum to one.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPolynomial("no coefficients".into()));
        }
        if let Some((d, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c >= 0.0 && c.is_finite()))
        {
            return Err(Error::InvalidPolynomial(format!(
                "coefficient of x^{d} is {c}"
            )));
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > COEFF_SUM_TOL {
            return Err(Error::InvalidPolynomial(format!(
                "coefficients sum to {sum}"
            )));
        }
        Ok(Self::Polynomial(coeffs))
    }

    /// Poisson(rate) masses for degrees `0..=max_degree`, renormalized.
    pub fn truncated_poisson(rate: f64, max_degree: usize) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "poisson rate must be finite and >= 0, got {rate}"
            )));
        }
        let mut coeffs = Vec::with_capacity(max_degree + 1);
        let mut mass = (-rate).exp();
        for d in 0..=max_degree {
            coeffs.push(mass);
            mass *= rate / (d + 1) as f64;
        }
        let total: f64 = coeffs.iter().sum();
        coeffs.iter_mut().for_each(|c| *c /= total);
        Ok(Self::Polynomial(coeffs))
    }

    /// Generating-function value at `x`, for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } => (-rate * (1.0 - x)).exp(),
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &cd| acc * x + cd),
        }
    }

    /// First derivative of the generating function at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } => rate * (-rate * (1.0 - x)).exp(),
            Self::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (d, &cd)| acc * x + d as f64 * cd),
        }
    }

    /// Mean degree, `Lambda'(1)`.
    pub fn derivative_at_one(&self) -> f64 {
        match self {
            Self::Exponential { rate } => *rate,
            Self::Polynomial(c) => c.iter().enumerate().map(|(d, &cd)| d as f64 * cd).sum(),
        }
    }

    /// Edge-perspective distribution `Lambda'(x) / Lambda'(1)`.
    ///
    /// The exponential form is its own edge-perspective distribution.
    pub fn node_to_edge(&self) -> Result<Self> {
        let mean = self.derivative_at_one();
        if mean <= 0.0 {
            return Err(Error::NoEdges);
        }
        match self {
            Self::Exponential { rate } => Ok(Self::Exponential { rate: *rate }),
            Self::Polynomial(c) => Ok(Self::Polynomial(
                c.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(d, &cd)| d as f64 * cd / mean)
                    .collect(),
            )),
        }
    }
}

/// Degree distribution of a class-`slot` slot with respect to class-`user`
/// users. Node and edge perspectives coincide.
pub fn slot_degree_distribution(
    config: &SystemConfig,
    slot: usize,
    user: usize,
) -> Result<DegreeDistribution> {
    check_indices(config, user, slot)?;
    DegreeDistribution::exponential(config.access.get(user, slot))
}

/// Degree distribution of a class-`user` user with respect to class-`slot`
/// slots under frameless access: Poisson with mean
/// `(1 + epsilon) b_j alpha_lj / a_l`.
pub fn user_degree_distribution(
    config: &SystemConfig,
    user: usize,
    slot: usize,
) -> Result<DegreeDistribution> {
    check_indices(config, user, slot)?;
    DegreeDistribution::exponential(user_degree_rate(config, user, slot))
}

/// Mean number of class-`slot` replicas sent by a class-`user` user.
#[inline]
pub(crate) fn user_degree_rate(config: &SystemConfig, user: usize, slot: usize) -> f64 {
    config.slots_per_user() * config.slot_classes[slot].fraction * config.access.get(user, slot)
        / config.user_classes[user].fraction
}

/// Expected degree of a class-`slot` slot, `sum_n alpha_nj`.
pub fn expected_slot_degree(config: &SystemConfig, slot: usize) -> Result<f64> {
    if slot >= config.num_slot_classes() {
        return Err(Error::ClassIndex(slot));
    }
    Ok((0..config.num_user_classes())
        .map(|n| config.access.get(n, slot))
        .sum())
}

fn check_indices(config: &SystemConfig, user: usize, slot: usize) -> Result<()> {
    if user >= config.num_user_classes() {
        return Err(Error::ClassIndex(user));
    }
    if slot >= config.num_slot_classes() {
        return Err(Error::ClassIndex(slot));
    }
    Ok(())
}
