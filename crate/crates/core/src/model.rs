//! System parameters: user classes, slot classes and access constants.

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of class fractions.
pub const FRACTION_SUM_TOL: f64 = 1e-9;

/// A class of users sharing the same packet-loss probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserClass {
    /// Fraction of the user population belonging to this class.
    pub fraction: f64,
    /// Probability that an interference-free packet of this class is lost.
    pub loss_prob: f64,
}

impl UserClass {
    pub fn new(fraction: f64, loss_prob: f64) -> Self {
        Self {
            fraction,
            loss_prob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotClass {
    pub fraction: f64,
}

impl SlotClass {
    pub fn new(fraction: f64) -> Self {
        Self { fraction }
    }
}

/// Row-major `L x J` matrix of access constants, one row per user class.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AccessMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::AccessShape {
                    rows: rows.len(),
                    cols: row.len(),
                    expected_rows: rows.len(),
                    expected_cols: cols,
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    /// Builds a matrix from a flat row-major slice.
    pub fn from_flat(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "access matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, user: usize, slot: usize) -> f64 {
        self.values[user * self.cols + slot]
    }

    pub fn set(&mut self, user: usize, slot: usize, value: f64) {
        self.values[user * self.cols + slot] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.values[user * self.cols..(user + 1) * self.cols]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Complete description of a coded slotted ALOHA system.
///
/// The number of users `N` is not part of the configuration; the contention
/// length is expressed relative to it through `epsilon`, with `M = (1 + epsilon) N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub user_classes: Vec<UserClass>,
    pub slot_classes: Vec<SlotClass>,
    pub access: AccessMatrix,
    pub epsilon: f64,
}

impl SystemConfig {
    pub fn new(
        user_classes: Vec<UserClass>,
        slot_classes: Vec<SlotClass>,
        access: AccessMatrix,
        epsilon: f64,
    ) -> Result<Self> {
        let config = Self {
            user_classes,
            slot_classes,
            access,
            epsilon,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn num_user_classes(&self) -> usize {
        self.user_classes.len()
    }

    pub fn num_slot_classes(&self) -> usize {
        self.slot_classes.len()
    }

    /// Slots per user, `M / N`.
    pub fn slots_per_user(&self) -> f64 {
        1.0 + self.epsilon
    }

    pub fn with_access(&self, access: AccessMatrix) -> Self {
        Self {
            access,
            ..self.clone()
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    /// Checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        let l_count = self.user_classes.len();
        let j_count = self.slot_classes.len();
        if l_count == 0 || j_count == 0 {
            return Err(Error::EmptyClasses);
        }
        if self.access.rows() != l_count || self.access.cols() != j_count {
            return Err(Error::AccessShape {
                rows: self.access.rows(),
                cols: self.access.cols(),
                expected_rows: l_count,
                expected_cols: j_count,
            });
        }
        for (index, u) in self.user_classes.iter().enumerate() {
            if !(u.fraction > 0.0 && u.fraction <= 1.0) {
                return Err(Error::UserFraction {
                    index,
                    value: u.fraction,
                });
            }
            if !(0.0..=1.0).contains(&u.loss_prob) {
                return Err(Error::LossProbability {
                    index,
                    value: u.loss_prob,
                });
            }
        }
        for (index, s) in self.slot_classes.iter().enumerate() {
            if !(s.fraction > 0.0 && s.fraction <= 1.0) {
                return Err(Error::SlotFraction {
                    index,
                    value: s.fraction,
                });
            }
        }
        let user_sum: f64 = self.user_classes.iter().map(|u| u.fraction).sum();
        if (user_sum - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(Error::UserFractionSum { sum: user_sum });
        }
        let slot_sum: f64 = self.slot_classes.iter().map(|s| s.fraction).sum();
        if (slot_sum - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(Error::SlotFractionSum { sum: slot_sum });
        }
        for user in 0..l_count {
            for slot in 0..j_count {
                let value = self.access.get(user, slot);
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::NegativeAccess { user, slot, value });
                }
            }
        }
        if !(self.epsilon > -1.0 && self.epsilon.is_finite()) {
            return Err(Error::EpsilonOutOfRange(self.epsilon));
        }
        Ok(())
    }

    /// Per-slot transmission probability `alpha_lj / (a_l N)` of a class-`user`
    /// user in a class-`slot` slot.
    pub fn access_probability(&self, user: usize, slot: usize, n: usize) -> Result<f64> {
        if user >= self.num_user_classes() {
            return Err(Error::ClassIndex(user));
        }
        if slot >= self.num_slot_classes() {
            return Err(Error::ClassIndex(slot));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        let prob = self.access.get(user, slot) / (self.user_classes[user].fraction * n as f64);
        if prob > 1.0 {
            return Err(Error::InfeasibleAccess {
                user,
                slot,
                n,
                prob,
            });
        }
        Ok(prob)
    }
}
