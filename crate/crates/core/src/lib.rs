//! Asymptotic and finite-length analysis of coded slotted ALOHA with
//! successive interference cancellation when user classes suffer different
//! packet-loss probabilities.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the user/slot class partition and the access constants.
//! * [`degree`] provides degree-distribution generating functions.
//! * [`density_evolution`] runs the and-or tree recursion and derives the
//!   probability of user resolution and the expected throughput.
//! * [`simulator`] builds finite contention graphs and peels them, serving as
//!   an independent check on the asymptotic numbers.
//! * [`optimizer`] searches access constants and frame length for maximum
//!   throughput.
//! * [`cli`] parses configuration files, holds the built-in scenarios and
//!   writes CSV output for the `csaloha` binary.

pub mod cli;
pub mod degree;
pub mod density_evolution;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod simulator;

pub use degree::DegreeDistribution;
pub use density_evolution::{evolve, EvolutionResult, EvolveOptions};
pub use error::{Error, Result};
pub use model::{AccessMatrix, SlotClass, SystemConfig, UserClass};
pub use optimizer::{AlphaGrid, OptimizationReport};
pub use simulator::{ContentionGraph, TrialOutcome, TrialStats};
