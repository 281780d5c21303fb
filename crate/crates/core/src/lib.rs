//! Approximate maximum b-matching on a simulated massively parallel cluster.
//!
//! The crate is organised bottom-up: [`graph`] holds the shared types,
//! [`mpc`] simulates machines and rounds, [`lp`] computes tight fractional
//! solutions and constant-factor matchings, [`unweighted`] and [`weighted`]
//! improve them with short augmenting walks, and [`streaming`] runs the
//! unweighted engine over a re-readable edge stream.

pub mod error;
pub mod fixed;
pub mod gen;
pub mod graph;
pub mod io;
pub mod lp;
pub mod mpc;
pub mod oracle;
pub mod rng;
pub mod streaming;
pub mod unweighted;
pub mod weighted;

pub use error::{Error, Result};
pub use fixed::Fixed;
pub use graph::{
    apply_walk, apply_walks, compress, decompress, free_vertices, gain, validate_bmatching, AlternatingWalk,
    BMatching, BudgetVector, CopyIndex, CopyVertex, Graph, ValidityReport, WalkStep, Weight,
};
