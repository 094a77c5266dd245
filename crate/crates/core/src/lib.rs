//! Monte Carlo engine for random walks on the space of unimodular lattices
//! `SL(k0, R) / SL(k0, Z)` whose steps alternate between a random diagonal
//! matrix and a random element of an abelian unipotent subgroup.

pub mod config;
pub mod error;
pub mod float_serde;
pub mod group;
pub mod lattice;
pub mod measures;
pub mod results;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
