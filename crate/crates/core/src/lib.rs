//! Eigenvalue counting for random Schrödinger operators on metric graphs
//! over `Z^d`, with finite-volume integrated density of states experiments.

pub mod conditions;
pub mod error;
pub mod ids;
pub mod lattice;
pub mod linalg;
pub mod random;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
