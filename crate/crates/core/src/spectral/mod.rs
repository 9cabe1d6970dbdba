//! Finite-volume operators: assembly, counting, eigenpairs, exact oracles
//! and cluster decomposition.

pub mod clusters;
pub mod counting;
pub mod eigen;
pub mod fem;
pub mod operator;
pub mod potential;
pub mod reference;
pub mod secular;
pub mod step;

pub use counting::{count_below, count_below_with_diagnostics, CountDiagnostics};
pub use eigen::{eigenpairs, eigenvalues, Spectrum};
pub use fem::{assemble, assemble_magnetic, restricted_mass, AssembledPencil, Discretization};
pub use operator::OperatorData;
pub use potential::StepPotential;
pub use reference::{dirichlet_reference, neumann_reference};
pub use secular::{secular_oracle, SecularSpectrum};
pub use step::{sup_distance, sup_distance_resolved, CountingFunction, StepFunction};
pub use clusters::{cluster_decompose, compact_eigenfunctions};
