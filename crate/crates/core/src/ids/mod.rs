//! Integrated density of states: finite-volume approximants, the exact
//! one-dimensional percolation formula, restricted traces and experiments
//! built on them.

pub mod approx;
pub mod bounds;
pub mod ergodic;
pub mod exact;
pub mod magnetic;
pub mod trace;

pub use approx::{
    convergence_study, jump_list, jumps_match_compact, normalized_counting, normalized_counting_with,
    operator_eigenvalues, operator_eigenvalues_cached, shift_of, spectral_shift, spectral_shift_with,
    ConvergenceReport, CountingMethod, EigenCache, IdsApproximant, JumpReport, Provenance, StudyOptions,
};
pub use bounds::{ssf_bound_suite, SsfReport};
pub use ergodic::{ergodic_limit_estimate, ErgodicEstimate};
pub use exact::{percolation_ids_1d_exact, PercolationIds};
pub use magnetic::{magnetic_experiments, MagneticKind, MagneticParams, MagneticReport};
pub use trace::{pastur_shubin_estimate, placement_difference, restricted_trace, PasturShubinEstimate};
