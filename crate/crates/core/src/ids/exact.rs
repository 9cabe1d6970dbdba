//! Closed-form integrated density of states of one-dimensional site
//! percolation with Dirichlet sites:
//! `N(λ) = (1-p)² Σ_{k>=0} p^k ⌊(k+1)√λ/π⌋`.
//!
//! A run of `k` consecutive Kirchhoff sites between two Dirichlet sites is a
//! Dirichlet interval of length `k + 1`; such runs start at a given site with
//! probability `(1-p)² p^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::clusters::path_energy;
use crate::spectral::step::StepFunction;

/// Largest admissible truncation error.
pub const TAIL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PercolationIds {
    pub p: f64,
    pub truncation: usize,
    /// Bound on the neglected terms `k > truncation`, uniform on the grid.
    pub tail_bound: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// The truncated sum as a step function on `[min grid, max grid]`.
    pub function: StepFunction,
}

/// `sup_{λ <= λ_max}` of the terms `k > K`:
/// `(√λ_max/π) p^{K+1} ((K+2) - (K+1)p)`.
pub fn tail_bound(p: f64, k: usize, lambda_max: f64) -> f64 {
    if p == 0.0 || lambda_max <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    lambda_max.sqrt() / std::f64::consts::PI * p.powi(k as i32 + 1) * ((kf + 2.0) - (kf + 1.0) * p)
}

/// Smallest truncation meeting [`TAIL_TOL`].
pub fn default_truncation(p: f64, lambda_max: f64) -> usize {
    (0..100_000).find(|&k| tail_bound(p, k, lambda_max) < TAIL_TOL).unwrap_or(100_000)
}

pub fn percolation_ids_1d_exact(p: f64, grid: &[f64], truncation: Option<usize>) -> Result<PercolationIds> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if grid.is_empty() || grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("grid must be nonempty and finite".into()));
    }
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = truncation.unwrap_or_else(|| default_truncation(p, hi));
    let tail = tail_bound(p, k, hi);
    if tail >= TAIL_TOL {
        return Err(Error::InvalidArgument(format!(
            "truncation {k} leaves a tail of {tail:e}, above {TAIL_TOL:e}"
        )));
    }
    let mut jumps = Vec::new();
    for run in 0..=k {
        let w = (1.0 - p).powi(2) * p.powi(run as i32);
        if w == 0.0 {
            break;
        }
        let len = run + 1;
        let mut j = 1;
        loop {
            let l = path_energy(j, len);
            if l > hi {
                break;
            }
            jumps.push((l, w));
            j += 1;
        }
    }
    let function = StepFunction::new(lo, hi, 0.0, jumps)?;
    let values = function.sample(grid);
    Ok(PercolationIds {
        p,
        truncation: k,
        tail_bound: tail,
        grid: grid.to_vec(),
        values,
        function,
    })
}
