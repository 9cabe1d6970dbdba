//! Closed-form counting functions of the unit interval.

use std::f64::consts::PI;

/// Dirichlet eigenvalues of `]0, 1[` that are `<= lambda`: `⌊√λ/π⌋` for
/// `λ >= 0`, else 0.
pub fn dirichlet_reference(lambda: f64) -> u64 {
    if !(lambda >= 0.0) {
        return 0;
    }
    let k = (lambda.sqrt() / PI).floor();
    // guard the floor against rounding right at the jumps (kπ)²
    let k = k as u64;
    if ((k + 1) as f64 * PI).powi(2) <= lambda {
        k + 1
    } else if k > 0 && (k as f64 * PI).powi(2) > lambda {
        k - 1
    } else {
        k
    }
}

/// Neumann counterpart: one more eigenvalue (the constant) from `λ = 0` on.
pub fn neumann_reference(lambda: f64) -> u64 {
    dirichlet_reference(lambda) + u64::from(lambda >= 0.0)
}

/// Eigenvalues `(jπ/L)² <= lambda_max` of a Dirichlet interval of length `L`.
pub fn dirichlet_interval_eigenvalues(length: f64, lambda_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 1u64;
    loop {
        let l = (j as f64 * PI / length).powi(2);
        if l > lambda_max {
            return out;
        }
        out.push(l);
        j += 1;
    }
}
