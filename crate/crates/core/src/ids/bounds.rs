//! Randomized checks of the spectral shift bounds on a fixed finite graph:
//! changing vertex conditions, Dirichlet bracketing and bounded potential
//! changes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{make_delta, make_dirichlet, make_kirchhoff, make_neumann, VertexCondition};
use crate::error::{Error, Result};
use crate::lattice::MetricSubgraph;
use crate::spectral::counting::count_grid;
use crate::spectral::fem::{assemble, Discretization};
use crate::spectral::operator::OperatorData;
use crate::spectral::potential::StepPotential;
use crate::spectral::reference::dirichlet_reference;

/// Values of the random constant edge potentials.
pub const POTENTIAL_VALUES: [f64; 3] = [-5.0, 0.0, 10.0];
/// Largest graph for which the sweep is run.
pub const MAX_SUITE_EDGES: usize = 16;
/// Constant of the potential bound and its sharper variant.
pub const POTENTIAL_CONSTANT: f64 = 5.0;
pub const SHARP_POTENTIAL_CONSTANT: f64 = 3.0;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SsfReport {
    pub trials: usize,
    pub grid_points: usize,
    pub edges: usize,
    /// `2|E|`, the bound for condition changes and for bracketing.
    pub condition_bound: f64,
    pub max_condition_shift: f64,
    pub condition_violations: usize,
    pub max_bracketing: f64,
    pub bracketing_violations: usize,
    /// Grid points where a zero-potential count falls below `|E| n_D`.
    pub domination_violations: usize,
    pub max_potential_shift: f64,
    /// Largest `|ξ| / (|E|(5 + √‖W₁‖/π + √‖W₂‖/π))` seen.
    pub max_potential_ratio: f64,
    pub potential_violations: usize,
    /// Violations of the same bound with 3 in place of 5.
    pub sharp_potential_violations: usize,
    pub sharp_constant_holds: bool,
    pub ok: bool,
}

fn catalog_condition(rng: &mut ChaCha8Rng, degree: usize) -> VertexCondition {
    match rng.gen_range(0..4) {
        0 => make_dirichlet(degree),
        1 => make_neumann(degree),
        2 => make_kirchhoff(degree),
        _ => make_delta(degree, rng.gen_range(-5.0..5.0)),
    }
}

fn random_potentials(rng: &mut ChaCha8Rng, edges: usize) -> Vec<Arc<StepPotential>> {
    (0..edges)
        .map(|_| Arc::new(StepPotential::constant(POTENTIAL_VALUES[rng.gen_range(0..POTENTIAL_VALUES.len())])))
        .collect()
}

fn sup_norm(pot: &[Arc<StepPotential>]) -> f64 {
    pot.iter().map(|p| p.sup_norm()).fold(0.0, f64::max)
}

#[derive(Default)]
struct TrialOutcome {
    condition: (f64, usize),
    bracketing: (f64, usize),
    domination: usize,
    potential: (f64, f64, usize, usize),
}

fn counts(data: &OperatorData, disc: &Discretization, grid: &[f64]) -> Result<Vec<f64>> {
    Ok(count_grid(&assemble(data, disc)?, grid)?.into_iter().map(|c| c as f64).collect())
}

fn trial(graph: &Arc<MetricSubgraph>, seed: u64, t: u64, grid: &[f64], disc: &Discretization) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    let m = graph.num_edges();
    let mut conditions = || -> Vec<Arc<VertexCondition>> {
        (0..graph.num_vertices())
            .map(|v| Arc::new(catalog_condition(&mut rng, graph.degree(v))))
            .collect()
    };
    let (l1, l2) = (conditions(), conditions());
    let zero = vec![Arc::new(StepPotential::zero()); m];
    let w1 = random_potentials(&mut rng, m);
    let w2 = random_potentials(&mut rng, m);

    let h1 = OperatorData::new(graph.clone(), zero.clone(), l1.clone())?;
    let h2 = OperatorData::new(graph.clone(), zero, l2)?;
    let c1 = counts(&h1, disc, grid)?;
    let c2 = counts(&h2, disc, grid)?;
    let p1 = counts(&h1.clone().with_potentials(w1.clone())?, disc, grid)?;
    let p2 = counts(&h1.with_potentials(w2.clone())?, disc, grid)?;

    let mf = m as f64;
    let bound = 2.0 * mf;
    let mut out = TrialOutcome::default();
    let norms = (sup_norm(&w1).sqrt() + sup_norm(&w2).sqrt()) / std::f64::consts::PI;
    let pbound = mf * (POTENTIAL_CONSTANT + norms);
    let sharp = mf * (SHARP_POTENTIAL_CONSTANT + norms);
    for (i, &l) in grid.iter().enumerate() {
        let shift = (c1[i] - c2[i]).abs();
        out.condition.0 = out.condition.0.max(shift);
        out.condition.1 += (shift > bound) as usize;
        let nd = mf * dirichlet_reference(l) as f64;
        for c in [c1[i], c2[i]] {
            let b = (c - nd).abs();
            out.bracketing.0 = out.bracketing.0.max(b);
            out.bracketing.1 += (b > bound) as usize;
            out.domination += (c < nd) as usize;
        }
        let xi = (p1[i] - p2[i]).abs();
        out.potential.0 = out.potential.0.max(xi);
        out.potential.1 = out.potential.1.max(xi / pbound);
        out.potential.2 += (xi > pbound) as usize;
        out.potential.3 += (xi > sharp) as usize;
    }
    Ok(out)
}

pub fn ssf_bound_suite(
    graph: Arc<MetricSubgraph>,
    trials: usize,
    grid: &[f64],
    seed: u64,
    disc: &Discretization,
) -> Result<SsfReport> {
    if graph.num_edges() == 0 || graph.num_edges() > MAX_SUITE_EDGES {
        return Err(Error::InvalidArgument(format!(
            "the bound suite needs 1 to {MAX_SUITE_EDGES} edges, got {}",
            graph.num_edges()
        )));
    }
    if grid.is_empty() || grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("grid must be nonempty and finite".into()));
    }
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial(&graph, seed, t, grid, disc))
        .collect::<Result<Vec<_>>>()?;
    let mut r = SsfReport {
        trials,
        grid_points: grid.len(),
        edges: graph.num_edges(),
        condition_bound: 2.0 * graph.num_edges() as f64,
        ..SsfReport::default()
    };
    for o in outcomes {
        r.max_condition_shift = r.max_condition_shift.max(o.condition.0);
        r.condition_violations += o.condition.1;
        r.max_bracketing = r.max_bracketing.max(o.bracketing.0);
        r.bracketing_violations += o.bracketing.1;
        r.domination_violations += o.domination;
        r.max_potential_shift = r.max_potential_shift.max(o.potential.0);
        r.max_potential_ratio = r.max_potential_ratio.max(o.potential.1);
        r.potential_violations += o.potential.2;
        r.sharp_potential_violations += o.potential.3;
    }
    r.sharp_constant_holds = r.sharp_potential_violations == 0;
    r.ok = r.condition_violations == 0 && r.bracketing_violations == 0 && r.potential_violations == 0;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{cube_region, induced_subgraph};

    fn grid() -> Vec<f64> {
        (0..=210).map(|i| -10.0 + i as f64).collect()
    }

    #[test]
    fn dirichlet_against_neumann_on_one_edge() {
        let g = Arc::new(induced_subgraph(&cube_region(1, 1).unwrap()));
        let disc = Discretization::new(32, 3).unwrap();
        let conds = |f: fn(usize) -> VertexCondition| {
            OperatorData::uniform(g.clone(), StepPotential::zero(), f).unwrap()
        };
        let d = counts(&conds(make_dirichlet), &disc, &grid()).unwrap();
        let n = counts(&conds(make_neumann), &disc, &grid()).unwrap();
        for (i, &l) in grid().iter().enumerate() {
            let want = if l < 0.0 { 0.0 } else { 1.0 };
            // away from the eigenvalues the shift is exactly one
            let near = (1..6).any(|k| (l - (k as f64 * std::f64::consts::PI).powi(2)).abs() < 0.5);
            if !near {
                assert_eq!(n[i] - d[i], want, "lambda {l}");
            }
        }
    }

    #[test]
    fn small_suite_has_no_violations() {
        let g = Arc::new(induced_subgraph(&cube_region(2, 1).unwrap()));
        let r = ssf_bound_suite(g, 12, &grid(), 4, &Discretization::new(16, 3).unwrap()).unwrap();
        assert!(r.ok, "{r:?}");
        assert_eq!(r.domination_violations, 0);
        assert!(r.max_condition_shift <= 4.0);
        assert!(r.max_potential_ratio <= 1.0);
    }

    #[test]
    fn refuses_large_graphs() {
        let g = Arc::new(induced_subgraph(&cube_region(2, 3).unwrap()));
        assert!(ssf_bound_suite(g, 1, &grid(), 0, &Discretization::default()).is_err());
    }
}
