//! Spatially restricted traces: the mass that the eigenfunctions of a large
//! cube `Q'` put on the edges of an inner cube `Q`, averaged over seeds.

use std::collections::HashSet;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::approx::{finite_volume_operator, CountingMethod};
use crate::lattice::{induced_subgraph, EdgeId, Region};
use crate::random::EnsembleSpec;
use crate::spectral::clusters::{decompose, dirichlet_path_length};
use crate::spectral::eigen::eigenpairs;
use crate::spectral::fem::{assemble, restricted_mass, Discretization};
use crate::spectral::operator::OperatorData;
use crate::spectral::step::StepFunction;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PasturShubinEstimate {
    pub grid: Vec<f64>,
    /// Seed average as a step function on `[min grid, max grid]`.
    pub function: StepFunction,
    pub per_seed: Vec<StepFunction>,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
}

/// Mass of `√(2/L) sin(jπx/L)` on `[a, a + 1]`.
pub fn path_mode_mass(j: u64, len: usize, a: usize) -> f64 {
    let l = len as f64;
    let w = 2.0 * j as f64 * PI / l;
    1.0 / l - ((w * (a as f64 + 1.0)).sin() - (w * a as f64).sin()) / (2.0 * j as f64 * PI)
}

/// Position of every edge along a path graph, starting at one end.
fn path_positions(data: &OperatorData) -> Vec<usize> {
    let g = data.graph();
    let start = (0..g.num_vertices()).find(|&v| g.degree(v) == 1).expect("path has an end");
    let mut pos = vec![usize::MAX; g.num_edges()];
    let mut v = start;
    let mut prev_edge = usize::MAX;
    for k in 0..g.num_edges() {
        let inc = g.incidence(v).iter().find(|i| i.edge != prev_edge).expect("path continues");
        pos[inc.edge] = k;
        let [a, b] = g.edge_ends(inc.edge);
        v = if a.vertex == v { b.vertex } else { a.vertex };
        prev_edge = inc.edge;
    }
    pos
}

/// `(λ, mass on the marked edges)` for every eigenpair `λ <= lambda_max`.
fn restricted_jumps(
    data: &OperatorData,
    marked: &[usize],
    disc: &Discretization,
    lambda_max: f64,
    analytic: bool,
) -> Result<Vec<(f64, f64)>> {
    if analytic {
        if let Some(len) = dirichlet_path_length(data) {
            let pos = path_positions(data);
            let mut out = Vec::new();
            for j in 1.. {
                let l = (j as f64 * PI / len as f64).powi(2);
                if l > lambda_max {
                    break;
                }
                let m: f64 = marked.iter().map(|&e| path_mode_mass(j, len, pos[e])).sum();
                out.push((l, m));
            }
            return Ok(out);
        }
    }
    let p = assemble(data, disc)?;
    let s = eigenpairs(&p, lambda_max)?;
    s.eigenvalues
        .iter()
        .zip(&s.vectors)
        .map(|(&l, x)| Ok((l, restricted_mass(&p, x, marked)?)))
        .collect()
}

/// Restricted trace for one seed as a step function on `[lo, hi]`,
/// normalized by `|E_Q|`.
pub fn restricted_trace(
    spec: &EnsembleSpec,
    seed: u64,
    q: &Region,
    q_prime: &Region,
    disc: &Discretization,
    range: (f64, f64),
    method: CountingMethod,
) -> Result<StepFunction> {
    check_nesting(q, q_prime)?;
    let data = finite_volume_operator(spec, seed, q_prime)?;
    let inner: HashSet<EdgeId> = induced_subgraph(q).edges().iter().cloned().collect();
    let e_q = inner.len() as f64;
    let g = data.graph();
    let mut jumps = Vec::new();
    let pieces: Vec<(OperatorData, Vec<usize>)> = if method == CountingMethod::Direct {
        let marked = (0..g.num_edges()).filter(|&e| inner.contains(&g.edges()[e])).collect();
        vec![(data.clone(), marked)]
    } else {
        decompose(&data)?
            .into_iter()
            .filter_map(|c| {
                let marked: Vec<usize> = (0..c.edges.len())
                    .filter(|&k| inner.contains(&g.edges()[c.edges[k]]))
                    .map(|k| {
                        // component edges are listed in the component graph's order
                        c.data.graph().edge_index(&g.edges()[c.edges[k]]).expect("edge in component")
                    })
                    .collect();
                (!marked.is_empty()).then_some((c.data, marked))
            })
            .collect()
    };
    let per_piece = pieces
        .par_iter()
        .map(|(d, marked)| restricted_jumps(d, marked, disc, range.1, method.is_analytic()))
        .collect::<Result<Vec<_>>>()?;
    for j in per_piece.into_iter().flatten() {
        jumps.push((j.0, j.1 / e_q));
    }
    StepFunction::new(range.0, range.1, 0.0, jumps)
}

fn check_nesting(q: &Region, q_prime: &Region) -> Result<()> {
    let margin = q.diameter().max(1) as u32;
    let grown = q.dilate(margin);
    if grown.sites().any(|x| !q_prime.contains(x)) {
        return Err(Error::MarginViolation(format!(
            "the inner cube needs a margin of {margin} inside the outer one"
        )));
    }
    Ok(())
}

pub fn pastur_shubin_estimate(
    spec: &EnsembleSpec,
    seeds: &[u64],
    q: &Region,
    q_prime: &Region,
    disc: &Discretization,
    grid: &[f64],
    method: CountingMethod,
) -> Result<PasturShubinEstimate> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    check_nesting(q, q_prime)?;
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_seed = seeds
        .par_iter()
        .map(|&s| restricted_trace(spec, s, q, q_prime, disc, (lo, hi), method))
        .collect::<Result<Vec<_>>>()?;
    let n = per_seed.len() as f64;
    let mut function = StepFunction::constant(lo, hi, 0.0)?;
    for f in &per_seed {
        function = function.add(f)?;
    }
    let function = function.scaled(1.0 / n);
    let samples: Vec<Vec<f64>> = per_seed.iter().map(|f| f.sample(grid)).collect();
    let mean = function.sample(grid);
    let standard_error = (0..grid.len())
        .map(|i| {
            if per_seed.len() < 2 {
                return 0.0;
            }
            let var = samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(PasturShubinEstimate {
        grid: grid.to_vec(),
        function,
        per_seed,
        mean,
        standard_error,
    })
}

/// Paired comparison of two placements over the same seeds: the mean and
/// standard error of the per-seed grid averages of `a - b`.
pub fn placement_difference(a: &PasturShubinEstimate, b: &PasturShubinEstimate) -> Result<(f64, f64)> {
    if a.per_seed.len() != b.per_seed.len() || a.grid != b.grid {
        return Err(Error::InvalidArgument("estimates over different seeds or grids".into()));
    }
    let diffs: Vec<f64> = a
        .per_seed
        .iter()
        .zip(&b.per_seed)
        .map(|(x, y)| {
            let (sx, sy) = (x.sample(&a.grid), y.sample(&a.grid));
            sx.iter().zip(&sy).map(|(u, v)| u - v).sum::<f64>() / a.grid.len() as f64
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let se = if diffs.len() < 2 {
        0.0
    } else {
        (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    Ok((mean, se))
}
