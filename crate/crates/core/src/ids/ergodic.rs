//! Pattern-frequency estimate of the limit `Ξ = lim ξ_ω^Q / (d|Q|)`: the
//! spectral shift of every observed `M`-pattern, weighted by its empirical
//! frequency.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::approx::{operator_eigenvalues_cached, scaled_dirichlet, CountingMethod, EigenCache};
use crate::lattice::{cube_region, Region};
use crate::random::{frequency_table, realize, sample, EnsembleSpec, FrequencyTable, Pattern};
use crate::spectral::fem::Discretization;
use crate::spectral::step::StepFunction;

/// Number of most frequent patterns whose shifts are kept in the report.
pub const RECORDED_PATTERNS: usize = 32;

/// Spectral shift `ξ̃(P) = n^{C_M} - d M^d n_D` of one realized pattern.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatternShift {
    pub occurrences: u64,
    pub frequency: f64,
    pub shift: StepFunction,
}

/// Boundary term `b(C_M) = 2d|V^∂(C_M)|` of the almost additive shift and
/// the constant `D` with `b(Q) <= D|Q|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRecord {
    pub b: f64,
    pub d_constant: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub side: usize,
    #[serde(skip)]
    pub table: Option<FrequencyTable>,
    pub num_patterns: usize,
    pub windows: u64,
    pub frequency_sum: f64,
    /// Shifts of the [`RECORDED_PATTERNS`] most frequent patterns.
    pub patterns: Vec<PatternShift>,
    pub function: StepFunction,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub boundary: BoundaryRecord,
}

fn pattern_eigenvalues(
    spec: &EnsembleSpec,
    p: &Pattern,
    cube: &Region,
    disc: &Discretization,
    hi: f64,
    method: CountingMethod,
    cache: &EigenCache,
) -> Result<Vec<f64>> {
    let data = realize(&p.to_colouring(spec), cube)?;
    operator_eigenvalues_cached(&data, disc, hi, method, cache)
}

pub fn ergodic_limit_estimate(
    spec: &EnsembleSpec,
    seed: u64,
    side: usize,
    big_region: &Region,
    disc: &Discretization,
    grid: &[f64],
    method: CountingMethod,
) -> Result<ErgodicEstimate> {
    if grid.is_empty() || grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("grid must be nonempty and finite".into()));
    }
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d = spec.dim();
    let spec = spec.with_seed(seed);
    let colouring = sample(&spec, big_region, side as u32)?;
    let table = frequency_table(&colouring, big_region, side)?;
    if table.is_empty() {
        return Err(Error::InvalidArgument("no admissible window in the region".into()));
    }
    let cube = cube_region(d, side)?;
    let volume = (d * cube.len()) as f64;
    let cache = EigenCache::new();

    // eigenvalues are shared bit for bit between patterns through the cache,
    // so summing weights per bit pattern merges them exactly
    let entries: Vec<(&Pattern, f64)> = table.frequencies().collect();
    let merged = entries
        .par_iter()
        .map(|&(p, nu)| {
            let ev = pattern_eigenvalues(&spec, p, &cube, disc, hi, method, &cache)?;
            let mut m: HashMap<u64, f64> = HashMap::new();
            for l in ev {
                *m.entry(l.to_bits()).or_insert(0.0) += nu;
            }
            Ok(m)
        })
        .try_reduce(HashMap::new, |mut a, b| {
            for (k, w) in b {
                *a.entry(k).or_insert(0.0) += w;
            }
            Ok(a)
        })?;
    let frequency_sum: f64 = entries.iter().map(|e| e.1).sum();
    let counted = StepFunction::new(
        lo,
        hi,
        0.0,
        merged.into_iter().map(|(k, w)| (f64::from_bits(k), w / volume)),
    )?;
    let function = counted.sub(&scaled_dirichlet(frequency_sum, lo, hi)?)?;

    let mut by_count: Vec<(&Pattern, u64)> = table.counts.iter().map(|(p, &c)| (p, c)).collect();
    by_count.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let patterns = by_count
        .iter()
        .take(RECORDED_PATTERNS)
        .map(|&(p, c)| {
            let ev = pattern_eigenvalues(&spec, p, &cube, disc, hi, method, &cache)?;
            let n = StepFunction::new(lo, hi, 0.0, ev.into_iter().map(|l| (l, 1.0)))?;
            Ok(PatternShift {
                occurrences: c,
                frequency: table.frequency(p),
                shift: n.sub(&scaled_dirichlet(volume, lo, hi)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let boundary_vertices = realize(&by_count[0].0.to_colouring(&spec), &cube)?.graph().num_boundary_vertices();
    let boundary = BoundaryRecord {
        b: (2 * d * boundary_vertices) as f64,
        d_constant: (2 * d * (d + 1)) as f64,
        volume: cube.len() as f64,
    };
    let values = function.sample(grid);
    Ok(ErgodicEstimate {
        side,
        num_patterns: table.len(),
        windows: table.windows,
        frequency_sum,
        table: Some(table),
        patterns,
        function,
        grid: grid.to_vec(),
        values,
        boundary,
    })
}
