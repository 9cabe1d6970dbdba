//! Finite-volume counting functions `N_ω^Q`, spectral shifts and their
//! convergence as the cube grows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{cube_region, Region};
use crate::random::{realize, sample, EnsembleSpec};
use crate::spectral::clusters::{compact_eigenfunctions_with, component_eigenvalues, decompose, ClassKey};
use crate::spectral::eigen::eigenvalues;
use crate::spectral::fem::{assemble, Discretization};
use crate::spectral::operator::OperatorData;
use crate::spectral::step::{sup_distance, sup_distance_resolved, CountingFunction, StepFunction};

/// Eigenvalues closer than this (relative) form one jump.
pub const JUMP_MERGE_TOL: f64 = 1e-9;

/// Default resolution when a discretized function is compared with an
/// exact one: jumps of the difference within `1e-3·(1 + |λ|)` are merged.
pub const DISCRETE_RESOLUTION: f64 = 1e-3;

/// How the finite-volume eigenvalues are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingMethod {
    /// One pencil for the whole region.
    Direct,
    /// A pencil per class of decoupled pieces.
    #[default]
    Clusters,
    /// As `Clusters`, with exact eigenvalues for Dirichlet paths.
    ClusterAnalytic,
}

impl CountingMethod {
    /// Whether eigenvalues are (up to rounding) exact for the ensembles
    /// whose pieces are all Dirichlet paths.
    pub fn is_analytic(&self) -> bool {
        matches!(self, CountingMethod::ClusterAnalytic)
    }
}

/// Where a finite-volume function came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub ensemble: String,
    pub d: usize,
    pub seed: u64,
    pub sites: usize,
    pub bounding_box: (Vec<i64>, Vec<i64>),
    pub discretization: Discretization,
    pub method: CountingMethod,
    pub version: String,
}

impl Provenance {
    pub fn new(spec: &EnsembleSpec, seed: u64, q: &Region, disc: &Discretization, method: CountingMethod) -> Self {
        Self {
            ensemble: format!("{:?}", spec.kind()),
            d: spec.dim(),
            seed,
            sites: q.len(),
            bounding_box: q.bounding_box(),
            discretization: *disc,
            method,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// `N_ω^Q = n_ω^Q / |E_Q|` on `(-∞, λ_max]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdsApproximant {
    pub counts: CountingFunction,
    pub provenance: Provenance,
}

impl IdsApproximant {
    pub fn function(&self) -> StepFunction {
        self.counts.normalized()
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.counts.value(lambda)
    }

    pub fn num_edges(&self) -> f64 {
        self.counts.rho()
    }
}

/// Eigenvalues of pieces shared between operators, keyed by class. Only
/// valid for one discretization, cutoff and method.
#[derive(Default)]
pub struct EigenCache {
    map: Mutex<HashMap<ClassKey, Arc<Vec<f64>>>>,
}

impl EigenCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Eigenvalues `<= lambda_max` of an operator with multiplicity.
pub fn operator_eigenvalues(
    data: &OperatorData,
    disc: &Discretization,
    lambda_max: f64,
    method: CountingMethod,
) -> Result<Vec<f64>> {
    operator_eigenvalues_cached(data, disc, lambda_max, method, &EigenCache::new())
}

pub fn operator_eigenvalues_cached(
    data: &OperatorData,
    disc: &Discretization,
    lambda_max: f64,
    method: CountingMethod,
    cache: &EigenCache,
) -> Result<Vec<f64>> {
    if method == CountingMethod::Direct {
        let p = assemble(data, disc)?;
        return eigenvalues(&p, lambda_max);
    }
    let comps = decompose(data)?;
    let mut classes: HashMap<&ClassKey, (usize, usize)> = HashMap::new();
    for (i, c) in comps.iter().enumerate() {
        classes.entry(&c.key).or_insert((i, 0)).1 += 1;
    }
    let mut reps: Vec<(usize, usize)> = classes.into_values().collect();
    reps.sort();
    let per_class = reps
        .par_iter()
        .map(|&(i, n)| {
            let key = &comps[i].key;
            if let Some(ev) = cache.map.lock().expect("cache lock").get(key) {
                return Ok((ev.clone(), n));
            }
            let ev = Arc::new(component_eigenvalues(&comps[i].data, disc, lambda_max, method.is_analytic())?);
            cache.map.lock().expect("cache lock").insert(key.clone(), ev.clone());
            Ok((ev, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<f64> = Vec::new();
    for (ev, n) in per_class {
        for &l in ev.iter() {
            out.extend(std::iter::repeat(l).take(n));
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Operator data of `ω = seed` on `Q` with Dirichlet closure.
pub fn finite_volume_operator(spec: &EnsembleSpec, seed: u64, q: &Region) -> Result<OperatorData> {
    let spec = spec.with_seed(seed);
    realize(&sample(&spec, q, 1)?, q)
}

pub fn normalized_counting(
    spec: &EnsembleSpec,
    seed: u64,
    q: &Region,
    disc: &Discretization,
    lambda_max: f64,
) -> Result<IdsApproximant> {
    normalized_counting_with(spec, seed, q, disc, lambda_max, CountingMethod::default())
}

pub fn normalized_counting_with(
    spec: &EnsembleSpec,
    seed: u64,
    q: &Region,
    disc: &Discretization,
    lambda_max: f64,
    method: CountingMethod,
) -> Result<IdsApproximant> {
    if !lambda_max.is_finite() {
        return Err(Error::InvalidArgument("lambda_max must be finite".into()));
    }
    let data = finite_volume_operator(spec, seed, q)?;
    let ev = operator_eigenvalues(&data, disc, lambda_max, method)?;
    let rho = data.graph().num_edges() as f64;
    Ok(IdsApproximant {
        counts: CountingFunction::from_eigenvalues(ev, rho, f64::NEG_INFINITY, lambda_max, JUMP_MERGE_TOL)?,
        provenance: Provenance::new(spec, seed, q, disc, method),
    })
}

/// `weight · n_D` on `(-∞, hi]`.
pub fn scaled_dirichlet(weight: f64, lo: f64, hi: f64) -> Result<StepFunction> {
    let jumps = (1u64..)
        .map(|k| ((k as f64 * PI).powi(2), weight))
        .take_while(|j| j.0 <= hi);
    StepFunction::new(lo, hi, 0.0, jumps)
}

/// `ξ_ω^Q = n_ω^Q - d|Q| n_D` on `(-∞, λ_max]`.
pub fn spectral_shift(
    spec: &EnsembleSpec,
    seed: u64,
    q: &Region,
    disc: &Discretization,
    lambda_max: f64,
) -> Result<StepFunction> {
    spectral_shift_with(spec, seed, q, disc, lambda_max, CountingMethod::default())
}

pub fn spectral_shift_with(
    spec: &EnsembleSpec,
    seed: u64,
    q: &Region,
    disc: &Discretization,
    lambda_max: f64,
    method: CountingMethod,
) -> Result<StepFunction> {
    let n = normalized_counting_with(spec, seed, q, disc, lambda_max, method)?;
    shift_of(&n.counts)
}

/// `n - |E| n_D` for a counting function with `ρ = |E|`.
pub fn shift_of(n: &CountingFunction) -> Result<StepFunction> {
    let (lo, hi) = n.range();
    n.raw().sub(&scaled_dirichlet(n.rho(), lo, hi)?)
}

/// Sup-distances along a sequence of cubes `C_M`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub sides: Vec<usize>,
    pub range: (f64, f64),
    /// `(i, j, distance)` for every pair `i < j` of sides.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub to_oracle: Option<Vec<f64>>,
    /// Distances to the oracle (or between consecutive cubes when there is
    /// none) strictly decreasing.
    pub cauchy: bool,
    pub runtimes_ms: Vec<u128>,
}

/// Pure input of [`convergence_study`].
#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub range: (f64, f64),
    pub method: CountingMethod,
    /// Merge distance for comparisons with the oracle; `None` compares
    /// exactly.
    pub resolution: Option<f64>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            range: (-10.0, 200.0),
            method: CountingMethod::default(),
            resolution: Some(DISCRETE_RESOLUTION),
        }
    }
}

fn distance(f: &StepFunction, g: &StepFunction, resolution: Option<f64>) -> Result<f64> {
    match resolution {
        Some(r) => sup_distance_resolved(f, g, r),
        None => sup_distance(f, g),
    }
}

pub fn convergence_study(
    spec: &EnsembleSpec,
    seed: u64,
    sides: &[usize],
    disc: &Discretization,
    options: &StudyOptions,
    oracle: Option<&StepFunction>,
) -> Result<ConvergenceReport> {
    if sides.windows(2).any(|w| w[0] >= w[1]) || sides.is_empty() {
        return Err(Error::InvalidArgument("cube sides must be increasing".into()));
    }
    let (lo, hi) = options.range;
    let mut fns = Vec::with_capacity(sides.len());
    let mut runtimes = Vec::with_capacity(sides.len());
    for &m in sides {
        let t = Instant::now();
        let q = cube_region(spec.dim(), m)?;
        let n = normalized_counting_with(spec, seed, &q, disc, hi, options.method)?;
        fns.push(n.function().restrict(lo, hi)?);
        runtimes.push(t.elapsed().as_millis());
    }
    let mut pairwise = Vec::new();
    for i in 0..fns.len() {
        for j in i + 1..fns.len() {
            pairwise.push((i, j, sup_distance(&fns[i], &fns[j])?));
        }
    }
    let to_oracle = oracle
        .map(|o| {
            let o = o.restrict(lo, hi)?;
            fns.iter().map(|f| distance(f, &o, options.resolution)).collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let cauchy = match &to_oracle {
        Some(d) => decreasing(d),
        None => {
            let consecutive: Vec<f64> = pairwise.iter().filter(|p| p.1 == p.0 + 1).map(|p| p.2).collect();
            decreasing(&consecutive)
        }
    };
    Ok(ConvergenceReport {
        sides: sides.to_vec(),
        range: options.range,
        pairwise,
        to_oracle,
        cauchy,
        runtimes_ms: runtimes,
    })
}

/// Jumps of `N` of height at least `min_height`, with normalized heights.
pub fn jump_list(n: &IdsApproximant, min_height: f64) -> Result<Vec<(f64, f64)>> {
    if !(min_height > 0.0) {
        return Err(Error::InvalidArgument("min_height must be positive".into()));
    }
    let rho = n.counts.rho();
    Ok(n
        .counts
        .jumps()
        .iter()
        .map(|&(l, h)| (l, h as f64 / rho))
        .filter(|j| j.1 >= min_height * (1.0 - 1e-12))
        .collect())
}

/// One detected jump and the compact energy it was matched with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpMatch {
    pub lambda: f64,
    /// Unnormalized height, i.e. the number of eigenvalues at `lambda`.
    pub count: u64,
    pub compact: Option<(f64, usize)>,
    /// `count - 2d|V^∂|`: multiplicity the compact energy must reach.
    pub required: i64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpReport {
    pub min_height: f64,
    pub jumps: Vec<JumpMatch>,
    pub unmatched_jumps: usize,
    /// Compact energies of multiplicity at least 2 without a jump of `N`.
    pub unmatched_compact: Vec<(f64, usize)>,
    pub ok: bool,
}

/// Matching tolerance between jump positions and compact energies.
pub const MATCH_TOL: f64 = 1e-6;

pub fn jumps_match_compact(
    spec: &EnsembleSpec,
    seed: u64,
    q: &Region,
    disc: &Discretization,
    lambda_max: f64,
    min_height: f64,
    method: CountingMethod,
) -> Result<JumpReport> {
    let data = finite_volume_operator(spec, seed, q)?;
    let ev = operator_eigenvalues(&data, disc, lambda_max, method)?;
    let g = data.graph();
    let rho = g.num_edges() as f64;
    let n = IdsApproximant {
        counts: CountingFunction::from_eigenvalues(ev, rho, f64::NEG_INFINITY, lambda_max, JUMP_MERGE_TOL)?,
        provenance: Provenance::new(spec, seed, q, disc, method),
    };
    let compact = compact_eigenfunctions_with(&data, disc, lambda_max, method.is_analytic())?;
    let allowance = (2 * g.dim() * g.num_boundary_vertices()) as i64;
    let nearest = |l: f64| {
        compact
            .iter()
            .filter(|c| (c.0 - l).abs() <= MATCH_TOL)
            .min_by(|a, b| (a.0 - l).abs().total_cmp(&(b.0 - l).abs()))
            .copied()
    };
    let jumps: Vec<JumpMatch> = jump_list(&n, min_height)?
        .into_iter()
        .map(|(l, h)| {
            let count = (h * rho).round() as u64;
            let c = nearest(l);
            let required = count as i64 - allowance;
            let ok = match c {
                Some((_, m)) => m as i64 >= required,
                None => false,
            };
            JumpMatch {
                lambda: l,
                count,
                compact: c,
                required,
                ok,
            }
        })
        .collect();
    let unmatched_compact: Vec<(f64, usize)> = compact
        .iter()
        .filter(|c| c.1 >= 2)
        .filter(|c| !n.counts.jumps().iter().any(|j| (j.0 - c.0).abs() <= MATCH_TOL))
        .copied()
        .collect();
    let unmatched_jumps = jumps.iter().filter(|j| !j.ok).count();
    Ok(JumpReport {
        min_height,
        ok: unmatched_jumps == 0 && unmatched_compact.is_empty(),
        jumps,
        unmatched_jumps,
        unmatched_compact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::reference::dirichlet_reference;

    fn quick() -> Discretization {
        Discretization::new(16, 3).unwrap()
    }

    #[test]
    fn full_chain_is_an_interval() {
        let spec = EnsembleSpec::site_percolation(1, 1.0, 0).unwrap();
        let m = 8;
        let q = cube_region(1, m).unwrap();
        let n = normalized_counting_with(&spec, 0, &q, &quick(), 60.0, CountingMethod::ClusterAnalytic).unwrap();
        assert_eq!(n.num_edges(), 8.0);
        let jumps = n.counts.jumps();
        assert_eq!(jumps.len(), ((60f64).sqrt() * m as f64 / PI) as usize);
        for (k, &(l, h)) in jumps.iter().enumerate() {
            assert_eq!(h, 1);
            assert!((l - ((k + 1) as f64 * PI / m as f64).powi(2)).abs() < 1e-12);
        }
        // the discretized pencil agrees to discretization accuracy
        let fem = normalized_counting_with(&spec, 0, &q, &quick(), 60.0, CountingMethod::Direct).unwrap();
        let d = sup_distance_resolved(&fem.function(), &n.function(), 1e-4).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn all_dirichlet_is_n_d() {
        let spec = EnsembleSpec::site_percolation(2, 0.0, 5).unwrap();
        let q = cube_region(2, 3).unwrap();
        for method in [CountingMethod::Clusters, CountingMethod::ClusterAnalytic] {
            let n = normalized_counting_with(&spec, 5, &q, &quick(), 100.0, method).unwrap();
            let d = scaled_dirichlet(1.0, f64::NEG_INFINITY, 100.0).unwrap();
            assert!(sup_distance_resolved(&n.function(), &d, 1e-4).unwrap() < 1e-12);
            let xi = shift_of(&n.counts).unwrap().coarsened(1e-4);
            assert!(xi.sup_norm() < 1e-12);
        }
    }

    #[test]
    fn two_site_chain_shift() {
        let spec = EnsembleSpec::site_percolation(1, 1.0, 0).unwrap();
        let q = cube_region(1, 2).unwrap();
        let xi = spectral_shift_with(&spec, 0, &q, &quick(), 200.0, CountingMethod::ClusterAnalytic).unwrap();
        for i in 0..2000 {
            let l = 0.1 * i as f64;
            let want = (2.0 * l.sqrt() / PI).floor() - 2.0 * dirichlet_reference(l) as f64;
            assert_eq!(xi.value(l), want, "lambda {l}");
        }
        assert!(xi.sup_norm() <= 1.0);
    }

    #[test]
    fn methods_agree() {
        let spec = EnsembleSpec::site_percolation(2, 0.5, 11).unwrap();
        let q = cube_region(2, 3).unwrap();
        let a = normalized_counting_with(&spec, 11, &q, &quick(), 80.0, CountingMethod::Direct).unwrap();
        let b = normalized_counting_with(&spec, 11, &q, &quick(), 80.0, CountingMethod::Clusters).unwrap();
        assert!(sup_distance_resolved(&a.function(), &b.function(), 1e-9).unwrap() < 1e-12);
    }

    #[test]
    fn deterministic_chain_cauchy_bound() {
        let spec = EnsembleSpec::site_percolation(1, 1.0, 0).unwrap();
        let opts = StudyOptions {
            range: (0.0, 200.0),
            method: CountingMethod::ClusterAnalytic,
            resolution: None,
        };
        let r = convergence_study(&spec, 0, &[16, 32, 64], &quick(), &opts, None).unwrap();
        for &(i, j, d) in &r.pairwise {
            if j == i + 1 {
                assert!(d <= 2.0 / r.sides[i] as f64 + 1e-12, "{d}");
            }
        }
        let zero = EnsembleSpec::site_percolation(1, 0.0, 0).unwrap();
        let r = convergence_study(&zero, 0, &[4, 8], &quick(), &opts, None).unwrap();
        assert!(r.pairwise.iter().all(|p| p.2 < 1e-12));
    }

    #[test]
    fn jumps_of_isolated_edges() {
        let spec = EnsembleSpec::site_percolation(1, 0.0, 0).unwrap();
        let q = cube_region(1, 16).unwrap();
        let r = jumps_match_compact(&spec, 0, &q, &quick(), 100.0, 2.0 / 16.0, CountingMethod::Clusters).unwrap();
        assert!(r.ok);
        assert_eq!(r.jumps.len(), 3);
        assert!(r.jumps.iter().all(|j| j.count == 16 && j.compact.unwrap().1 == 16));
        let n = normalized_counting(&spec, 0, &q, &quick(), 100.0).unwrap();
        assert!(jump_list(&n, 1.5).unwrap().is_empty());
        assert_eq!(jump_list(&n, 1.0).unwrap().len(), 3);
    }

    #[test]
    fn long_chain_has_no_jumps() {
        let spec = EnsembleSpec::site_percolation(1, 1.0, 0).unwrap();
        let q = cube_region(1, 32).unwrap();
        let r = jumps_match_compact(&spec, 0, &q, &quick(), 100.0, 2.0 / 32.0, CountingMethod::ClusterAnalytic).unwrap();
        assert!(r.jumps.is_empty() && r.ok);
    }
}
