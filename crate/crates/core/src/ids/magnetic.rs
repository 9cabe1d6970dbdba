//! Magnetic phase experiments: gauging phases away on trees, flux
//! dependence on the unit square cycle and flux periodicity.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::make_kirchhoff;
use crate::error::{Error, Result};
use crate::lattice::{EdgeId, LatticeSite, MetricSubgraph};
use crate::spectral::counting::{count_below, count_grid};
use crate::spectral::eigen::eigenvalues;
use crate::spectral::fem::{assemble, assemble_magnetic, Discretization};
use crate::spectral::operator::OperatorData;
use crate::spectral::potential::StepPotential;
use crate::spectral::secular::secular_oracle;

/// Eigenvalue agreement required between gauge-equivalent operators.
pub const GAUGE_TOL: f64 = 1e-8;
/// Grid points this close (relative) to an eigenvalue are skipped when the
/// first-order discretization is compared with the twisted one.
const DIRECT_GAP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagneticKind {
    TreeGauge,
    CycleFlux,
    Periodicity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MagneticParams {
    pub trials: usize,
    pub seed: u64,
    /// Total fluxes for the cycle experiments.
    pub fluxes: Vec<f64>,
    pub range: (f64, f64),
    pub grid_step: f64,
    pub discretization: Discretization,
}

impl Default for MagneticParams {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 0,
            fluxes: vec![0.0, PI],
            range: (0.0, 200.0),
            grid_step: 0.25,
            discretization: Discretization::default(),
        }
    }
}

impl MagneticParams {
    fn grid(&self) -> Result<Vec<f64>> {
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && self.grid_step > 0.0) {
            return Err(Error::InvalidArgument("bad magnetic grid".into()));
        }
        let n = ((hi - lo) / self.grid_step).floor() as usize;
        Ok((0..=n).map(|i| lo + i as f64 * self.grid_step).collect())
    }
}

/// Eigenvalues of the square cycle at one flux.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxSpectrum {
    pub flux: f64,
    pub phases: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `((2πk + φ)/4)²` over `k ∈ Z`, sorted.
    pub predicted: Vec<f64>,
    pub secular: Vec<f64>,
    /// Counts below 3 of the pencil, the closed form and the secular scan.
    pub count_below_3: (usize, usize, usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MagneticReport {
    pub kind: MagneticKind,
    pub trials: usize,
    /// Largest eigenvalue deviation between operators that should agree.
    pub max_deviation: f64,
    pub counts_equal: bool,
    pub fluxes: Vec<FluxSpectrum>,
    /// Largest eigenvalue deviation of the first-order discretization from
    /// the twisted one.
    pub direct_deviation: f64,
    pub direct_counts_equal: bool,
    pub ok: bool,
}

/// Path of `n` unit edges along the first axis.
pub fn path_graph(n: usize) -> Result<Arc<MetricSubgraph>> {
    let edges = (0..n as i64).map(|i| EdgeId::new(LatticeSite::new(vec![i]).expect("one dimension"), 1));
    Ok(Arc::new(MetricSubgraph::from_edges(1, edges.collect::<Result<Vec<_>>>()?)?))
}

/// Boundary of the unit square in `Z^2`.
pub fn square_cycle() -> Arc<MetricSubgraph> {
    let o = LatticeSite::origin(2);
    let edges = [
        EdgeId::new(o.clone(), 1),
        EdgeId::new(o.clone(), 2),
        EdgeId::new(o.step(1, 1), 2),
        EdgeId::new(o.step(2, 1), 1),
    ]
    .map(|e| e.expect("valid direction"));
    Arc::new(MetricSubgraph::from_edges(2, edges).expect("square edges"))
}

fn connected(g: &MetricSubgraph) -> bool {
    let n = g.num_vertices();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for inc in g.incidence(v) {
            for end in g.edge_ends(inc.edge) {
                if !seen[end.vertex] {
                    seen[end.vertex] = true;
                    stack.push(end.vertex);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn is_tree(g: &MetricSubgraph) -> bool {
    connected(g) && g.num_edges() + 1 == g.num_vertices()
}

pub fn is_cycle(g: &MetricSubgraph) -> bool {
    connected(g) && (0..g.num_vertices()).all(|v| g.degree(v) == 2)
}

fn kirchhoff(g: &Arc<MetricSubgraph>) -> Result<OperatorData> {
    OperatorData::uniform(g.clone(), StepPotential::zero(), make_kirchhoff)
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares the twisted pencil with the first-order one at grid points away
/// from the twisted eigenvalues.
fn direct_check(data: &OperatorData, disc: &Discretization, grid: &[f64], hi: f64) -> Result<(f64, bool)> {
    let twisted = assemble(data, disc)?;
    let direct = assemble_magnetic(data, disc)?;
    let et = eigenvalues(&twisted, hi)?;
    let ed = eigenvalues(&direct, hi)?;
    let far: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&l| et.iter().all(|&e| (e - l).abs() > DIRECT_GAP * (1.0 + l.abs())))
        .collect();
    let equal = count_grid(&twisted, &far)? == count_grid(&direct, &far)?;
    Ok((max_deviation(&et, &ed), equal))
}

/// `±1` per edge: whether the edge points along a fixed traversal of the
/// cycle. The flux is `Σ_e s_e φ_e`.
pub fn cycle_orientation(g: &MetricSubgraph) -> Vec<f64> {
    let mut signs = vec![0.0; g.num_edges()];
    let mut v = g.edge_ends(0)[0].vertex;
    let mut e = 0;
    for _ in 0..g.num_edges() {
        let [a, b] = g.edge_ends(e);
        let forward = a.vertex == v;
        signs[e] = if forward { 1.0 } else { -1.0 };
        v = if forward { b.vertex } else { a.vertex };
        e = g.incidence(v).iter().map(|i| i.edge).find(|&x| x != e).unwrap_or(e);
    }
    signs
}

/// Phases with a random split of the total flux over the edges.
fn split_flux(rng: &mut ChaCha8Rng, flux: f64, signs: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = signs.iter().map(|_| rng.gen_range(-PI..PI)).collect();
    let rest: f64 = p.iter().zip(signs).skip(1).map(|(x, s)| x * s).sum();
    p[0] = signs[0] * (flux - rest);
    p
}

fn predicted_cycle(flux: f64, len: f64, lo: f64, hi: f64) -> Vec<f64> {
    let kmax = ((hi.max(0.0).sqrt() * len + flux.abs()) / (2.0 * PI)).ceil() as i64 + 1;
    let mut out: Vec<f64> = (-kmax..=kmax)
        .map(|k| ((2.0 * PI * k as f64 + flux) / len).powi(2))
        .filter(|&l| l >= lo && l <= hi)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn tree_gauge(graph: &Arc<MetricSubgraph>, params: &MagneticParams) -> Result<MagneticReport> {
    if !is_tree(graph) {
        return Err(Error::WrongShape("the gauge experiment needs a tree".into()));
    }
    let grid = params.grid()?;
    let disc = &params.discretization;
    let (_, hi) = params.range;
    let plain = kirchhoff(graph)?;
    let p0 = assemble(&plain, disc)?;
    let e0 = eigenvalues(&p0, hi)?;
    let c0 = count_grid(&p0, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut dev: f64 = 0.0;
    let mut equal = true;
    let mut direct = (0.0f64, true);
    for t in 0..params.trials {
        let phases: Vec<f64> = (0..graph.num_edges()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let data = plain.clone().with_phases(phases)?;
        let p = assemble(&data, disc)?;
        dev = dev.max(max_deviation(&e0, &eigenvalues(&p, hi)?));
        equal &= count_grid(&p, &grid)? == c0;
        if t == 0 {
            direct = direct_check(&data, disc, &grid, hi)?;
        }
    }
    Ok(MagneticReport {
        kind: MagneticKind::TreeGauge,
        trials: params.trials,
        max_deviation: dev,
        counts_equal: equal,
        fluxes: Vec::new(),
        direct_deviation: direct.0,
        direct_counts_equal: direct.1,
        ok: dev <= GAUGE_TOL && equal && direct.1,
    })
}

fn flux_spectrum(
    graph: &Arc<MetricSubgraph>,
    phases: Vec<f64>,
    flux: f64,
    params: &MagneticParams,
) -> Result<(FluxSpectrum, OperatorData)> {
    let (lo, hi) = params.range;
    let data = kirchhoff(graph)?.with_phases(phases.clone())?;
    let p = assemble(&data, &params.discretization)?;
    let ev: Vec<f64> = eigenvalues(&p, hi)?.into_iter().filter(|&l| l >= lo - 1e-9).collect();
    let len = graph.num_edges() as f64;
    let predicted = predicted_cycle(flux, len, lo, hi);
    let secular = secular_oracle(&data, (lo - 1.0).min(-1.0), 3.5)?;
    let counts = (
        count_below(&p, 3.0)?,
        predicted_cycle(flux, len, f64::NEG_INFINITY, 3.0).len(),
        secular.count_below(3.0),
    );
    Ok((
        FluxSpectrum {
            flux,
            phases,
            eigenvalues: ev,
            predicted,
            secular: secular.eigenvalues,
            count_below_3: counts,
        },
        data,
    ))
}

fn cycle_flux(graph: &Arc<MetricSubgraph>, params: &MagneticParams, periodic: bool) -> Result<MagneticReport> {
    if !is_cycle(graph) {
        return Err(Error::WrongShape("the flux experiments need a single cycle".into()));
    }
    let grid = params.grid()?;
    let disc = &params.discretization;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let m = graph.num_edges();
    let signs = cycle_orientation(graph);
    let mut dev: f64 = 0.0;
    let mut equal = true;
    let mut law = true;
    let mut fluxes = Vec::new();
    let mut direct = (0.0f64, true);
    for (i, &flux) in params.fluxes.iter().enumerate() {
        let base: Vec<f64> = (0..m).map(|e| if e == 0 { signs[0] * flux } else { 0.0 }).collect();
        let (spec, data) = flux_spectrum(graph, base, flux, params)?;
        let reference = count_grid(&assemble(&data, disc)?, &grid)?;
        if i == 0 {
            direct = direct_check(&data, disc, &grid, params.range.1)?;
        }
        // the pencil sits above the exact values by the discretization error
        law &= spec.count_below_3.0 == spec.count_below_3.1 && spec.count_below_3.1 == spec.count_below_3.2;
        for t in 0..params.trials {
            let (phases, other_flux) = if periodic {
                let mut p = split_flux(&mut rng, flux, &signs);
                let k = if t % 2 == 0 { 1.0 } else { -1.0 };
                p[t % m] += 2.0 * PI * k * signs[t % m];
                (p, flux + 2.0 * PI * k)
            } else {
                (split_flux(&mut rng, flux, &signs), flux)
            };
            let (other, odata) = flux_spectrum(graph, phases, other_flux, params)?;
            dev = dev.max(max_deviation(&spec.eigenvalues, &other.eigenvalues));
            equal &= count_grid(&assemble(&odata, disc)?, &grid)? == reference;
        }
        fluxes.push(spec);
    }
    Ok(MagneticReport {
        kind: if periodic { MagneticKind::Periodicity } else { MagneticKind::CycleFlux },
        trials: params.trials,
        max_deviation: dev,
        counts_equal: equal,
        fluxes,
        direct_deviation: direct.0,
        direct_counts_equal: direct.1,
        ok: dev <= GAUGE_TOL && equal && law && direct.1,
    })
}

/// Runs one experiment; `graph` defaults to a path of three edges for the
/// gauge experiment and to the unit square cycle otherwise.
pub fn magnetic_experiments(
    kind: MagneticKind,
    graph: Option<Arc<MetricSubgraph>>,
    params: &MagneticParams,
) -> Result<MagneticReport> {
    params.discretization.check()?;
    match kind {
        MagneticKind::TreeGauge => tree_gauge(&graph.map_or_else(|| path_graph(3), Ok)?, params),
        MagneticKind::CycleFlux => cycle_flux(&graph.unwrap_or_else(square_cycle), params, false),
        MagneticKind::Periodicity => cycle_flux(&graph.unwrap_or_else(square_cycle), params, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> MagneticParams {
        MagneticParams {
            trials: 4,
            discretization: Discretization::new(16, 4).unwrap(),
            grid_step: 1.0,
            ..MagneticParams::default()
        }
    }

    #[test]
    fn shapes() {
        assert!(is_tree(&path_graph(3).unwrap()));
        assert!(!is_cycle(&path_graph(3).unwrap()));
        assert!(is_cycle(&square_cycle()) && !is_tree(&square_cycle()));
        // two edges of the square run against any traversal
        let s = cycle_orientation(&square_cycle());
        assert_eq!(s.iter().filter(|&&x| x < 0.0).count(), 2);
        let r = magnetic_experiments(MagneticKind::TreeGauge, Some(square_cycle()), &quick());
        assert!(matches!(r, Err(Error::WrongShape(_))));
        let r = magnetic_experiments(MagneticKind::CycleFlux, Some(path_graph(2).unwrap()), &quick());
        assert!(matches!(r, Err(Error::WrongShape(_))));
    }

    #[test]
    fn predicted_square_spectrum() {
        let z = predicted_cycle(0.0, 4.0, -1.0, 3.0);
        assert_eq!(z.len(), 3);
        let h = predicted_cycle(PI, 4.0, -1.0, 3.0);
        assert_eq!(h.len(), 2);
        assert!(h.iter().all(|l| (l - (PI / 4.0).powi(2)).abs() < 1e-12));
    }

    #[test]
    fn gauge_flux_and_periodicity() {
        let p = quick();
        let tree = magnetic_experiments(MagneticKind::TreeGauge, None, &p).unwrap();
        assert!(tree.ok, "{tree:?}");
        let cyc = magnetic_experiments(MagneticKind::CycleFlux, None, &p).unwrap();
        assert!(cyc.ok, "{cyc:?}");
        assert_eq!(cyc.fluxes[0].count_below_3, (3, 3, 3));
        assert_eq!(cyc.fluxes[1].count_below_3, (2, 2, 2));
        let per = magnetic_experiments(MagneticKind::Periodicity, None, &p).unwrap();
        assert!(per.ok, "{per:?}");
    }
}
