//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qgids_core::conditions::{random_condition, subspace_equal, twist, PhaseTwist, VertexCondition};
use qgids_core::ids::{
    convergence_study, ergodic_limit_estimate, jumps_match_compact, magnetic_experiments, pastur_shubin_estimate,
    percolation_ids_1d_exact, placement_difference, spectral_shift_with, ssf_bound_suite, CountingMethod,
    MagneticKind, MagneticParams, StudyOptions,
};
use qgids_core::ids::approx::DISCRETE_RESOLUTION;
use qgids_core::ids::magnetic::path_graph;
use qgids_core::lattice::{cube_region, induced_subgraph};
use qgids_core::random::EnsembleSpec;
use qgids_core::spectral::counting::count_grid;
use qgids_core::spectral::{
    assemble, cluster_decompose, eigenvalues, secular_oracle, sup_distance_resolved, Discretization, OperatorData,
    StepPotential,
};

use common::{lattice_animals, to_graph, Catalog};

struct Verdict {
    pass: bool,
    detail: String,
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let t = Instant::now();
    let mut v = f();
    let el = t.elapsed();
    v.detail.push_str(&format!("; runtime {:.1} s (limit {} s)", el.as_secs_f64(), limit.as_secs()));
    v.pass &= el < limit;
    v
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn dirichlet_edge() -> OperatorData {
    let g = Arc::new(induced_subgraph(&cube_region(1, 1).unwrap()));
    OperatorData::uniform(g, StepPotential::zero(), Catalog::Dirichlet.build_fn()).unwrap()
}

trait BuildFn {
    fn build_fn(self) -> Box<dyn Fn(usize) -> VertexCondition>;
}

impl BuildFn for Catalog {
    fn build_fn(self) -> Box<dyn Fn(usize) -> VertexCondition> {
        Box::new(move |d| self.build(d))
    }
}

fn interval_oracle() -> Verdict {
    let disc = Discretization::new(64, 2).unwrap();
    let p = assemble(&dirichlet_edge(), &disc).unwrap();
    let ev = eigenvalues(&p, 400.0).unwrap();
    let rel: Vec<f64> = (1..=6)
        .map(|k| {
            let exact = (k as f64 * PI).powi(2);
            ev.get(k - 1).map_or(f64::INFINITY, |l| (l - exact).abs() / exact)
        })
        .collect();
    let worst = rel.iter().cloned().fold(0.0, f64::max);
    let jumps: Vec<f64> = (1..=6).map(|k| (k as f64 * PI).powi(2)).collect();
    let mut pts: Vec<f64> = grid(0.0, 400.0, 0.01)
        .into_iter()
        .filter(|l| jumps.iter().all(|j| (l - j).abs() > 1e-6))
        .collect();
    for j in &jumps {
        pts.extend([j - 1.01e-6, j + 1.01e-6]);
    }
    let counts = count_grid(&p, &pts).unwrap();
    let mismatches = pts
        .iter()
        .zip(&counts)
        .filter(|(l, c)| (l.sqrt() / PI).floor() as usize != **c)
        .count();
    Verdict {
        pass: worst <= 1e-6 && mismatches == 0,
        detail: format!(
            "max rel error k<=6 {worst:.2e} (per k {}), {mismatches} of {} grid counts differ from floor(sqrt(l)/pi)",
            rel.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join(" "),
            pts.len()
        ),
    }
}

fn ssf_bounds() -> Verdict {
    let g = Arc::new(induced_subgraph(&cube_region(2, 2).unwrap()));
    let edges = g.num_edges();
    let r = ssf_bound_suite(g, 200, &grid(-10.0, 200.0, 0.25), 2024, &Discretization::default()).unwrap();
    Verdict {
        pass: edges == 8 && r.ok && r.condition_bound == 16.0,
        detail: format!(
            "|E|={edges}, max |xi| conditions {} (<= 16, {} violations), bracketing {} ({} violations), potential ratio {:.3} ({} violations)",
            r.max_condition_shift,
            r.condition_violations,
            r.max_bracketing,
            r.bracketing_violations,
            r.max_potential_ratio,
            r.potential_violations
        ),
    }
}

fn percolation_convergence() -> Verdict {
    let exact = percolation_ids_1d_exact(0.5, &[0.0, 100.0], None).unwrap().function;
    let opts = StudyOptions {
        range: (0.0, 100.0),
        method: CountingMethod::ClusterAnalytic,
        ..StudyOptions::default()
    };
    let rows: Vec<(u64, Vec<f64>)> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let spec = EnsembleSpec::site_percolation(1, 0.5, seed).unwrap();
            let r = convergence_study(&spec, seed, &[256, 1024, 4096], &Discretization::default(), &opts, Some(&exact))
                .unwrap();
            (seed, r.to_oracle.unwrap())
        })
        .collect();
    let good = rows
        .iter()
        .filter(|(_, d)| d.windows(2).all(|w| w[1] < w[0]) && d[2] <= 0.05)
        .count();
    let worst = rows
        .iter()
        .filter(|(_, d)| !(d.windows(2).all(|w| w[1] < w[0]) && d[2] <= 0.05))
        .map(|(s, d)| format!("seed {s}: {:.4} {:.4} {:.4}", d[0], d[1], d[2]))
        .collect::<Vec<_>>();
    Verdict {
        pass: good >= 9,
        detail: format!("{good}/10 seeds decreasing with distance <= 0.05 at M=4096; failing: [{}]", worst.join(", ")),
    }
}

fn jump_correspondence() -> Verdict {
    let disc = Discretization::default();
    let cases = [(1usize, 0.5, 1024usize), (2, 0.4, 8)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (d, p, side) in cases {
        let spec = EnsembleSpec::site_percolation(d, p, 42).unwrap();
        let q = cube_region(d, side).unwrap();
        let edges = (d * q.len()) as f64;
        let r = jumps_match_compact(&spec, 42, &q, &disc, 200.0, 2.0 / edges, CountingMethod::Clusters).unwrap();
        pass &= r.ok;
        detail.push(format!(
            "d={d} C_{side}: {} jumps, {} unmatched jumps, {} unmatched compact energies",
            r.jumps.len(),
            r.unmatched_jumps,
            r.unmatched_compact.len()
        ));
    }
    Verdict {
        pass,
        detail: detail.join("; "),
    }
}

fn magnetic() -> Verdict {
    let params = MagneticParams {
        trials: 50,
        range: (0.0, 200.0),
        ..MagneticParams::default()
    };
    let tree = magnetic_experiments(MagneticKind::TreeGauge, Some(path_graph(3).unwrap()), &params).unwrap();
    let cycle = magnetic_experiments(MagneticKind::CycleFlux, None, &params).unwrap();
    let period = magnetic_experiments(MagneticKind::Periodicity, None, &params).unwrap();
    let counts: Vec<(f64, (usize, usize, usize))> = cycle.fluxes.iter().map(|f| (f.flux, f.count_below_3)).collect();
    let law = counts.len() == 2 && counts[0].1 == (3, 3, 3) && counts[1].1 == (2, 2, 2);
    Verdict {
        pass: tree.ok && tree.max_deviation <= 1e-8 && cycle.ok && law && period.ok,
        detail: format!(
            "tree max deviation {:.1e} over 50 phase draws, square count_below(3) (pencil, law, secular) at flux 0 {:?} and pi {:?}, periodicity deviation {:.1e}",
            tree.max_deviation,
            counts.first().map(|c| c.1),
            counts.get(1).map(|c| c.1),
            period.max_deviation
        ),
    }
}

fn pastur_shubin() -> Verdict {
    let spec = EnsembleSpec::site_percolation(1, 0.5, 0).unwrap();
    let seeds: Vec<u64> = (0..50).collect();
    let pts = grid(0.0, 100.0, 0.25);
    let outer = cube_region(1, 64).unwrap();
    let disc = Discretization::default();
    let at = |offset: i64| {
        let q = cube_region(1, 8).unwrap().translate(&[offset]);
        pastur_shubin_estimate(&spec, &seeds, &q, &outer, &disc, &pts, CountingMethod::Clusters).unwrap()
    };
    let centered = at(28);
    let shifted = at(12);
    let exact = percolation_ids_1d_exact(0.5, &pts, None).unwrap().function;
    let dist = sup_distance_resolved(&centered.function, &exact, DISCRETE_RESOLUTION).unwrap();
    let (mean, se) = placement_difference(&centered, &shifted).unwrap();
    Verdict {
        pass: dist <= 0.05 && mean.abs() <= 2.0 * se,
        detail: format!(
            "sup distance to closed form {dist:.4} (<= 0.05); placements 28 vs 12 differ by {mean:.2e} with standard error {se:.2e}"
        ),
    }
}

fn ergodic() -> Verdict {
    let seed = 11;
    let spec = EnsembleSpec::site_percolation(1, 0.5, seed).unwrap();
    let disc = Discretization::default();
    let pts = grid(0.0, 100.0, 0.25);
    let big = cube_region(1, 100_000).unwrap();
    let q = cube_region(1, 4096).unwrap();
    let reference = spectral_shift_with(&spec, seed, &q, &disc, 100.0, CountingMethod::ClusterAnalytic)
        .unwrap()
        .restrict(0.0, 100.0)
        .unwrap()
        .scaled(1.0 / 4096.0);
    let dists: Vec<f64> = [8usize, 16, 32]
        .iter()
        .map(|&m| {
            let est = ergodic_limit_estimate(&spec, seed, m, &big, &disc, &pts, CountingMethod::ClusterAnalytic).unwrap();
            sup_distance_resolved(&est.function, &reference, DISCRETE_RESOLUTION).unwrap()
        })
        .collect();
    Verdict {
        pass: dists[2] <= 0.2 && dists[0] > dists[1] && dists[1] > dists[2],
        detail: format!(
            "sup distance to xi(C_4096)/4096 at M = 8, 16, 32: {:.4} {:.4} {:.4}",
            dists[0], dists[1], dists[2]
        ),
    }
}

/// Condition assignments on one graph: each catalog condition everywhere
/// with each constant potential, then seeded mixtures.
fn catalog_operators(edges: &[((i64, i64), usize)], index: u64) -> Vec<OperatorData> {
    let g = to_graph(edges);
    let mut out = Vec::new();
    for c in Catalog::UNIFORM {
        for v in [-5.0, 0.0, 10.0] {
            out.push(OperatorData::uniform(g.clone(), StepPotential::constant(v), c.build_fn()).unwrap());
        }
    }
    for t in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(index * 131 + t);
        let conds = (0..g.num_vertices())
            .map(|v| Arc::new(Catalog::pick(rng.gen_range(0..40)).build(g.degree(v))))
            .collect();
        let pots = (0..g.num_edges())
            .map(|_| Arc::new(StepPotential::constant([-5.0, 0.0, 10.0][rng.gen_range(0..3)])))
            .collect();
        out.push(OperatorData::new(g.clone(), pots, conds).unwrap());
    }
    out
}

fn oracle_equivalence(disc: &Discretization) -> (usize, usize, f64) {
    let animals = lattice_animals(4);
    let checks: Vec<(bool, f64)> = animals
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, a)| catalog_operators(a, i as u64))
        .map(|data| {
            let (lo, hi) = (-10.0, 200.0);
            let sec = secular_oracle(&data, lo, hi).unwrap();
            let p = assemble(&data, disc).unwrap();
            let all = eigenvalues(&p, hi).unwrap();
            let lower = all.iter().filter(|&&l| l < lo).count();
            let ev = &all[lower..];
            let mut worst = 0.0f64;
            let mut ok = ev.len() == sec.eigenvalues.len();
            if ok {
                for (a, b) in ev.iter().zip(&sec.eigenvalues) {
                    let r = (a - b).abs() / b.abs().max(1.0);
                    worst = worst.max(r);
                    ok &= r <= 1e-6;
                }
            }
            let pts: Vec<f64> = grid(lo, hi, 0.25)
                .into_iter()
                .filter(|l| sec.eigenvalues.iter().all(|e| (l - e).abs() > 1e-6 * e.abs().max(1.0)))
                .collect();
            let counts = count_grid(&p, &pts).unwrap();
            ok &= pts.iter().zip(&counts).all(|(&l, &c)| c == lower + sec.count_below(l));
            (ok, worst)
        })
        .collect();
    let passed = checks.iter().filter(|c| c.0).count();
    (passed, checks.len(), checks.iter().map(|c| c.1).fold(0.0, f64::max))
}

fn mesh_monotonicity() -> (usize, usize) {
    let animals = lattice_animals(3);
    let checks: Vec<bool> = animals
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, a)| catalog_operators(a, 1000 + i as u64))
        .map(|data| {
            let mut prev: Option<Vec<f64>> = None;
            let mut ok = true;
            for n in [4, 8, 16, 32] {
                let ev = eigenvalues(&assemble(&data, &Discretization::new(n, 2).unwrap()).unwrap(), 150.0).unwrap();
                if let Some(pv) = &prev {
                    // nested spaces: each eigenvalue can only go down, and more fall below 150
                    ok &= ev.len() >= pv.len();
                    ok &= pv.iter().zip(&ev).all(|(c, f)| *f <= c + 1e-9 * c.abs().max(1.0));
                }
                prev = Some(ev);
            }
            ok
        })
        .collect();
    (checks.iter().filter(|&&c| c).count(), checks.len())
}

fn cluster_conservation(disc: &Discretization) -> (usize, usize) {
    let checks: Vec<bool> = (0..40u64)
        .into_par_iter()
        .map(|seed| {
            let (d, side, p) = if seed % 2 == 0 { (1, 32, 0.5) } else { (2, 4, 0.45) };
            let spec = EnsembleSpec::site_percolation(d, p, seed).unwrap();
            let data = qgids_core::ids::approx::finite_volume_operator(&spec, seed, &cube_region(d, side).unwrap()).unwrap();
            let whole = eigenvalues(&assemble(&data, disc).unwrap(), 120.0).unwrap();
            let mut parts: Vec<f64> = cluster_decompose(&data)
                .unwrap()
                .iter()
                .flat_map(|c| eigenvalues(&assemble(c, disc).unwrap(), 120.0).unwrap())
                .collect();
            parts.sort_by(f64::total_cmp);
            // compare away from the window edge, where one side may round across
            let inside = |v: &[f64]| v.iter().copied().filter(|&l| l < 119.0).collect::<Vec<_>>();
            let (w, q) = (inside(&whole), inside(&parts));
            w.len() == q.len() && w.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-7 * a.abs().max(1.0))
        })
        .collect();
    (checks.iter().filter(|&&c| c).count(), checks.len())
}

fn twist_identities() -> (usize, usize) {
    let checks: Vec<bool> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let deg = rng.gen_range(1..=6);
            let c = random_condition(seed, deg);
            let phases = |rng: &mut ChaCha8Rng| (0..deg).map(|_| rng.gen_range(-PI..PI)).collect::<Vec<_>>();
            let u1 = PhaseTwist::from_phases(&phases(&mut rng));
            let u2 = PhaseTwist::from_phases(&phases(&mut rng));
            let composed = subspace_equal(
                &twist(&c, &u1.compose(&u2)).unwrap(),
                &twist(&twist(&c, &u2).unwrap(), &u1).unwrap(),
            );
            let identity = subspace_equal(&twist(&c, &PhaseTwist::identity(deg)).unwrap(), &c);
            let inverse = subspace_equal(&twist(&twist(&c, &u1).unwrap(), &u1.adjoint()).unwrap(), &c);
            let fixed = [Catalog::Dirichlet, Catalog::Neumann]
                .iter()
                .all(|k| subspace_equal(&twist(&k.build(deg), &u1).unwrap(), &k.build(deg)));
            composed && identity && inverse && fixed
        })
        .collect();
    (checks.iter().filter(|&&c| c).count(), checks.len())
}

fn property_suites() -> Verdict {
    let disc = Discretization::new(64, 3).unwrap();
    let (oe, on, worst) = oracle_equivalence(&disc);
    let (mm, mn) = mesh_monotonicity();
    let (cc, cn) = cluster_conservation(&disc);
    let (tw, tn) = twist_identities();
    Verdict {
        pass: oe == on && mm == mn && cc == cn && tw == tn,
        detail: format!(
            "oracle equivalence {oe}/{on} (max rel {worst:.1e}), mesh monotonicity {mm}/{mn}, cluster conservation {cc}/{cn}, twist identities {tw}/{tn}"
        ),
    }
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Verdict)> = vec![
        ("1 interval oracle", Duration::from_secs(5), interval_oracle),
        ("2 spectral shift bounds", Duration::from_secs(120), ssf_bounds),
        ("3 percolation IDS convergence", Duration::from_secs(120), percolation_convergence),
        ("4 jump correspondence", Duration::from_secs(300), jump_correspondence),
        ("5 magnetic", Duration::from_secs(60), magnetic),
        ("6 Pastur-Shubin estimate", Duration::from_secs(600), pastur_shubin),
        ("7 ergodic formula", Duration::from_secs(600), ergodic),
        ("8 property suites", Duration::from_secs(600), property_suites),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let v = timed(limit, f);
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += (!v.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
