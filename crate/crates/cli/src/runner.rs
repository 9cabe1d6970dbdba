//! Executes a parsed configuration and renders its output files in memory.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qgids_core::conditions::VertexCondition;
use qgids_core::ids::{
    convergence_study, ergodic_limit_estimate, jump_list, magnetic_experiments, normalized_counting_with,
    pastur_shubin_estimate, percolation_ids_1d_exact, spectral_shift_with, ssf_bound_suite, MagneticParams,
    StudyOptions,
};
use qgids_core::lattice::{cube_region, induced_subgraph, Region};
use qgids_core::random::{EnsembleConfig, EnsembleSpec};
use qgids_core::spectral::counting::count_grid;
use qgids_core::ids::approx::DISCRETE_RESOLUTION;
use qgids_core::spectral::step::sup_distance_resolved;
use qgids_core::spectral::{assemble, eigenvalues, Discretization, OperatorData, StepFunction, StepPotential};
use qgids_core::Error as CoreError;

use crate::config::{parse, Experiment, ExperimentConfig, GraphConfig, GridConfig};
use crate::error::CliError;

/// A rendered output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

pub fn config_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// `lambda,value` rows, preceded by a comment line carrying the digest.
pub fn render_csv(digest: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut s = format!("# config_sha256={digest}\nlambda,value\n");
    for (x, y) in xs.iter().zip(ys) {
        s.push_str(&format!("{x},{y}\n"));
    }
    s
}

struct Outcome {
    report: Value,
    csv: Vec<(String, Vec<f64>, Vec<f64>)>,
}

fn to_value<T: Serialize>(t: &T) -> Result<Value, CliError> {
    serde_json::to_value(t).map_err(|e| CliError::Solver(format!("report serialization: {e}")))
}

fn ensemble(cfg: &EnsembleConfig, d: usize, seed: u64) -> Result<EnsembleSpec, CliError> {
    Ok(cfg.build(d, seed)?)
}

fn cube(d: usize, side: usize) -> Result<Region, CliError> {
    if side == 0 {
        return Err(CliError::Validation("cube side must be positive".into()));
    }
    Ok(cube_region(d, side)?)
}

fn grid_range(pts: &[f64]) -> (f64, f64) {
    (pts[0], pts[pts.len() - 1])
}

fn site_oracle(cfg: &EnsembleConfig, d: usize, lo: f64, hi: f64) -> Result<Option<StepFunction>, CliError> {
    match cfg {
        EnsembleConfig::Site { p } if d == 1 && *p < 1.0 => {
            Ok(Some(percolation_ids_1d_exact(*p, &[lo, hi], None)?.function))
        }
        _ => Ok(None),
    }
}

fn solve(graph: &GraphConfig, grid: &GridConfig, disc: &Discretization) -> Result<Outcome, CliError> {
    let region = match (&graph.sites, graph.cube) {
        (Some(sites), _) => Region::from_coords(sites)?,
        (None, Some(side)) => cube(graph.d, side)?,
        (None, None) => return Err(CliError::Validation("graph needs \"sites\" or \"cube\"".into())),
    };
    if region.dim() != graph.d {
        return Err(CliError::Validation(format!("sites are not {}-dimensional", graph.d)));
    }
    let g = Arc::new(induced_subgraph(&region));
    let potential = StepPotential::try_from(graph.potential.clone())?;
    let conditions = (0..g.num_vertices())
        .map(|v| {
            let spec = if g.is_inner_vertex(v) { &graph.condition } else { &graph.boundary_condition };
            spec.build(g.degree(v)).map(Arc::new)
        })
        .collect::<Result<Vec<Arc<VertexCondition>>, CoreError>>()?;
    let mut data = OperatorData::new(g.clone(), vec![Arc::new(potential); g.num_edges()], conditions)?;
    if let Some(ph) = &graph.phases {
        data = data.with_phases(ph.clone())?;
    }
    let pts = grid.points()?;
    let pencil = assemble(&data, disc)?;
    let counts: Vec<f64> = count_grid(&pencil, &pts)?.into_iter().map(|c| c as f64).collect();
    let ev = eigenvalues(&pencil, grid_range(&pts).1)?;
    Ok(Outcome {
        report: json!({
            "edges": g.num_edges(),
            "vertices": g.num_vertices(),
            "pencil_dimension": pencil.dim(),
            "eigenvalues": ev,
        }),
        csv: vec![(String::new(), pts, counts)],
    })
}

fn execute(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let disc = &config.discretization;
    match &config.experiment {
        Experiment::Solve { graph, lambda } => solve(graph, lambda, disc),
        Experiment::Ids {
            d,
            ensemble: e,
            side,
            seed,
            lambda,
            method,
        } => {
            let spec = ensemble(e, *d, *seed)?;
            let pts = lambda.points()?;
            let q = cube(*d, *side)?;
            let n = normalized_counting_with(&spec, *seed, &q, disc, grid_range(&pts).1, *method)?;
            let values = n.function().sample(&pts);
            let jumps = jump_list(&n, 2.0 / n.num_edges())?;
            Ok(Outcome {
                report: json!({ "approximant": to_value(&n)?, "large_jumps": jumps }),
                csv: vec![(String::new(), pts, values)],
            })
        }
        Experiment::Converge {
            d,
            ensemble: e,
            sides,
            seed,
            range,
            method,
            oracle,
        } => {
            let spec = ensemble(e, *d, *seed)?;
            let auto = site_oracle(e, *d, range[0], range[1])?;
            let oracle_fn = match oracle {
                Some(false) => None,
                Some(true) if auto.is_none() => {
                    return Err(CliError::Validation(
                        "a closed-form oracle exists only for one-dimensional site percolation".into(),
                    ))
                }
                _ => auto,
            };
            let opts = StudyOptions {
                range: (range[0], range[1]),
                method: *method,
                ..StudyOptions::default()
            };
            let r = convergence_study(&spec, *seed, sides, disc, &opts, oracle_fn.as_ref())?;
            Ok(Outcome {
                report: to_value(&r)?,
                csv: Vec::new(),
            })
        }
        Experiment::Percolation { p, lambda, truncation } => {
            let pts = lambda.points()?;
            let n = percolation_ids_1d_exact(*p, &pts, *truncation)?;
            Ok(Outcome {
                report: json!({ "p": n.p, "truncation": n.truncation, "tail_bound": n.tail_bound }),
                csv: vec![(String::new(), n.grid, n.values)],
            })
        }
        Experiment::SsfCheck {
            d,
            side,
            trials,
            seed,
            lambda,
        } => {
            let g = Arc::new(induced_subgraph(&cube(*d, *side)?));
            let r = ssf_bound_suite(g, *trials, &lambda.points()?, *seed, disc)?;
            Ok(Outcome {
                report: to_value(&r)?,
                csv: Vec::new(),
            })
        }
        Experiment::Ergodic {
            d,
            ensemble: e,
            sides,
            big_side,
            seed,
            lambda,
            reference_side,
            method,
        } => {
            if sides.is_empty() {
                return Err(CliError::Validation("ergodic needs at least one window side".into()));
            }
            let spec = ensemble(e, *d, *seed)?;
            let pts = lambda.points()?;
            let (lo, hi) = grid_range(&pts);
            let big = cube(*d, *big_side)?;
            let reference = reference_side
                .map(|m| -> Result<StepFunction, CliError> {
                    let q = cube(*d, m)?;
                    let xi = spectral_shift_with(&spec, *seed, &q, disc, hi, *method)?;
                    Ok(xi.restrict(lo, hi)?.scaled(1.0 / (*d * q.len()) as f64))
                })
                .transpose()?;
            let mut estimates = Vec::new();
            let mut csv = Vec::new();
            for &m in sides {
                let est = ergodic_limit_estimate(&spec, *seed, m, &big, disc, &pts, *method)?;
                let distance = reference.as_ref().map(|r| sup_distance_resolved(&est.function, r, DISCRETE_RESOLUTION)).transpose()?;
                csv.push((format!("_M{m}"), pts.clone(), est.values.clone()));
                estimates.push(json!({ "estimate": to_value(&est)?, "distance_to_reference": distance }));
            }
            Ok(Outcome {
                report: json!({ "estimates": estimates, "reference_side": reference_side }),
                csv,
            })
        }
        Experiment::Magnetic {
            experiment,
            trials,
            seed,
            fluxes,
            lambda,
        } => {
            let (range, step) = match lambda {
                GridConfig::Range { min, max, step } => ((*min, *max), *step),
                GridConfig::Points { .. } => {
                    return Err(CliError::Validation("magnetic experiments need a uniform grid".into()))
                }
            };
            lambda.points()?;
            let params = MagneticParams {
                trials: *trials,
                seed: *seed,
                fluxes: fluxes.clone(),
                range,
                grid_step: step,
                discretization: *disc,
            };
            let r = magnetic_experiments(*experiment, None, &params)?;
            Ok(Outcome {
                report: to_value(&r)?,
                csv: Vec::new(),
            })
        }
        Experiment::PasturShubin {
            d,
            ensemble: e,
            inner_side,
            outer_side,
            inner_offset,
            seeds,
            lambda,
            method,
        } => {
            let spec = ensemble(e, *d, seeds.first().copied().unwrap_or(0))?;
            let pts = lambda.points()?;
            let offset = match inner_offset {
                Some(o) if o.len() == *d => o.clone(),
                Some(_) => return Err(CliError::Validation("inner_offset has the wrong dimension".into())),
                None => vec![(*outer_side as i64 - *inner_side as i64) / 2; *d],
            };
            let q = cube(*d, *inner_side)?.translate(&offset);
            let qp = cube(*d, *outer_side)?;
            let est = pastur_shubin_estimate(&spec, seeds, &q, &qp, disc, &pts, *method)?;
            let (lo, hi) = grid_range(&pts);
            let oracle = site_oracle(e, *d, lo, hi)?
                .map(|o| sup_distance_resolved(&est.function, &o, DISCRETE_RESOLUTION))
                .transpose()?;
            Ok(Outcome {
                report: json!({
                    "grid": est.grid,
                    "mean": est.mean,
                    "standard_error": est.standard_error,
                    "seeds": seeds,
                    "distance_to_closed_form": oracle,
                }),
                csv: vec![(String::new(), est.grid.clone(), est.mean.clone())],
            })
        }
    }
}

/// Parses, validates and runs a config; nothing is written here.
pub fn run_config(text: &str) -> Result<Vec<Output>, CliError> {
    let config = parse(text)?;
    let digest = config_digest(text);
    let start = Instant::now();
    let outcome = execute(&config)?;
    let stem = config.output.clone().unwrap_or_else(|| config.experiment.kind().to_string());
    let envelope = json!({
        "qgids_version": env!("CARGO_PKG_VERSION"),
        "config_sha256": digest,
        "kind": config.experiment.kind(),
        "report": outcome.report,
        "runtime_ms": start.elapsed().as_millis() as u64,
    });
    let mut json_text = serde_json::to_string_pretty(&envelope).map_err(|e| CliError::Solver(e.to_string()))?;
    json_text.push('\n');
    let mut out = vec![Output {
        name: format!("{stem}.json"),
        contents: json_text,
    }];
    for (suffix, xs, ys) in outcome.csv {
        out.push(Output {
            name: format!("{stem}{suffix}.csv"),
            contents: render_csv(&digest, &xs, &ys),
        });
    }
    Ok(out)
}

/// Config schema and the claim checked by each experiment.
pub fn describe(kind: &str) -> Option<&'static str> {
    Some(match kind {
        "solve" => {
            "solve: eigenvalue counts of one operator on the anchored graph of a site set.\n\
             fields: graph {d, cube | sites, condition, boundary_condition, potential, phases}, \
             lambda {min, max, step} | {points}\n\
             outputs: CSV of count_below on the grid, JSON with the eigenvalues up to the largest grid point.\n\
             checks: a single Dirichlet edge counts floor(sqrt(lambda)/pi)."
        }
        "ids" => {
            "ids: normalized counting function N of one seed on a cube C_side.\n\
             fields: d, ensemble, side, seed, lambda, method (direct | clusters | cluster_analytic)\n\
             outputs: CSV of N on the grid, JSON with the jump list and provenance."
        }
        "converge" => {
            "converge: sup-distances of N over growing cubes, and to the closed form for d=1 site percolation.\n\
             fields: d, ensemble, sides (increasing), seed, range [lo, hi], method, oracle\n\
             checks: uniform convergence of the finite-volume IDS."
        }
        "percolation" => {
            "percolation: closed-form IDS of d=1 site percolation, (1-p)^2 sum_k p^k floor((k+1) sqrt(lambda)/pi).\n\
             fields: p in [0, 1), lambda, truncation\n\
             outputs: CSV of N on the grid, JSON with the truncation and its tail bound."
        }
        "ssf-check" => {
            "ssf-check: randomized spectral shift bounds on the anchored graph of C_side.\n\
             fields: d, side, trials, seed, lambda\n\
             checks: condition changes shift counts by at most 2|E|; |n - |E| n_D| <= 2|E|; \
             potential changes shift counts by at most |E|(5 + sqrt|W1|/pi + sqrt|W2|/pi)."
        }
        "ergodic" => {
            "ergodic: frequency-weighted pattern shifts sum_P nu_P xi(P)/(d M^d) over windows of a large cube.\n\
             fields: d, ensemble, sides (window sides M), big_side, seed, lambda, reference_side, method\n\
             checks: agreement with xi(C_L)/(d L^d) for a large reference cube, improving with M."
        }
        "magnetic" => {
            "magnetic: phases gauged away on trees, flux dependence on the unit square and 2 pi periodicity.\n\
             fields: experiment (tree_gauge | cycle_flux | periodicity), trials, seed, fluxes, lambda {min, max, step}\n\
             checks: identical counts on trees; square cycle eigenvalues ((2 pi k + flux)/4)^2."
        }
        "pastur-shubin" => {
            "pastur-shubin: seed average of the eigenfunction mass of a large cube on an inner cube, per edge.\n\
             fields: d, ensemble, inner_side, outer_side, inner_offset, seeds, lambda, method\n\
             checks: agreement with the IDS and independence of the inner cube's position."
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = render_csv("ab", &[0.0, 0.5], &[1.0, 2.0]);
        assert_eq!(s, "# config_sha256=ab\nlambda,value\n0,1\n0.5,2\n");
    }

    #[test]
    fn every_kind_is_described() {
        for k in ["solve", "ids", "converge", "percolation", "ssf-check", "ergodic", "magnetic", "pastur-shubin"] {
            assert!(describe(k).is_some_and(|t| !t.is_empty()));
        }
        assert!(describe("nope").is_none());
    }
}
