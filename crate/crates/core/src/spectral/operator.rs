use std::collections::HashSet;
use std::sync::Arc;

use crate::conditions::{make_dirichlet, subspace_equal, twist, validate, PhaseTwist, VertexCondition};
use crate::error::{Error, Result};
use crate::lattice::{EndRole, MetricSubgraph};
use crate::spectral::potential::StepPotential;

/// A Schrödinger operator `-f'' + V f` on a finite metric subgraph with
/// vertex conditions, optionally carrying a constant vector potential per
/// edge (given by its end phase `φ_e(1)`).
#[derive(Clone, Debug)]
pub struct OperatorData {
    graph: Arc<MetricSubgraph>,
    potentials: Vec<Arc<StepPotential>>,
    conditions: Vec<Arc<VertexCondition>>,
    phases: Option<Vec<f64>>,
    artificial: Option<Arc<Vec<Vec<bool>>>>,
}

impl OperatorData {
    /// Potentials are edge-aligned, conditions vertex-aligned with
    /// [`MetricSubgraph::vertices`].
    pub fn new(
        graph: Arc<MetricSubgraph>,
        potentials: Vec<Arc<StepPotential>>,
        conditions: Vec<Arc<VertexCondition>>,
    ) -> Result<Self> {
        if potentials.len() != graph.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} potentials for {} edges",
                potentials.len(),
                graph.num_edges()
            )));
        }
        if conditions.len() != graph.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} conditions for {} vertices",
                conditions.len(),
                graph.num_vertices()
            )));
        }
        let mut checked: HashSet<*const VertexCondition> = HashSet::new();
        for (v, c) in conditions.iter().enumerate() {
            if c.degree() != graph.degree(v) {
                return Err(Error::DimensionMismatch(format!(
                    "condition of degree {} at a vertex of degree {}",
                    c.degree(),
                    graph.degree(v)
                )));
            }
            if checked.insert(Arc::as_ptr(c)) {
                let val = validate(c);
                if !val.is_valid() {
                    return Err(Error::InvalidCondition(val.to_string()));
                }
            }
        }
        Ok(Self {
            graph,
            potentials,
            conditions,
            phases: None,
            artificial: None,
        })
    }

    /// Same condition kind everywhere, built per vertex degree.
    pub fn uniform(
        graph: Arc<MetricSubgraph>,
        potential: StepPotential,
        condition: impl Fn(usize) -> VertexCondition,
    ) -> Result<Self> {
        let p = Arc::new(potential);
        let potentials = vec![p; graph.num_edges()];
        let mut cache: Vec<Option<Arc<VertexCondition>>> = Vec::new();
        let mut conditions = Vec::with_capacity(graph.num_vertices());
        for v in 0..graph.num_vertices() {
            let d = graph.degree(v);
            if cache.len() <= d {
                cache.resize(d + 1, None);
            }
            let c = cache[d].get_or_insert_with(|| Arc::new(condition(d))).clone();
            conditions.push(c);
        }
        Self::new(graph, potentials, conditions)
    }

    /// Attach end phases `φ_e(1)` (edge-aligned).
    pub fn with_phases(mut self, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != self.graph.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} phases for {} edges",
                phases.len(),
                self.graph.num_edges()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("phases must be finite".into()));
        }
        self.phases = Some(phases);
        Ok(self)
    }

    /// Mark which vertex ends carry a condition imposed by the truncation
    /// rather than by the infinite-volume operator (vertex-aligned, one flag
    /// per incidence slot).
    pub fn with_artificial_ends(mut self, flags: Vec<Vec<bool>>) -> Result<Self> {
        if flags.len() != self.graph.num_vertices()
            || flags.iter().enumerate().any(|(v, f)| f.len() != self.graph.degree(v))
        {
            return Err(Error::DimensionMismatch("artificial end flags".into()));
        }
        self.artificial = Some(Arc::new(flags));
        Ok(self)
    }

    /// Without explicit flags every end at a boundary vertex is artificial.
    pub fn is_artificial_end(&self, v: usize, slot: usize) -> bool {
        match &self.artificial {
            Some(f) => f[v][slot],
            None => !self.graph.is_inner_vertex(v),
        }
    }

    pub fn without_phases(mut self) -> Self {
        self.phases = None;
        self
    }

    pub fn with_potentials(mut self, potentials: Vec<Arc<StepPotential>>) -> Result<Self> {
        if potentials.len() != self.graph.num_edges() {
            return Err(Error::DimensionMismatch("potential count".into()));
        }
        self.potentials = potentials;
        Ok(self)
    }

    pub fn graph(&self) -> &MetricSubgraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<MetricSubgraph> {
        &self.graph
    }

    pub fn potentials(&self) -> &[Arc<StepPotential>] {
        &self.potentials
    }

    pub fn potential(&self, e: usize) -> &StepPotential {
        &self.potentials[e]
    }

    pub fn conditions(&self) -> &[Arc<VertexCondition>] {
        &self.conditions
    }

    pub fn condition(&self, v: usize) -> &VertexCondition {
        &self.conditions[v]
    }

    pub fn phases(&self) -> Option<&[f64]> {
        self.phases.as_deref()
    }

    /// Largest `|V|` over all edges.
    pub fn potential_sup_norm(&self) -> f64 {
        self.potentials.iter().map(|p| p.sup_norm()).fold(0.0, f64::max)
    }

    pub fn min_potential(&self) -> f64 {
        self.potentials
            .iter()
            .map(|p| p.min_value())
            .fold(f64::INFINITY, f64::min)
    }

    /// End twist at vertex `v`: `1` at start roles, `e^{i φ_e(1)}` at end roles.
    pub fn twist_at(&self, v: usize) -> Option<PhaseTwist> {
        let phases = self.phases.as_ref()?;
        let ph: Vec<f64> = self
            .graph
            .incidence(v)
            .iter()
            .map(|inc| match inc.role {
                EndRole::Start => 0.0,
                EndRole::End => phases[inc.edge],
            })
            .collect();
        Some(PhaseTwist::from_phases(&ph))
    }

    /// Conditions after applying the end twists (the untwisted conditions
    /// when no phases are attached).
    pub fn effective_conditions(&self) -> Vec<Arc<VertexCondition>> {
        match &self.phases {
            None => self.conditions.clone(),
            Some(_) => (0..self.graph.num_vertices())
                .map(|v| {
                    let u = self.twist_at(v).expect("phases present");
                    Arc::new(twist(&self.conditions[v], &u).expect("twist sized by degree"))
                })
                .collect(),
        }
    }

    /// Whether every boundary vertex of the subgraph carries Dirichlet.
    pub fn dirichlet_on_boundary(&self) -> bool {
        (0..self.graph.num_vertices())
            .filter(|&v| !self.graph.is_inner_vertex(v))
            .all(|v| subspace_equal(&self.conditions[v], &make_dirichlet(self.graph.degree(v))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{make_kirchhoff, make_neumann};
    use crate::lattice::{cube_region, induced_subgraph};

    #[test]
    fn validation_of_inputs() {
        let g = Arc::new(induced_subgraph(&cube_region(1, 3).unwrap()));
        let ok = OperatorData::uniform(g.clone(), StepPotential::zero(), make_kirchhoff).unwrap();
        assert!(!ok.dirichlet_on_boundary());
        let d = OperatorData::uniform(g.clone(), StepPotential::zero(), make_dirichlet).unwrap();
        assert!(d.dirichlet_on_boundary());
        let bad = vec![Arc::new(make_neumann(3)); g.num_vertices()];
        let pots = vec![Arc::new(StepPotential::zero()); 3];
        assert!(matches!(
            OperatorData::new(g.clone(), pots.clone(), bad),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(OperatorData::new(g.clone(), pots[..2].to_vec(), ok.conditions().to_vec()).is_err());
        assert!(ok.clone().with_phases(vec![0.0; 2]).is_err());
        let tw = ok.with_phases(vec![0.3, 0.0, 1.0]).unwrap();
        let eff = tw.effective_conditions();
        // vertex 1 sees edge 0 at its end role with phase 0.3
        assert!(!subspace_equal(&eff[1], &make_kirchhoff(2)));
        assert!(subspace_equal(&eff[2], &make_kirchhoff(2)));
    }
}
