//! Splitting an operator into the independent pieces left after vertex
//! conditions that decouple edge-ends, and the compactly supported
//! eigenfunctions those pieces carry.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::conditions::{
    from_form_triple, make_dirichlet, make_kirchhoff, subspace_equal, to_form_triple, FormTriple,
    VertexCondition,
};
use crate::error::Result;
use crate::lattice::{EdgeId, MetricSubgraph};
use crate::linalg::CMatrix;
use crate::spectral::eigen::eigenvalues;
use crate::spectral::fem::{assemble, Discretization};
use crate::spectral::operator::OperatorData;

const COUPLING_TOL: f64 = 1e-10;

/// One piece of a decomposition.
#[derive(Clone, Debug)]
pub struct Component {
    pub data: OperatorData,
    /// Indices of the component's edges in the decomposed operator.
    pub edges: Vec<usize>,
    /// Whether the piece touches an artificial end, so that its
    /// eigenfunctions need not be eigenfunctions of the infinite operator.
    pub artificial: bool,
    /// Equal keys mean translated copies of the same operator.
    pub key: ClassKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassKey {
    edges: Vec<(Vec<i64>, usize)>,
    potentials: Vec<Vec<u64>>,
    conditions: Vec<Vec<i64>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn coupled(t: &FormTriple, i: usize, j: usize) -> bool {
    let scale = t.lam.iter().map(|z| z.norm()).fold(1.0, f64::max);
    t.p_w()[(i, j)].norm() > COUPLING_TOL
        || t.p_r[(i, j)].norm() > COUPLING_TOL
        || t.lam[(i, j)].norm() > COUPLING_TOL * scale
}

fn sub(m: &CMatrix, s: &[usize]) -> CMatrix {
    CMatrix::from_fn(s.len(), s.len(), |i, j| m[(s[i], s[j])])
}

fn quantize(c: &VertexCondition) -> Vec<i64> {
    c.a()
        .iter()
        .chain(c.b().iter())
        .flat_map(|z| [z.re, z.im])
        .map(|x| (x * 1e9).round() as i64)
        .collect()
}

/// Split into components, keeping the component bookkeeping.
pub fn decompose(data: &OperatorData) -> Result<Vec<Component>> {
    let g = data.graph();
    let conds = data.effective_conditions();
    let mut triples: HashMap<*const VertexCondition, Arc<FormTriple>> = HashMap::new();
    let mut uf = UnionFind::new(2 * g.num_edges());
    for e in 0..g.num_edges() {
        uf.union(2 * e, 2 * e + 1);
    }
    let node = |inc: &crate::lattice::Incidence| {
        2 * inc.edge + usize::from(inc.role == crate::lattice::EndRole::End)
    };
    let mut vertex_triples = Vec::with_capacity(g.num_vertices());
    for v in 0..g.num_vertices() {
        let c = &conds[v];
        let t = match triples.get(&Arc::as_ptr(c)) {
            Some(t) => t.clone(),
            None => {
                let t = Arc::new(to_form_triple(c)?);
                triples.insert(Arc::as_ptr(c), t.clone());
                t
            }
        };
        let inc = g.incidence(v);
        for i in 0..inc.len() {
            for j in i + 1..inc.len() {
                if coupled(&t, i, j) {
                    uf.union(node(&inc[i]), node(&inc[j]));
                }
            }
        }
        vertex_triples.push(t);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of: HashMap<usize, usize> = HashMap::new();
    for e in 0..g.num_edges() {
        let r = uf.find(2 * e);
        let gi = *group_of.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[gi].push(e);
    }
    let whole = groups.len() == 1 && data.phases().is_none();
    let mut restricted: HashMap<(*const VertexCondition, Vec<usize>), Arc<VertexCondition>> = HashMap::new();
    let mut out = Vec::with_capacity(groups.len());
    for mut edges in groups {
        if !whole {
            edges.sort_by(|&a, &b| g.edges()[a].cmp(&g.edges()[b]));
        }
        let ids: Vec<EdgeId> = edges.iter().map(|&e| g.edges()[e].clone()).collect();
        let cg = if whole {
            data.graph_arc().clone()
        } else {
            Arc::new(MetricSubgraph::from_edges(g.dim(), ids.iter().cloned())?)
        };
        let mut cconds = Vec::with_capacity(cg.num_vertices());
        let mut flags = Vec::with_capacity(cg.num_vertices());
        for (cv, site) in cg.vertices().iter().enumerate() {
            let v = g.vertex_index(site).expect("component vertex in graph");
            let slots: Vec<usize> = cg
                .incidence(cv)
                .iter()
                .map(|ci| {
                    let orig = g.edge_index(&cg.edges()[ci.edge]).expect("component edge in graph");
                    g.incidence(v)
                        .iter()
                        .position(|i| i.edge == orig && i.role == ci.role)
                        .expect("incidence present")
                })
                .collect();
            flags.push(slots.iter().map(|&s| data.is_artificial_end(v, s)).collect::<Vec<bool>>());
            let c = &conds[v];
            if slots.len() == g.degree(v) && slots.iter().enumerate().all(|(i, &s)| i == s) {
                cconds.push(c.clone());
                continue;
            }
            let key = (Arc::as_ptr(c), slots.clone());
            let rc = match restricted.get(&key) {
                Some(rc) => rc.clone(),
                None => {
                    let t = &vertex_triples[v];
                    let rt = FormTriple::from_parts(
                        sub(&t.p_d, &slots),
                        sub(&t.p_n, &slots),
                        sub(&t.p_r, &slots),
                        sub(&t.lam, &slots),
                    )?;
                    let rc = Arc::new(from_form_triple(&rt));
                    restricted.insert(key, rc.clone());
                    rc
                }
            };
            cconds.push(rc);
        }
        let artificial = flags.iter().flatten().any(|&f| f);
        let potentials: Vec<_> = edges.iter().map(|&e| data.potentials()[e].clone()).collect();
        let cdata = OperatorData::new(cg.clone(), potentials, cconds)?.with_artificial_ends(flags)?;
        let key = class_key(&cdata);
        out.push(Component {
            data: cdata,
            edges,
            artificial,
            key,
        });
    }
    Ok(out)
}

fn class_key(data: &OperatorData) -> ClassKey {
    let g = data.graph();
    let d = g.dim();
    let mut lo = vec![i64::MAX; d];
    for e in g.edges() {
        for (l, &c) in lo.iter_mut().zip(e.anchor.coords()) {
            *l = (*l).min(c);
        }
    }
    let shift: Vec<i64> = lo.iter().map(|x| -x).collect();
    ClassKey {
        edges: g
            .edges()
            .iter()
            .map(|e| (e.translate(&shift).anchor.coords().to_vec(), e.direction))
            .collect(),
        potentials: data.potentials().iter().map(|p| p.key()).collect(),
        conditions: data.conditions().iter().map(|c| quantize(c)).collect(),
    }
}

/// Independent pieces whose spectra, with multiplicity, make up the
/// spectrum of `data`. Phases are absorbed into the pieces' conditions.
pub fn cluster_decompose(data: &OperatorData) -> Result<Vec<OperatorData>> {
    Ok(decompose(data)?.into_iter().map(|c| c.data).collect())
}

/// Number of edges when `data` is a potential-free path with Kirchhoff
/// interior vertices and Dirichlet ends, whose eigenvalues are `(jπ/L)²`.
pub fn dirichlet_path_length(data: &OperatorData) -> Option<usize> {
    let g = data.graph();
    if data.phases().is_some()
        || g.num_vertices() != g.num_edges() + 1
        || !data.potentials().iter().all(|p| p.is_zero())
    {
        return None;
    }
    let k2 = make_kirchhoff(2);
    let d1 = make_dirichlet(1);
    let mut ends = 0;
    for v in 0..g.num_vertices() {
        let ok = match g.degree(v) {
            1 => {
                ends += 1;
                subspace_equal(data.condition(v), &d1)
            }
            2 => subspace_equal(data.condition(v), &k2),
            _ => false,
        };
        if !ok {
            return None;
        }
    }
    // a connected graph with |V| = |E| + 1 and degrees <= 2 is a path
    (ends == 2).then_some(g.num_edges())
}

/// Eigenvalues `<= lambda_max` of one piece: exact for Dirichlet paths when
/// `analytic` is set, otherwise from the discretized pencil.
pub fn component_eigenvalues(
    data: &OperatorData,
    disc: &Discretization,
    lambda_max: f64,
    analytic: bool,
) -> Result<Vec<f64>> {
    if analytic {
        if let Some(len) = dirichlet_path_length(data) {
            return Ok(crate::spectral::reference::dirichlet_interval_eigenvalues(len as f64, lambda_max));
        }
    }
    let p = assemble(data, disc)?;
    eigenvalues(&p, lambda_max)
}

/// Energies `<= lambda_max` of eigenfunctions supported on pieces that do
/// not touch an artificial end, with their total multiplicity across pieces.
/// Energies within `1e-9·(1 + |λ|)` are reported once.
pub fn compact_eigenfunctions(
    data: &OperatorData,
    disc: &Discretization,
    lambda_max: f64,
) -> Result<Vec<(f64, usize)>> {
    compact_eigenfunctions_with(data, disc, lambda_max, false)
}

pub fn compact_eigenfunctions_with(
    data: &OperatorData,
    disc: &Discretization,
    lambda_max: f64,
    analytic: bool,
) -> Result<Vec<(f64, usize)>> {
    let comps = decompose(data)?;
    let mut classes: HashMap<&ClassKey, (usize, &OperatorData)> = HashMap::new();
    for c in comps.iter().filter(|c| !c.artificial) {
        classes.entry(&c.key).or_insert((0, &c.data)).0 += 1;
    }
    let mut energies: Vec<(f64, usize)> = Vec::new();
    for (count, d) in classes.values() {
        for l in component_eigenvalues(d, disc, lambda_max, analytic)? {
            energies.push((l, *count));
        }
    }
    energies.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, usize)> = Vec::new();
    for (l, m) in energies {
        match out.last_mut() {
            Some(last) if (l - last.0).abs() <= 1e-9 * (1.0 + l.abs()) => last.1 += m,
            _ => out.push((l, m)),
        }
    }
    Ok(out)
}

/// `(jπ/L)²` as the exact energies for a Dirichlet path of `L` edges.
pub fn path_energy(j: u64, len: usize) -> f64 {
    (j as f64 * PI / len as f64).powi(2)
}
