//! Conforming Galerkin discretization of the graph quadratic form with
//! hierarchical Lobatto elements.
//!
//! Each edge carries `n` elements of order `p`; the end values are not free
//! but expressed through the vertex unknowns in the eigenbasis of the
//! vertex coupling, so the value constraints are eliminated exactly.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::conditions::{to_form_triple, VertexCondition};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::sparse::{BandOrdering, CsrMatrix};
use crate::spectral::operator::OperatorData;
use crate::spectral::potential::StepPotential;

const MAX_ORDER: usize = 10;

/// Mesh size and element order used on every edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Discretization {
    pub elements_per_edge: usize,
    pub order: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            elements_per_edge: 64,
            order: 2,
        }
    }
}

impl Discretization {
    pub fn new(elements_per_edge: usize, order: usize) -> Result<Self> {
        let d = Self {
            elements_per_edge,
            order,
        };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<()> {
        if self.elements_per_edge < 2 {
            return Err(Error::InvalidArgument("at least 2 elements per edge".into()));
        }
        if self.order < 2 || self.order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "element order must be in 2..={MAX_ORDER}"
            )));
        }
        Ok(())
    }

    /// Same order, twice the elements.
    pub fn refined(&self) -> Self {
        Self {
            elements_per_edge: 2 * self.elements_per_edge,
            order: self.order,
        }
    }

    /// Interior unknowns per edge.
    pub fn interior_dofs(&self) -> usize {
        self.elements_per_edge * self.order - 1
    }

    /// Element lengths on `[0, 1]` with every breakpoint of `v` on an
    /// element boundary, paired with the potential value on each element.
    pub fn mesh(&self, v: &StepPotential) -> Result<Vec<(f64, f64)>> {
        let n = self.elements_per_edge;
        let k = v.num_pieces();
        if k > n {
            return Err(Error::MisalignedMesh(format!(
                "{k} potential pieces but only {n} elements per edge"
            )));
        }
        // one element per piece, the rest by largest remainder on length
        let spare = (n - k) as f64;
        let pieces: Vec<(f64, f64, f64)> = v.pieces().collect();
        let mut alloc: Vec<usize> = Vec::with_capacity(k);
        let mut rem: Vec<(f64, usize)> = Vec::with_capacity(k);
        for (i, (a, b, _)) in pieces.iter().enumerate() {
            let ideal = spare * (b - a);
            alloc.push(1 + ideal.floor() as usize);
            rem.push((ideal - ideal.floor(), i));
        }
        let mut left = n - alloc.iter().sum::<usize>();
        rem.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for &(_, i) in &rem {
            if left == 0 {
                break;
            }
            alloc[i] += 1;
            left -= 1;
        }
        let mut out = Vec::with_capacity(n);
        for ((a, b, val), m) in pieces.into_iter().zip(alloc) {
            let h = (b - a) / m as f64;
            if !(h > 0.0) {
                return Err(Error::MisalignedMesh("degenerate potential piece".into()));
            }
            out.extend(std::iter::repeat((h, val)).take(m));
        }
        Ok(out)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    (0..q)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(q, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn legendre_all(k: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0, x];
    for j in 2..=k {
        let jf = j as f64;
        p.push(((2.0 * jf - 1.0) * x * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf);
    }
    p.truncate(k + 1);
    p
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let p = legendre_all(k, x);
    let kf = k as f64;
    let d = kf * (x * p[k] - p[k - 1]) / (x * x - 1.0);
    (p[k], d)
}

/// Basis values and `t`-derivatives on `[0, 1]`: the two hats `1 - t`, `t`
/// followed by integrated Legendre bubbles of degree `2..=p`.
fn basis_at(p: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let xi = 2.0 * t - 1.0;
    let leg = legendre_all(p.max(1), xi);
    let mut val = vec![1.0 - t, t];
    let mut der = vec![-1.0, 1.0];
    for k in 2..=p {
        let kf = k as f64;
        let s = 2.0 * (2.0 * kf - 1.0).sqrt();
        val.push((leg[k] - leg[k - 2]) / s);
        der.push(2.0 * (2.0 * kf - 1.0) * leg[k - 1] / s);
    }
    (val, der)
}

/// Reference matrices on `[0, 1]`: `K = ∫φ'φ'`, `M = ∫φφ`, `C = ∫φ_i φ_j'`.
#[derive(Clone, Debug)]
pub(crate) struct ReferenceElement {
    pub order: usize,
    pub k: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl ReferenceElement {
    pub fn new(order: usize) -> Self {
        let nb = order + 1;
        let mut k = vec![vec![0.0; nb]; nb];
        let mut m = vec![vec![0.0; nb]; nb];
        let mut c = vec![vec![0.0; nb]; nb];
        for (x, w) in gauss_legendre(order + 2) {
            let t = 0.5 * (x + 1.0);
            let w = 0.5 * w;
            let (v, d) = basis_at(order, t);
            for i in 0..nb {
                for j in 0..nb {
                    k[i][j] += w * d[i] * d[j];
                    m[i][j] += w * v[i] * v[j];
                    c[i][j] += w * v[i] * d[j];
                }
            }
        }
        Self { order, k, m, c }
    }

    pub fn size(&self) -> usize {
        self.order + 1
    }

    /// Element stiffness (form) matrix for length `h`, potential `v` and
    /// constant vector potential `a`.
    pub fn stiffness(&self, h: f64, v: f64, a: f64) -> CMatrix {
        let nb = self.size();
        CMatrix::from_fn(nb, nb, |i, j| {
            C64::new(
                self.k[i][j] / h + (v + a * a) * h * self.m[i][j],
                a * (self.c[i][j] - self.c[j][i]),
            )
        })
    }

    pub fn mass(&self, h: f64) -> CMatrix {
        let nb = self.size();
        CMatrix::from_fn(nb, nb, |i, j| C64::new(h * self.m[i][j], 0.0))
    }
}

/// Elements of one kind of edge: `(length, potential)` per element and the
/// vector potential.
#[derive(Clone, Debug)]
pub(crate) struct EdgeKind {
    pub elements: Vec<(f64, f64)>,
    pub a: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct EdgeDofs {
    pub kind: usize,
    /// `(vertex, slot)` at `t = 0` and `t = 1`.
    pub ends: [(usize, usize); 2],
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct VertexDofs {
    /// Orthonormal basis of admissible end values, one column per unknown.
    pub basis: CMatrix,
    pub theta: Vec<f64>,
    pub offset: usize,
}

impl VertexDofs {
    pub fn count(&self) -> usize {
        self.theta.len()
    }
}

/// Hermitian pencil `(K, Mass)` of a discretized operator.
///
/// Unknowns are laid out edge by edge (`n p - 1` interior unknowns each)
/// followed by the vertex unknowns.
#[derive(Clone, Debug)]
pub struct AssembledPencil {
    pub(crate) disc: Discretization,
    pub(crate) reference: Arc<ReferenceElement>,
    pub(crate) kinds: Vec<EdgeKind>,
    pub(crate) edges: Vec<EdgeDofs>,
    pub(crate) vertices: Vec<VertexDofs>,
    pub(crate) vertex_offset: usize,
    pub(crate) dim: usize,
    /// Bandwidth-reducing order of the reduced system: vertex unknowns and
    /// the last interior node of every edge.
    pub(crate) vertex_ordering: BandOrdering,
    matrices: OnceLock<(CsrMatrix, CsrMatrix)>,
}

fn vertex_dofs(c: &VertexCondition) -> Result<(CMatrix, Vec<f64>)> {
    let t = to_form_triple(c)?;
    Ok((t.basis, t.theta))
}

/// Pencil of the operator with twist phases folded into the conditions.
pub fn assemble(data: &OperatorData, disc: &Discretization) -> Result<AssembledPencil> {
    build(data, disc, &data.effective_conditions(), None)
}

/// Pencil of `-(d/dt - i a_e)^2 + V` with the untwisted conditions, taking
/// `a_e` from the attached phases.
pub fn assemble_magnetic(data: &OperatorData, disc: &Discretization) -> Result<AssembledPencil> {
    build(data, disc, data.conditions(), data.phases())
}

fn build(
    data: &OperatorData,
    disc: &Discretization,
    conditions: &[Arc<VertexCondition>],
    phases: Option<&[f64]>,
) -> Result<AssembledPencil> {
    disc.check()?;
    let g = data.graph();
    let mut kind_index: HashMap<(Vec<u64>, u64), usize> = HashMap::new();
    let mut kinds = Vec::new();
    let mut edges = Vec::with_capacity(g.num_edges());
    let interior = disc.interior_dofs();
    for e in 0..g.num_edges() {
        let v = data.potential(e);
        let a = phases.map_or(0.0, |p| p[e]);
        let key = (v.key(), a.to_bits());
        let kind = match kind_index.get(&key) {
            Some(&k) => k,
            None => {
                kinds.push(EdgeKind {
                    elements: disc.mesh(v)?,
                    a,
                });
                kind_index.insert(key, kinds.len() - 1);
                kinds.len() - 1
            }
        };
        let [s, r] = g.edge_ends(e);
        edges.push(EdgeDofs {
            kind,
            ends: [(s.vertex, s.slot), (r.vertex, r.slot)],
            offset: e * interior,
        });
    }
    let vertex_offset = g.num_edges() * interior;
    let mut by_ptr: HashMap<*const VertexCondition, (CMatrix, Vec<f64>)> = HashMap::new();
    let mut vertices = Vec::with_capacity(g.num_vertices());
    let mut offset = vertex_offset;
    for c in conditions {
        let (basis, theta) = match by_ptr.get(&Arc::as_ptr(c)) {
            Some(x) => x.clone(),
            None => {
                let x = vertex_dofs(c)?;
                by_ptr.insert(Arc::as_ptr(c), x.clone());
                x
            }
        };
        let m = theta.len();
        vertices.push(VertexDofs {
            basis,
            theta,
            offset,
        });
        offset += m;
    }
    // vertex unknowns followed by one retained interior node per edge
    let nv = offset - vertex_offset;
    let mut adj = vec![Vec::new(); nv + edges.len()];
    for (ei, e) in edges.iter().enumerate() {
        let x = nv + ei;
        for &(v, _) in &e.ends {
            let vd = &vertices[v];
            for i in 0..vd.count() {
                let y = vd.offset + i - vertex_offset;
                adj[x].push(y);
                adj[y].push(x);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    Ok(AssembledPencil {
        disc: *disc,
        reference: Arc::new(ReferenceElement::new(disc.order)),
        kinds,
        edges,
        vertices,
        vertex_offset,
        dim: offset,
        vertex_ordering: BandOrdering::from_adjacency(&adj),
        matrices: OnceLock::new(),
    })
}

impl AssembledPencil {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertex_dofs(&self) -> usize {
        self.dim - self.vertex_offset
    }

    /// First vertex unknown and count at vertex `v`.
    pub fn vertex_dof_range(&self, v: usize) -> std::ops::Range<usize> {
        let d = &self.vertices[v];
        d.offset..d.offset + d.count()
    }

    pub fn edge_dof_range(&self, e: usize) -> std::ops::Range<usize> {
        let o = self.edges[e].offset;
        o..o + self.disc.interior_dofs()
    }

    /// `(global index, coefficient)` lists expressing each element-local
    /// unknown of edge `e`, element `k`.
    pub(crate) fn element_map(&self, e: usize, k: usize) -> Vec<Vec<(usize, C64)>> {
        let p = self.disc.order;
        let n = self.disc.elements_per_edge;
        let ed = &self.edges[e];
        let node = |j: usize| -> Vec<(usize, C64)> {
            if j == 0 || j == n {
                let (v, slot) = ed.ends[usize::from(j == n)];
                let vd = &self.vertices[v];
                (0..vd.count())
                    .filter_map(|c| {
                        let z = vd.basis[(slot, c)];
                        (z.norm() > 1e-14).then_some((vd.offset + c, z))
                    })
                    .collect()
            } else {
                vec![(ed.offset + j * p - 1, C64::new(1.0, 0.0))]
            }
        };
        let mut out = vec![node(k), node(k + 1)];
        for b in 0..p - 1 {
            out.push(vec![(ed.offset + k * p + b, C64::new(1.0, 0.0))]);
        }
        out
    }

    fn build_matrices(&self) -> (CsrMatrix, CsrMatrix) {
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        let mut local: HashMap<(u64, u64, u64), (CMatrix, CMatrix)> = HashMap::new();
        for (e, ed) in self.edges.iter().enumerate() {
            let kind = &self.kinds[ed.kind];
            for (k, &(h, v)) in kind.elements.iter().enumerate() {
                let (ke, me) = local
                    .entry((h.to_bits(), v.to_bits(), kind.a.to_bits()))
                    .or_insert_with(|| {
                        (self.reference.stiffness(h, v, kind.a), self.reference.mass(h))
                    })
                    .clone();
                let map = self.element_map(e, k);
                for (i, mi) in map.iter().enumerate() {
                    for (j, mj) in map.iter().enumerate() {
                        for &(gi, ci) in mi {
                            for &(gj, cj) in mj {
                                let w = ci.conj() * cj;
                                kt.push((gi, gj, w * ke[(i, j)]));
                                if me[(i, j)] != ZERO {
                                    mt.push((gi, gj, w * me[(i, j)]));
                                }
                            }
                        }
                    }
                }
            }
        }
        for vd in &self.vertices {
            for (c, &t) in vd.theta.iter().enumerate() {
                kt.push((vd.offset + c, vd.offset + c, C64::new(t, 0.0)));
            }
        }
        (
            CsrMatrix::from_triplets(self.dim, kt),
            CsrMatrix::from_triplets(self.dim, mt),
        )
    }

    /// Sparse `K` (form matrix, vertex couplings included) and `Mass`.
    pub fn matrices(&self) -> (&CsrMatrix, &CsrMatrix) {
        let (k, m) = self.matrices.get_or_init(|| self.build_matrices());
        (k, m)
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        self.matrices().0
    }

    pub fn mass(&self) -> &CsrMatrix {
        self.matrices().1
    }

    /// Element-local coefficients of `x` on edge `e`, element `k`.
    fn element_coefficients(&self, x: &[C64], e: usize, k: usize) -> Vec<C64> {
        self.element_map(e, k)
            .iter()
            .map(|l| l.iter().map(|&(g, c)| c * x[g]).sum())
            .collect()
    }

    /// `∫_e |f|^2` for the function with coefficient vector `x`.
    pub fn edge_mass(&self, x: &[C64], e: usize) -> f64 {
        let kind = &self.kinds[self.edges[e].kind];
        let r = &self.reference;
        let mut s = 0.0;
        for (k, &(h, _)) in kind.elements.iter().enumerate() {
            let c = self.element_coefficients(x, e, k);
            for i in 0..c.len() {
                for j in 0..c.len() {
                    s += h * r.m[i][j] * (c[i].conj() * c[j]).re;
                }
            }
        }
        s
    }

    /// Value of the discrete function on edge `e` at `t ∈ [0, 1]`.
    pub fn evaluate(&self, x: &[C64], e: usize, t: f64) -> C64 {
        let kind = &self.kinds[self.edges[e].kind];
        let mut start = 0.0;
        let last = kind.elements.len() - 1;
        for (k, &(h, _)) in kind.elements.iter().enumerate() {
            if t <= start + h || k == last {
                let s = ((t - start) / h).clamp(0.0, 1.0);
                let (v, _) = basis_at(self.disc.order, s);
                let c = self.element_coefficients(x, e, k);
                return c.iter().zip(&v).map(|(z, w)| z * *w).sum();
            }
            start += h;
        }
        unreachable!("elements cover the edge")
    }
}

/// Mass of `x` on the edges listed in `edges`: the exact `L^2` mass of the
/// discrete function restricted to those edges.
pub fn restricted_mass(p: &AssembledPencil, x: &[C64], edges: &[usize]) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a pencil of dimension {}",
            x.len(),
            p.dim()
        )));
    }
    let mut seen = vec![false; p.num_edges()];
    let mut s = 0.0;
    for &e in edges {
        if e >= p.num_edges() {
            return Err(Error::InvalidArgument(format!("edge {e} not in the pencil")));
        }
        if !std::mem::replace(&mut seen[e], true) {
            s += p.edge_mass(x, e);
        }
    }
    Ok(s.max(0.0))
}
