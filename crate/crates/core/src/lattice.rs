//! The metric lattice graph over `Z^d`: sites, anchored edges, finite regions
//! and their induced subgraphs with inner/boundary classification.
//!
//! Every site `x` anchors the `d` edges `[x, x + e_j]`. The subgraph induced
//! by a region `Q` consists of exactly the edges anchored at `Q`, so
//! `|E_Q| = d |Q|` holds for every region.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeSite(Vec<i64>);

impl LatticeSite {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        check_dim(coords.len())?;
        Ok(Self(coords))
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// `self + delta * e_j` for the 1-based direction `j`.
    pub fn step(&self, direction: usize, delta: i64) -> Self {
        let mut c = self.0.clone();
        c[direction - 1] += delta;
        Self(c)
    }

    pub fn translate(&self, t: &[i64]) -> Self {
        Self(self.0.iter().zip(t).map(|(a, b)| a + b).collect())
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &Self) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }
}

/// The edge `[anchor, anchor + e_direction]`, parametrized by `t` in `(0, 1)`
/// from its start `s(e) = anchor` to its end `r(e)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub anchor: LatticeSite,
    /// 1-based lattice direction.
    pub direction: usize,
}

impl EdgeId {
    pub fn new(anchor: LatticeSite, direction: usize) -> Result<Self> {
        if direction == 0 || direction > anchor.dim() {
            return Err(Error::InvalidArgument(format!(
                "edge direction {direction} outside 1..={}",
                anchor.dim()
            )));
        }
        Ok(Self { anchor, direction })
    }

    pub fn start(&self) -> LatticeSite {
        self.anchor.clone()
    }

    pub fn end(&self) -> LatticeSite {
        self.anchor.step(self.direction, 1)
    }

    pub fn translate(&self, t: &[i64]) -> Self {
        Self {
            anchor: self.anchor.translate(t),
            direction: self.direction,
        }
    }
}

/// Which end of an edge sits at a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndRole {
    Start,
    End,
}

/// A finite nonempty subset of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    d: usize,
    sites: BTreeSet<LatticeSite>,
}

impl Region {
    pub fn new(d: usize, sites: impl IntoIterator<Item = LatticeSite>) -> Result<Self> {
        check_dim(d)?;
        let sites: BTreeSet<_> = sites.into_iter().collect();
        if sites.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if let Some(bad) = sites.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch(format!(
                "site {:?} in a region of dimension {d}",
                bad.coords()
            )));
        }
        Ok(Self { d, sites })
    }

    /// Region literal: a list of integer vectors.
    pub fn from_coords(coords: &[Vec<i64>]) -> Result<Self> {
        let d = coords.first().map(Vec::len).ok_or(Error::EmptyRegion)?;
        let sites = coords
            .iter()
            .map(|c| LatticeSite::new(c.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, sites)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, x: &LatticeSite) -> bool {
        self.sites.contains(x)
    }

    pub fn sites(&self) -> impl Iterator<Item = &LatticeSite> {
        self.sites.iter()
    }

    pub fn translate(&self, t: &[i64]) -> Self {
        Self {
            d: self.d,
            sites: self.sites.iter().map(|s| s.translate(t)).collect(),
        }
    }

    /// Componentwise minimum and maximum coordinates.
    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = vec![i64::MAX; self.d];
        let mut hi = vec![i64::MIN; self.d];
        for s in &self.sites {
            for (j, &c) in s.coords().iter().enumerate() {
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(c);
            }
        }
        (lo, hi)
    }

    /// Sup-norm diameter.
    pub fn diameter(&self) -> i64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| b - a).max().unwrap_or(0)
    }

    /// All sites within sup-norm distance `margin` of the region.
    pub fn dilate(&self, margin: u32) -> Self {
        if margin == 0 {
            return self.clone();
        }
        let m = margin as i64;
        let offsets = cube_offsets(self.d, -m, m);
        let mut sites = BTreeSet::new();
        for s in &self.sites {
            for o in &offsets {
                sites.insert(s.translate(o));
            }
        }
        Self { d: self.d, sites }
    }
}

fn cube_offsets(d: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(d)];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for prefix in &out {
            for c in lo..=hi {
                let mut v = prefix.clone();
                v.push(c);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// The cube `C_M = {x : 0 <= x_j <= M - 1}`.
pub fn cube_region(d: usize, side: usize) -> Result<Region> {
    check_dim(d)?;
    if side == 0 {
        return Err(Error::InvalidArgument("cube side must be >= 1".into()));
    }
    let sites = cube_offsets(d, 0, side as i64 - 1)
        .into_iter()
        .map(LatticeSite);
    Region::new(d, sites)
}

/// One incident edge-end at a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Incidence {
    /// Index into [`MetricSubgraph::edges`].
    pub edge: usize,
    pub role: EndRole,
}

/// Vertex index and incidence slot of one end of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EndSlot {
    pub vertex: usize,
    pub slot: usize,
}

/// A finite subgraph of the lattice graph together with its classification
/// against the full lattice.
#[derive(Clone, Debug)]
pub struct MetricSubgraph {
    d: usize,
    region: Option<Region>,
    edges: Vec<EdgeId>,
    vertices: Vec<LatticeSite>,
    edge_index: HashMap<EdgeId, usize>,
    vertex_index: HashMap<LatticeSite, usize>,
    inner_vertex: Vec<bool>,
    inner_edge: Vec<bool>,
    incidence: Vec<Vec<Incidence>>,
    ends: Vec<[EndSlot; 2]>,
}

/// `G_Q`: the `d` edges anchored at every site of `Q`.
pub fn induced_subgraph(region: &Region) -> MetricSubgraph {
    let d = region.dim();
    let edges: Vec<EdgeId> = region
        .sites()
        .flat_map(|s| {
            (1..=d).map(move |j| EdgeId {
                anchor: s.clone(),
                direction: j,
            })
        })
        .collect();
    let mut g = MetricSubgraph::build(d, edges);
    g.region = Some(region.clone());
    g
}

impl MetricSubgraph {
    /// Subgraph spanned by an arbitrary finite edge set ("a subset of the
    /// edges together with all adjacent vertices").
    pub fn from_edges(d: usize, edges: impl IntoIterator<Item = EdgeId>) -> Result<Self> {
        check_dim(d)?;
        let edges: Vec<EdgeId> = edges.into_iter().collect();
        if edges.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for e in &edges {
            if e.anchor.dim() != d || e.direction == 0 || e.direction > d {
                return Err(Error::DimensionMismatch(format!("edge {e:?} in dimension {d}")));
            }
        }
        Ok(Self::build(d, edges))
    }

    fn build(d: usize, edges: Vec<EdgeId>) -> Self {
        let mut edges = edges;
        edges.sort();
        edges.dedup();
        let edge_index: HashMap<EdgeId, usize> =
            edges.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let mut vset = BTreeSet::new();
        for e in &edges {
            vset.insert(e.start());
            vset.insert(e.end());
        }
        let vertices: Vec<LatticeSite> = vset.into_iter().collect();
        let vertex_index: HashMap<LatticeSite, usize> =
            vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();

        let mut incidence = Vec::with_capacity(vertices.len());
        let mut inner_vertex = Vec::with_capacity(vertices.len());
        let mut ends = vec![[EndSlot { vertex: 0, slot: 0 }; 2]; edges.len()];
        for (vi, v) in vertices.iter().enumerate() {
            let mut inc = Vec::with_capacity(2 * d);
            let mut all_present = true;
            for j in 1..=d {
                let out = EdgeId {
                    anchor: v.clone(),
                    direction: j,
                };
                match edge_index.get(&out) {
                    Some(&ei) => {
                        ends[ei][0] = EndSlot {
                            vertex: vi,
                            slot: inc.len(),
                        };
                        inc.push(Incidence {
                            edge: ei,
                            role: EndRole::Start,
                        });
                    }
                    None => all_present = false,
                }
            }
            for j in 1..=d {
                let inc_edge = EdgeId {
                    anchor: v.step(j, -1),
                    direction: j,
                };
                match edge_index.get(&inc_edge) {
                    Some(&ei) => {
                        ends[ei][1] = EndSlot {
                            vertex: vi,
                            slot: inc.len(),
                        };
                        inc.push(Incidence {
                            edge: ei,
                            role: EndRole::End,
                        });
                    }
                    None => all_present = false,
                }
            }
            incidence.push(inc);
            inner_vertex.push(all_present);
        }
        let inner_edge = ends
            .iter()
            .map(|[s, r]| inner_vertex[s.vertex] && inner_vertex[r.vertex])
            .collect();
        Self {
            d,
            region: None,
            edges,
            vertices,
            edge_index,
            vertex_index,
            inner_vertex,
            inner_edge,
            incidence,
            ends,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn vertices(&self) -> &[LatticeSite] {
        &self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_index(&self, e: &EdgeId) -> Option<usize> {
        self.edge_index.get(e).copied()
    }

    pub fn vertex_index(&self, v: &LatticeSite) -> Option<usize> {
        self.vertex_index.get(v).copied()
    }

    pub fn is_inner_vertex(&self, v: usize) -> bool {
        self.inner_vertex[v]
    }

    pub fn is_inner_edge(&self, e: usize) -> bool {
        self.inner_edge[e]
    }

    pub fn inner_vertices(&self) -> impl Iterator<Item = &LatticeSite> {
        self.vertices
            .iter()
            .zip(&self.inner_vertex)
            .filter(|(_, &i)| i)
            .map(|(v, _)| v)
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = &LatticeSite> {
        self.vertices
            .iter()
            .zip(&self.inner_vertex)
            .filter(|(_, &i)| !i)
            .map(|(v, _)| v)
    }

    pub fn inner_edges(&self) -> impl Iterator<Item = &EdgeId> {
        self.edges
            .iter()
            .zip(&self.inner_edge)
            .filter(|(_, &i)| i)
            .map(|(e, _)| e)
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = &EdgeId> {
        self.edges
            .iter()
            .zip(&self.inner_edge)
            .filter(|(_, &i)| !i)
            .map(|(e, _)| e)
    }

    pub fn num_boundary_vertices(&self) -> usize {
        self.inner_vertex.iter().filter(|&&i| !i).count()
    }

    /// Canonically ordered incident ends of vertex `v`: outgoing `+1..+d`
    /// then incoming `-1..-d`, skipping absent edges.
    pub fn incidence(&self, v: usize) -> &[Incidence] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    /// Start and end slots of edge `e`.
    pub fn edge_ends(&self, e: usize) -> [EndSlot; 2] {
        self.ends[e]
    }

    /// A copy shifted by the integer vector `t`.
    pub fn translate(&self, t: &[i64]) -> Self {
        let mut g = Self::build(self.d, self.edges.iter().map(|e| e.translate(t)).collect());
        g.region = self.region.as_ref().map(|r| r.translate(t));
        g
    }
}

/// `|V^boundary_Q| / |Q|` kept as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRatio {
    pub boundary_vertices: usize,
    pub sites: usize,
}

impl BoundaryRatio {
    pub fn value(&self) -> f64 {
        self.boundary_vertices as f64 / self.sites as f64
    }
}

impl PartialOrd for BoundaryRatio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        let lhs = self.boundary_vertices as u128 * other.sites as u128;
        let rhs = other.boundary_vertices as u128 * self.sites as u128;
        Some(lhs.cmp(&rhs))
    }
}

pub fn boundary_ratio(region: &Region) -> BoundaryRatio {
    let g = induced_subgraph(region);
    BoundaryRatio {
        boundary_vertices: g.num_boundary_vertices(),
        sites: region.len(),
    }
}

/// Cubes `C_M` for a strictly increasing list of sides.
pub fn van_hove_cubes(d: usize, sides: &[usize]) -> Result<Vec<Region>> {
    if sides.is_empty() {
        return Err(Error::InvalidArgument("empty side list".into()));
    }
    if sides.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sides must be strictly increasing".into()));
    }
    sides.iter().map(|&m| cube_region(d, m)).collect()
}
