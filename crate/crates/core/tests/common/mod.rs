#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use qgids_core::conditions::{make_delta, make_dirichlet, make_kirchhoff, make_neumann, VertexCondition};
use qgids_core::lattice::{EdgeId, LatticeSite, MetricSubgraph};

/// An edge of `Z^2` as (anchor, direction 0 or 1).
type Edge = ((i64, i64), usize);

fn other_end(e: &Edge) -> (i64, i64) {
    let ((x, y), dir) = *e;
    if dir == 0 {
        (x + 1, y)
    } else {
        (x, y + 1)
    }
}

fn incident(p: (i64, i64)) -> [Edge; 4] {
    [(p, 0), (p, 1), ((p.0 - 1, p.1), 0), ((p.0, p.1 - 1), 1)]
}

fn transform(e: &Edge, s: usize) -> Edge {
    let map = |(x, y): (i64, i64)| -> (i64, i64) {
        let (x, y) = if s & 4 != 0 { (y, x) } else { (x, y) };
        let x = if s & 1 != 0 { -x } else { x };
        let y = if s & 2 != 0 { -y } else { y };
        (x, y)
    };
    let (a, b) = (map(e.0), map(other_end(e)));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let dir = if hi.0 != lo.0 { 0 } else { 1 };
    (lo, dir)
}

fn canonical(edges: &BTreeSet<Edge>) -> Vec<Edge> {
    (0..8)
        .map(|s| {
            let t: Vec<Edge> = edges.iter().map(|e| transform(e, s)).collect();
            let mx = t.iter().map(|e| e.0 .0).min().unwrap();
            let my = t.iter().map(|e| e.0 .1).min().unwrap();
            let mut t: Vec<Edge> = t.into_iter().map(|((x, y), d)| ((x - mx, y - my), d)).collect();
            t.sort();
            t
        })
        .min()
        .unwrap()
}

/// Connected edge sets of `Z^2` with at most `max_edges` edges, one per
/// class under translations, rotations and reflections.
pub fn lattice_animals(max_edges: usize) -> Vec<Vec<Edge>> {
    let mut layer: BTreeSet<Vec<Edge>> = BTreeSet::new();
    layer.insert(vec![((0, 0), 0)]);
    let mut all: Vec<Vec<Edge>> = layer.iter().cloned().collect();
    for _ in 1..max_edges {
        let mut next = BTreeSet::new();
        for a in &layer {
            let set: BTreeSet<Edge> = a.iter().copied().collect();
            for e in a {
                for p in [e.0, other_end(e)] {
                    for f in incident(p) {
                        if !set.contains(&f) {
                            let mut grown = set.clone();
                            grown.insert(f);
                            next.insert(canonical(&grown));
                        }
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

pub fn to_graph(edges: &[Edge]) -> Arc<MetricSubgraph> {
    let ids = edges
        .iter()
        .map(|&((x, y), d)| EdgeId::new(LatticeSite::new(vec![x, y]).unwrap(), d + 1).unwrap())
        .collect::<Vec<_>>();
    Arc::new(MetricSubgraph::from_edges(2, ids).unwrap())
}

#[derive(Clone, Copy, Debug)]
pub enum Catalog {
    Dirichlet,
    Neumann,
    Kirchhoff,
    Delta(f64),
}

impl Catalog {
    pub const UNIFORM: [Catalog; 4] = [Catalog::Dirichlet, Catalog::Neumann, Catalog::Kirchhoff, Catalog::Delta(1.5)];

    pub fn build(self, degree: usize) -> VertexCondition {
        match self {
            Catalog::Dirichlet => make_dirichlet(degree),
            Catalog::Neumann => make_neumann(degree),
            Catalog::Kirchhoff => make_kirchhoff(degree),
            Catalog::Delta(a) => make_delta(degree, a),
        }
    }

    pub fn pick(i: u64) -> Catalog {
        match i % 4 {
            0 => Catalog::Dirichlet,
            1 => Catalog::Neumann,
            2 => Catalog::Kirchhoff,
            _ => Catalog::Delta(-2.0 + (i / 4 % 5) as f64),
        }
    }
}

/// Lattice animal counts up to symmetry are 1, 2, 5, 16 for 1 to 4 edges.
#[test]
fn animal_counts() {
    let a = lattice_animals(4);
    let count = |n: usize| a.iter().filter(|e| e.len() == n).count();
    assert_eq!((count(1), count(2), count(3), count(4)), (1, 2, 5, 16));
}
