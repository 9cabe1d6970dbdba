//! Eigenvalue counts of a pencil from the inertia of `K - λ Mass`.
//!
//! Edge interiors are eliminated first: bubbles element by element, then the
//! interior nodes along the edge as a Sturm chain. One interior node near
//! the end is kept, so the remainder is a 3x3 matrix on (start value, that
//! node, end value); eliminating it too would put a pole at every Dirichlet
//! eigenvalue of the unit edge, which the lattice spectra hit exactly. The reduced
//! system of vertex unknowns and retained nodes is factored densely or as a
//! band. By Haynsworth additivity the negative pivots of all stages add up to
//! the inertia of the whole matrix.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{bunch_kaufman_inertia, hermitian_eigen, Breakdown, CMatrix, C64, ZERO};
use crate::sparse::BandMatrix;
use crate::spectral::fem::{AssembledPencil, EdgeKind, ReferenceElement};

const PIVOT_TOL: f64 = 1e-15;
const DENSE_VERTEX_LIMIT: usize = 96;

/// How a count was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountDiagnostics {
    /// Shift at which the inertia was taken.
    pub evaluated_at: f64,
    /// Shifts abandoned after a factorization breakdown.
    pub retries: u32,
}

type Hermitian2 = [[C64; 2]; 2];

/// Negative pivots of an element's bubble block and its Schur complement
/// on the two hats.
fn condense_element(
    r: &ReferenceElement,
    h: f64,
    v: f64,
    a: f64,
    mu: f64,
) -> std::result::Result<(usize, Hermitian2), Breakdown> {
    let s = r.stiffness(h, v, a) - r.mass(h) * C64::new(mu, 0.0);
    let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tiny = PIVOT_TOL * scale;
    let nb = r.size();
    let mut out = [[s[(0, 0)], s[(0, 1)]], [s[(1, 0)], s[(1, 1)]]];
    let mut neg = 0;
    if nb == 3 {
        let b = s[(2, 2)].re;
        if b.abs() <= tiny {
            return Err(Breakdown { pivot: b, index: 2 });
        }
        neg += usize::from(b < 0.0);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] -= s[(i, 2)] * s[(2, j)] / b;
            }
        }
    } else {
        let bb = s.view((2, 2), (nb - 2, nb - 2)).into_owned();
        let (vals, vecs) = hermitian_eigen(&bb);
        for (k, &l) in vals.iter().enumerate() {
            if l.abs() <= tiny {
                return Err(Breakdown { pivot: l, index: 2 + k });
            }
            neg += usize::from(l < 0.0);
        }
        // S_hb V diag(1/l) V* S_bh
        let hb = s.view((0, 2), (2, nb - 2)).into_owned();
        let w = &hb * &vecs;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = ZERO;
                for (k, l) in vals.iter().enumerate() {
                    acc += w[(i, k)] * w[(j, k)].conj() / *l;
                }
                out[i][j] -= acc;
            }
        }
    }
    Ok((neg, out))
}

type Hermitian3 = [[C64; 3]; 3];

/// Pivots smaller than this fraction of their row are deferred and
/// eliminated together with the next node.
const DEFER_TOL: f64 = 1e-3;

/// Hermitian matrix of size at most 4 on the unknowns still live along an
/// edge chain.
#[derive(Clone, Copy)]
struct Chain {
    n: usize,
    m: [[C64; 4]; 4],
}

impl Chain {
    fn new(sk: &Hermitian2) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = sk[i][j];
            }
        }
        Self { n: 2, m }
    }

    /// Couple a new node to the last one through an element block.
    fn push(&mut self, sk: &Hermitian2) {
        let l = self.n - 1;
        let k = self.n;
        self.m[l][l] += sk[0][0];
        self.m[l][k] = sk[0][1];
        self.m[k][l] = sk[1][0];
        self.m[k][k] = sk[1][1];
        self.n += 1;
    }

    fn row_scale(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.m[i][j].norm()).fold(0.0, f64::max)
    }

    fn remove(&mut self, idx: &[usize]) {
        let keep: Vec<usize> = (0..self.n).filter(|i| !idx.contains(i)).collect();
        let mut m = [[ZERO; 4]; 4];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m[a][b] = self.m[i][j];
            }
        }
        self.m = m;
        self.n = keep.len();
    }

    /// Schur complement on unknown `i`; returns the negative pivot count.
    fn eliminate1(&mut self, i: usize) -> std::result::Result<usize, Breakdown> {
        let d = self.m[i][i].re;
        if d.abs() <= PIVOT_TOL * self.row_scale(i) || !d.is_finite() {
            return Err(Breakdown { pivot: d, index: i });
        }
        for r in 0..self.n {
            for c in 0..self.n {
                if r != i && c != i {
                    let t = self.m[r][i] * self.m[i][c] / d;
                    self.m[r][c] -= t;
                }
            }
        }
        self.remove(&[i]);
        Ok(usize::from(d < 0.0))
    }

    /// Schur complement on the pair `(i, j)`.
    fn eliminate2(&mut self, i: usize, j: usize) -> std::result::Result<usize, Breakdown> {
        let (p, q, r) = (self.m[i][i].re, self.m[i][j], self.m[j][j].re);
        let det = p * r - q.norm_sqr();
        let scale = self.row_scale(i).max(self.row_scale(j));
        if det.abs() <= PIVOT_TOL * scale * scale || !det.is_finite() {
            return Err(Breakdown { pivot: det, index: i });
        }
        let neg = if det < 0.0 { 1 } else if p + r < 0.0 { 2 } else { 0 };
        // inverse of [[p, q], [q*, r]]
        let inv = [[C64::new(r / det, 0.0), -q / det], [-q.conj() / det, C64::new(p / det, 0.0)]];
        let piv = [i, j];
        for a in 0..self.n {
            for b in 0..self.n {
                if piv.contains(&a) || piv.contains(&b) {
                    continue;
                }
                let mut t = ZERO;
                for (x, &u) in piv.iter().enumerate() {
                    for (y, &w) in piv.iter().enumerate() {
                        t += self.m[a][u] * inv[x][y] * self.m[w][b];
                    }
                }
                self.m[a][b] -= t;
            }
        }
        self.remove(&piv);
        Ok(neg)
    }

    fn small_pivot(&self, i: usize) -> bool {
        self.m[i][i].re.abs() <= DEFER_TOL * self.row_scale(i)
    }
}

/// Negative pivots of an edge interior minus one retained node, and the
/// matrix on (start value, retained node, end value).
///
/// Interior nodes are eliminated along the chain. A pivot that is small next
/// to its row would make later entries cancel, so that node is eliminated
/// together with the following one instead.
fn condense_edge(
    r: &ReferenceElement,
    kind: &EdgeKind,
    mu: f64,
) -> std::result::Result<(usize, Hermitian3), Breakdown> {
    let mut cache: HashMap<(u64, u64), (usize, Hermitian2)> = HashMap::new();
    let mut neg = 0;
    let n = kind.elements.len();
    let mut chain: Option<Chain> = None;
    for (k, &(h, v)) in kind.elements.iter().enumerate() {
        let key = (h.to_bits(), v.to_bits());
        let (nk, sk) = match cache.get(&key) {
            Some(x) => *x,
            None => {
                let x = condense_element(r, h, v, kind.a, mu)?;
                cache.insert(key, x);
                x
            }
        };
        neg += nk;
        let Some(c) = chain.as_mut() else {
            chain = Some(Chain::new(&sk));
            continue;
        };
        c.push(&sk);
        // live unknowns: start, an optional deferred node, node k, node k + 1
        if k == n - 1 {
            if c.n == 4 {
                // keep the deferred node and drop node n - 1, whose pivot only
                // vanishes at two-element Dirichlet energies
                neg += c.eliminate1(2)?;
            }
            break;
        }
        if c.n == 4 {
            neg += c.eliminate2(1, 2)?;
        } else if !c.small_pivot(1) {
            neg += c.eliminate1(1)?;
        }
    }
    let c = chain.expect("edges have at least two elements");
    debug_assert_eq!(c.n, 3);
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = c.m[i][j];
        }
    }
    Ok((neg, out))
}

/// Number of pencil eigenvalues strictly below `mu`.
pub(crate) fn negatives_at(p: &AssembledPencil, mu: f64) -> std::result::Result<usize, Breakdown> {
    let r = &p.reference;
    let mut edge_mats = Vec::with_capacity(p.kinds.len());
    let mut kind_neg = Vec::with_capacity(p.kinds.len());
    for kind in &p.kinds {
        let (n, e) = condense_edge(r, kind, mu)?;
        kind_neg.push(n);
        edge_mats.push(e);
    }
    let total: usize = p.edges.iter().map(|e| kind_neg[e.kind]).sum();
    let base = p.vertex_offset;
    let nv = p.num_vertex_dofs();
    let nr = nv + p.edges.len();
    let visit = |add: &mut dyn FnMut(usize, usize, C64)| {
        for vd in &p.vertices {
            for (c, &t) in vd.theta.iter().enumerate() {
                add(vd.offset + c - base, vd.offset + c - base, C64::new(t, 0.0));
            }
        }
        for (ei, ed) in p.edges.iter().enumerate() {
            let em = &edge_mats[ed.kind];
            let end_row = |(v, slot): (usize, usize)| -> Vec<(usize, C64)> {
                let vd = &p.vertices[v];
                (0..vd.count())
                    .filter_map(|c| {
                        let z = vd.basis[(slot, c)];
                        (z.norm() > 1e-14).then_some((vd.offset + c - base, z))
                    })
                    .collect()
            };
            let rows = [
                end_row(ed.ends[0]),
                vec![(nv + ei, C64::new(1.0, 0.0))],
                end_row(ed.ends[1]),
            ];
            for (s, rs) in rows.iter().enumerate() {
                for (t, rt) in rows.iter().enumerate() {
                    let ev = em[s][t];
                    if ev == ZERO {
                        continue;
                    }
                    for &(i, zi) in rs {
                        for &(j, zj) in rt {
                            add(i, j, zi.conj() * ev * zj);
                        }
                    }
                }
            }
        }
    };
    let inertia = if nr <= DENSE_VERTEX_LIMIT {
        let mut h = CMatrix::zeros(nr, nr);
        visit(&mut |i, j, z| h[(i, j)] += z);
        bunch_kaufman_inertia(h, 0.0, PIVOT_TOL)?
    } else {
        let ord = &p.vertex_ordering;
        let mut b = BandMatrix::zeros(nr, ord.bandwidth);
        visit(&mut |i, j, z| b.add(ord.inv[i], ord.inv[j], z));
        b.factor(PIVOT_TOL)?.inertia()
    };
    Ok(total + inertia.negative)
}

/// Inertia below `mu`, nudging the shift outward when `mu` sits on an
/// eigenvalue to working precision.
pub(crate) fn negatives_near(p: &AssembledPencil, mu: f64) -> Result<usize> {
    let eps = 1e-12 * (1.0 + mu.abs());
    for k in [0.0, 1.0, -1.0, 10.0, -10.0, 100.0] {
        if let Ok(n) = negatives_at(p, mu + k * eps) {
            return Ok(n);
        }
    }
    Err(Error::FactorizationBreakdown(mu))
}

/// Right-continuity offset used for counts at `lambda`.
pub fn count_offset(lambda: f64) -> f64 {
    1e-9 * (1.0 + lambda.abs())
}

/// Number of pencil eigenvalues `<= lambda`, with how it was obtained.
pub fn count_below_with_diagnostics(
    p: &AssembledPencil,
    lambda: f64,
) -> Result<(usize, CountDiagnostics)> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    let delta = count_offset(lambda);
    let mut retries = 0;
    for shift in [lambda + delta, lambda + 10.0 * delta, lambda - 10.0 * delta] {
        match negatives_at(p, shift) {
            Ok(n) => {
                return Ok((
                    n,
                    CountDiagnostics {
                        evaluated_at: shift,
                        retries,
                    },
                ))
            }
            Err(_) => retries += 1,
        }
    }
    Err(Error::FactorizationBreakdown(lambda))
}

/// Number of pencil eigenvalues `<= lambda`.
pub fn count_below(p: &AssembledPencil, lambda: f64) -> Result<usize> {
    count_below_with_diagnostics(p, lambda).map(|x| x.0)
}

/// Counts on a grid of `lambda` values.
pub fn count_grid(p: &AssembledPencil, grid: &[f64]) -> Result<Vec<usize>> {
    use rayon::prelude::*;
    grid.par_iter().map(|&l| count_below(p, l)).collect()
}
