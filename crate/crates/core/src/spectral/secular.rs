//! Eigenvalues of small graphs with constant edge potentials from the exact
//! secular determinant, independent of any discretization.
//!
//! On an edge with potential `v`, every solution of `-f'' + v f = λ f` is
//! `α c(t) + β s(t)` with the fundamental pair `c(0) = 1, c'(0) = 0`,
//! `s(0) = 0, s'(0) = 1`. The vertex rows `A f + B f' = 0` (inward
//! derivatives) give a square system in the `2|E|` unknowns whose smallest
//! singular value vanishes exactly at the eigenvalues.

use crate::error::{Error, Result};
use crate::lattice::EndRole;
use crate::linalg::{singular_values, CMatrix};
use crate::spectral::operator::OperatorData;

pub const MAX_EDGES: usize = 8;
const SCAN_STEP: f64 = 0.01;
const ROOT_TOL: f64 = 1e-10;
/// Singular values below this fraction of the largest count as zero.
const NULL_TOL: f64 = 1e-7;

/// Eigenvalues with multiplicity, plus roots that could not be separated.
#[derive(Clone, Debug, Default)]
pub struct SecularSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Roots closer to another root than the scan can resolve.
    pub flagged: Vec<f64>,
}

impl SecularSpectrum {
    pub fn count_below(&self, lambda: f64) -> usize {
        self.eigenvalues.partition_point(|&l| l <= lambda)
    }
}

/// `(c(1), c'(1), s(1), s'(1))` for `-f'' + v f = λ f` on `[0, 1]`.
pub fn fundamental(v: f64, lambda: f64) -> (f64, f64, f64, f64) {
    let z = lambda - v;
    if z.abs() < 1e-8 {
        // second order Taylor expansion around the linear solutions
        return (1.0 - z / 2.0, -z, 1.0 - z / 6.0, 1.0 - z / 2.0);
    }
    if z > 0.0 {
        let k = z.sqrt();
        (k.cos(), -k * k.sin(), k.sin() / k, k.cos())
    } else {
        let k = (-z).sqrt();
        (k.cosh(), k * k.sinh(), k.sinh() / k, k.cosh())
    }
}

struct Secular {
    potentials: Vec<f64>,
    /// Per vertex: `A`, `B` and for each slot the edge and role.
    vertices: Vec<(CMatrix, CMatrix, Vec<(usize, EndRole)>)>,
    n: usize,
}

impl Secular {
    fn new(data: &OperatorData) -> Result<Self> {
        let g = data.graph();
        if g.num_edges() > MAX_EDGES {
            return Err(Error::OracleUnsupported(format!(
                "{} edges, at most {MAX_EDGES} supported",
                g.num_edges()
            )));
        }
        let potentials = data
            .potentials()
            .iter()
            .map(|p| {
                p.as_constant()
                    .ok_or_else(|| Error::OracleUnsupported("non-constant potential".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let conds = data.effective_conditions();
        let vertices = (0..g.num_vertices())
            .map(|v| {
                let slots = g.incidence(v).iter().map(|i| (i.edge, i.role)).collect();
                (conds[v].a().clone(), conds[v].b().clone(), slots)
            })
            .collect();
        Ok(Self {
            potentials,
            vertices,
            n: 2 * g.num_edges(),
        })
    }

    fn matrix(&self, lambda: f64) -> CMatrix {
        let fund: Vec<_> = self.potentials.iter().map(|&v| fundamental(v, lambda)).collect();
        let mut m = CMatrix::zeros(self.n, self.n);
        let mut row = 0;
        for (a, b, slots) in &self.vertices {
            for r in 0..slots.len() {
                for (j, &(e, role)) in slots.iter().enumerate() {
                    // (value, inward derivative) as linear forms in (α_e, β_e)
                    let (val, der) = match role {
                        EndRole::Start => ((1.0, 0.0), (0.0, 1.0)),
                        EndRole::End => {
                            let (c, dc, s, ds) = fund[e];
                            ((c, s), (-dc, -ds))
                        }
                    };
                    let (ar, br) = (a[(r, j)], b[(r, j)]);
                    m[(row, 2 * e)] += ar * val.0 + br * der.0;
                    m[(row, 2 * e + 1)] += ar * val.1 + br * der.1;
                }
                row += 1;
            }
        }
        // row scaling keeps the zero set and evens out the hyperbolic growth
        for r in 0..self.n {
            let norm = m.row(r).norm();
            if norm > 0.0 {
                m.row_mut(r).unscale_mut(norm);
            }
        }
        m
    }

    fn sigma_min(&self, lambda: f64) -> f64 {
        let s = singular_values(&self.matrix(lambda));
        s.last().copied().unwrap_or(0.0) / s.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE)
    }

    fn nullity(&self, lambda: f64) -> usize {
        let s = singular_values(&self.matrix(lambda));
        let smax = s.first().copied().unwrap_or(0.0);
        s.iter().filter(|&&x| x <= NULL_TOL * smax).count()
    }
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > ROOT_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Eigenvalues in `[lo, hi]` of a graph with at most [`MAX_EDGES`] edges and
/// constant potentials.
pub fn secular_oracle(data: &OperatorData, lo: f64, hi: f64) -> Result<SecularSpectrum> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("bad range [{lo}, {hi}]")));
    }
    let sec = Secular::new(data)?;
    let steps = ((hi - lo) / SCAN_STEP).ceil() as usize + 2;
    let xs: Vec<f64> = (0..=steps).map(|i| lo - SCAN_STEP + i as f64 * SCAN_STEP).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| sec.sigma_min(x)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 1..xs.len() - 1 {
        if !(fs[i] <= fs[i - 1] && fs[i] < fs[i + 1]) {
            continue;
        }
        let x = golden_min(|l| sec.sigma_min(l), xs[i - 1], xs[i + 1]);
        if sec.sigma_min(x) <= NULL_TOL && (lo..=hi).contains(&x) {
            roots.push(x);
        }
    }
    let mut out = SecularSpectrum::default();
    for (k, &x) in roots.iter().enumerate() {
        if roots
            .get(k + 1)
            .is_some_and(|&y| y - x < 10.0 * ROOT_TOL.sqrt())
        {
            out.flagged.push(x);
        }
        for _ in 0..sec.nullity(x).max(1) {
            out.eigenvalues.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{make_dirichlet, make_kirchhoff, make_neumann};
    use crate::lattice::{EdgeId, LatticeSite, MetricSubgraph};
    use crate::spectral::potential::StepPotential;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn edge_with(left: fn(usize) -> crate::conditions::VertexCondition, right: fn(usize) -> crate::conditions::VertexCondition) -> OperatorData {
        let e = EdgeId::new(LatticeSite::origin(1), 1).unwrap();
        let g = Arc::new(MetricSubgraph::from_edges(1, [e]).unwrap());
        let conds = (0..2)
            .map(|v| {
                let start = g.incidence(v)[0].role == EndRole::Start;
                Arc::new(if start { left(1) } else { right(1) })
            })
            .collect();
        OperatorData::new(g, vec![Arc::new(StepPotential::zero())], conds).unwrap()
    }

    fn square() -> OperatorData {
        let o = LatticeSite::origin(2);
        let edges = [
            EdgeId::new(o.clone(), 1).unwrap(),
            EdgeId::new(o.clone(), 2).unwrap(),
            EdgeId::new(o.step(1, 1), 2).unwrap(),
            EdgeId::new(o.step(2, 1), 1).unwrap(),
        ];
        let g = Arc::new(MetricSubgraph::from_edges(2, edges).unwrap());
        OperatorData::uniform(g, StepPotential::zero(), make_kirchhoff).unwrap()
    }

    #[test]
    fn fundamental_pair_is_continuous_in_lambda() {
        for v in [-5.0, 0.0, 10.0] {
            let a = fundamental(v, v - 1e-7);
            let b = fundamental(v, v);
            let c = fundamental(v, v + 1e-7);
            for (x, y) in [(a.0, b.0), (a.2, b.2), (c.0, b.0), (c.2, b.2), (c.3, b.3)] {
                assert!((x - y).abs() < 1e-6);
            }
        }
        // Wronskian c s' - c' s = 1
        for l in [-8.0, 0.3, 50.0] {
            let (c, dc, s, ds) = fundamental(2.0, l);
            assert!((c * ds - dc * s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_and_mixed_intervals() {
        let dd = secular_oracle(&edge_with(make_dirichlet, make_dirichlet), -10.0, 100.0).unwrap();
        assert_eq!(dd.eigenvalues.len(), 3);
        for (k, l) in dd.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((l - exact).abs() < 1e-8, "{l} vs {exact}");
        }
        let dn = secular_oracle(&edge_with(make_dirichlet, make_neumann), -10.0, 100.0).unwrap();
        let want: Vec<f64> = (1..=3).map(|k| ((k as f64 - 0.5) * PI).powi(2)).collect();
        assert_eq!(dn.eigenvalues.len(), want.len());
        for (l, w) in dn.eigenvalues.iter().zip(&want) {
            assert!((l - w).abs() < 1e-8);
        }
        let nn = secular_oracle(&edge_with(make_neumann, make_neumann), -10.0, 5.0).unwrap();
        assert_eq!(nn.eigenvalues.len(), 1);
        assert!(nn.eigenvalues[0].abs() < 1e-8);
    }

    #[test]
    fn square_cycle_with_and_without_flux() {
        let plain = secular_oracle(&square(), -1.0, 3.0).unwrap();
        assert_eq!(plain.eigenvalues.len(), 3);
        assert!(plain.eigenvalues[0].abs() < 1e-8);
        let q = (PI / 2.0).powi(2);
        assert!((plain.eigenvalues[1] - q).abs() < 1e-8 && (plain.eigenvalues[2] - q).abs() < 1e-8);
        let flux = square().with_phases(vec![PI, 0.0, 0.0, 0.0]).unwrap();
        let s = secular_oracle(&flux, -1.0, 3.0).unwrap();
        let q = (PI / 4.0).powi(2);
        assert_eq!(s.eigenvalues.len(), 2);
        assert!(s.eigenvalues.iter().all(|l| (l - q).abs() < 1e-8));
        assert!(s.flagged.is_empty());
    }

    #[test]
    fn refuses_large_graphs() {
        let edges = (0..9).map(|i| EdgeId::new(LatticeSite::new(vec![i]).unwrap(), 1).unwrap());
        let g = Arc::new(MetricSubgraph::from_edges(1, edges).unwrap());
        let data = OperatorData::uniform(g, StepPotential::zero(), make_kirchhoff).unwrap();
        assert!(matches!(secular_oracle(&data, 0.0, 1.0), Err(Error::OracleUnsupported(_))));
    }
}
