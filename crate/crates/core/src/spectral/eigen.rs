//! Eigenvalues by spectrum slicing and eigenvectors by shift-invert block
//! iteration, with a dense path for small pencils.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_part, CMatrix, C64, ZERO};
use crate::sparse::{BandMatrix, BandOrdering, CsrMatrix};
use crate::spectral::counting::{count_offset, negatives_near};
use crate::spectral::fem::AssembledPencil;

/// Pencils up to this dimension are solved densely.
pub const DENSE_LIMIT: usize = 400;

/// Eigenvalues in ascending order with multiplicity, and optionally
/// Mass-orthonormal eigenvectors in the same order.
#[derive(Clone, Debug, Default)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Distinct eigenvalues (within `tol`) with multiplicities.
    pub fn clusters(&self, tol: f64) -> Vec<(f64, usize)> {
        group_sorted(&self.eigenvalues, tol)
    }
}

pub(crate) fn group_sorted(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut first = f64::NAN;
    for &v in values {
        match out.last_mut() {
            Some(last) if (v - first).abs() <= tol * (1.0 + v.abs()) => last.1 += 1,
            _ => {
                first = v;
                out.push((v, 1));
            }
        }
    }
    out
}

/// A shift below the whole spectrum.
pub fn spectrum_lower_bound(p: &AssembledPencil) -> Result<f64> {
    let vmin = p
        .kinds
        .iter()
        .flat_map(|k| k.elements.iter().map(|e| e.1))
        .fold(0.0, f64::min);
    let mut lo = vmin - 1.0;
    for _ in 0..80 {
        if negatives_near(p, lo)? == 0 {
            return Ok(lo);
        }
        lo -= 2.0 * (lo.abs() + 1.0);
    }
    Err(Error::SolverFailure("no lower bound for the spectrum".into()))
}

/// Distinct eigenvalues in `(lo, hi]` with multiplicities, located by
/// bisection on inertia counts to `rel_tol * (1 + |λ|)`.
pub fn eigenvalue_clusters(
    p: &AssembledPencil,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<Vec<(f64, usize)>> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("range must be finite".into()));
    }
    if hi <= lo {
        return Ok(Vec::new());
    }
    let a = lo + count_offset(lo);
    let b = hi + count_offset(hi);
    let ca = negatives_near(p, a)?;
    let cb = negatives_near(p, b)?.max(ca);
    let mut out = Vec::new();
    let mut stack = vec![(a, ca, b, cb)];
    while let Some((a, ca, b, cb)) = stack.pop() {
        if cb == ca {
            continue;
        }
        if b - a <= rel_tol * (1.0 + a.abs().max(b.abs())) {
            out.push((0.5 * (a + b), cb - ca));
            continue;
        }
        let m = 0.5 * (a + b);
        // rounding can break monotonicity inside tight clusters
        let cm = negatives_near(p, m)?.clamp(ca, cb);
        stack.push((a, ca, m, cm));
        stack.push((m, cm, b, cb));
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(out)
}

/// All eigenvalues `<= lambda_max` with multiplicity.
pub fn eigenvalues(p: &AssembledPencil, lambda_max: f64) -> Result<Vec<f64>> {
    let lo = spectrum_lower_bound(p)?;
    Ok(eigenvalue_clusters(p, lo, lambda_max, 1e-12)?
        .into_iter()
        .flat_map(|(l, m)| std::iter::repeat(l).take(m))
        .collect())
}

/// Eigenpairs with eigenvalue `<= lambda_max`.
pub fn eigenpairs(p: &AssembledPencil, lambda_max: f64) -> Result<Spectrum> {
    if !lambda_max.is_finite() {
        return Err(Error::InvalidArgument("lambda_max must be finite".into()));
    }
    if p.dim() == 0 {
        return Ok(Spectrum::default());
    }
    if p.dim() <= DENSE_LIMIT {
        let mut s = dense_eigenpairs(p)?;
        let keep = s
            .eigenvalues
            .partition_point(|&l| l <= lambda_max + count_offset(lambda_max));
        s.eigenvalues.truncate(keep);
        s.vectors.truncate(keep);
        return Ok(s);
    }
    sliced_eigenpairs(p, lambda_max)
}

/// The full spectrum of a pencil by dense Cholesky reduction.
pub fn dense_eigenpairs(p: &AssembledPencil) -> Result<Spectrum> {
    let (k, m) = p.matrices();
    let chol = m
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::SolverFailure("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let lk = l
        .solve_lower_triangular(&k.to_dense())
        .ok_or_else(|| Error::SolverFailure("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&lk.adjoint())
        .ok_or_else(|| Error::SolverFailure("singular Cholesky factor".into()))?;
    let (vals, y) = hermitian_eigen(&hermitian_part(&c));
    let x = l
        .adjoint()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::SolverFailure("singular Cholesky factor".into()))?;
    Ok(Spectrum {
        eigenvalues: vals,
        vectors: (0..x.ncols()).map(|j| x.column(j).iter().copied().collect()).collect(),
    })
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Mass-orthonormalize in place (two Gram-Schmidt passes), dropping
/// vectors that become dependent.
fn m_orthonormalize(m: &CsrMatrix, block: &mut Vec<Vec<C64>>) {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(block.len());
    let mut mout: Vec<Vec<C64>> = Vec::with_capacity(block.len());
    for mut x in block.drain(..) {
        let n0 = m.form(&x, &x).re.sqrt();
        for _ in 0..2 {
            for (q, mq) in out.iter().zip(&mout) {
                let c = dot(mq, &x);
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= c * qi;
                }
            }
        }
        let mx = m.mul_vec(&x);
        let nx = dot(&x, &mx).re.max(0.0).sqrt();
        if nx > 1e-10 * n0 && nx > 0.0 {
            out.push(x.iter().map(|z| z / nx).collect());
            mout.push(mx.iter().map(|z| z / nx).collect());
        }
    }
    *block = out;
}

/// Rayleigh-Ritz on an M-orthonormal block: Ritz values ascending and
/// the rotated block.
fn rayleigh_ritz(k: &CsrMatrix, block: &[Vec<C64>]) -> (Vec<f64>, Vec<Vec<C64>>) {
    let b = block.len();
    let kx: Vec<Vec<C64>> = block.iter().map(|x| k.mul_vec(x)).collect();
    let kb = CMatrix::from_fn(b, b, |i, j| dot(&block[i], &kx[j]));
    let (vals, y) = hermitian_eigen(&hermitian_part(&kb));
    let n = block[0].len();
    let rot = (0..b)
        .map(|j| {
            let mut v = vec![ZERO; n];
            for (i, x) in block.iter().enumerate() {
                let c = y[(i, j)];
                for (vi, xi) in v.iter_mut().zip(x) {
                    *vi += c * xi;
                }
            }
            v
        })
        .collect();
    (vals, rot)
}

fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, x: &[C64], l: f64) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: Vec<C64> = kx.iter().zip(&mx).map(|(a, b)| a - b * l).collect();
    norm(&r) / (norm(&kx) + (1.0 + l.abs()) * norm(&mx)).max(f64::MIN_POSITIVE)
}

fn factor_shifted(
    k: &CsrMatrix,
    m: &CsrMatrix,
    ord: &BandOrdering,
    sigma: f64,
) -> Option<crate::sparse::BandLdl> {
    BandMatrix::combine(&[(k, C64::new(1.0, 0.0)), (m, C64::new(-sigma, 0.0))], ord)
        .factor(1e-15)
        .ok()
}

fn sliced_eigenpairs(p: &AssembledPencil, lambda_max: f64) -> Result<Spectrum> {
    let lo = spectrum_lower_bound(p)?;
    let clusters = eigenvalue_clusters(p, lo, lambda_max, 1e-12)?;
    let (k, m) = p.matrices();
    let ord = BandOrdering::for_pattern(k);
    let n = p.dim();
    // group clusters that are too close to separate by one shift
    let mut groups: Vec<Vec<(f64, usize)>> = Vec::new();
    for c in clusters {
        match groups.last_mut() {
            Some(g) if c.0 - g.last().unwrap().0 <= 1e-7 * (1.0 + c.0.abs()) => g.push(c),
            _ => groups.push(vec![c]),
        }
    }
    let mut spectrum = Spectrum::default();
    for (gi, g) in groups.iter().enumerate() {
        let want: usize = g.iter().map(|c| c.1).sum();
        let centre = g.iter().map(|c| c.0 * c.1 as f64).sum::<f64>() / want as f64;
        let scale = 1.0 + centre.abs();
        let mut fact = None;
        for off in [1e-9, 3e-9, 1e-8, 1e-7] {
            if let Some(f) = factor_shifted(k, m, &ord, g[0].0 - off * scale) {
                fact = Some(f);
                break;
            }
        }
        let fact = fact.ok_or_else(|| Error::SolverFailure(format!("cannot factor near {centre}")))?;
        let size = want + want.min(3).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(gi as u64);
        let mut block: Vec<Vec<C64>> = (0..size)
            .map(|_| (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect())
            .collect();
        let mut done = None;
        for _ in 0..40 {
            for x in block.iter_mut() {
                *x = fact.solve(&ord, &m.mul_vec(x));
            }
            m_orthonormalize(m, &mut block);
            if block.len() < want {
                return Err(Error::SolverFailure("block iteration lost rank".into()));
            }
            let (vals, rot) = rayleigh_ritz(k, &block);
            // the `want` Ritz pairs nearest the group
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            idx.sort_by(|&a, &b| (vals[a] - centre).abs().total_cmp(&(vals[b] - centre).abs()));
            idx.truncate(want);
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            let ok = idx
                .iter()
                .all(|&i| relative_residual(k, m, &rot[i], vals[i]) < 1e-10);
            block = rot;
            if ok {
                done = Some(idx.iter().map(|&i| (vals[i], block[i].clone())).collect::<Vec<_>>());
                break;
            }
        }
        let pairs = done.ok_or_else(|| {
            Error::SolverFailure(format!("inverse iteration did not converge near {centre}"))
        })?;
        for (l, x) in pairs {
            spectrum.eigenvalues.push(l);
            spectrum.vectors.push(x);
        }
    }
    Ok(spectrum)
}

/// Largest `|x_i* M x_j - δ_ij|` over a set of vectors.
pub fn mass_orthonormality_defect(m: &CsrMatrix, vectors: &[Vec<C64>]) -> f64 {
    let mv: Vec<Vec<C64>> = vectors.iter().map(|x| m.mul_vec(x)).collect();
    let g = DMatrix::from_fn(vectors.len(), vectors.len(), |i, j| dot(&vectors[i], &mv[j]));
    let mut worst = 0.0f64;
    for i in 0..vectors.len() {
        for j in 0..vectors.len() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(want, 0.0)).norm());
        }
    }
    worst
}
