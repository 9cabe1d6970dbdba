//! Dense complex helpers and the symmetric indefinite factorizations used for
//! inertia counts.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Frobenius norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Thin singular value decomposition `A = U diag(s) V*` with descending `s`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided Jacobi SVD; accurate to working precision for the small dense
/// matrices that describe vertex conditions.
pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.adjoint());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let mut w = a.clone();
    let mut v = CMatrix::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = w.column(p).iter().zip(w.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (alpha - beta) / (2.0 * g);
                let t = -zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { -1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let x = mat[(i, p)];
                        let y = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = x * c - y * s;
                        mat[(i, q)] = x * s + y * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = CMatrix::zeros(m, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (c, &k) in order.iter().enumerate() {
        let nk = norms[k];
        s.push(nk);
        if nk > 0.0 {
            u.set_column(c, &(w.column(k) / C64::new(nk, 0.0)));
        }
        vs.set_column(c, &v.column(k));
    }
    Svd { u, s, v: vs }
}

/// Orthonormal basis of the column space, dropping singular values below
/// `rel_tol * max(1, sigma_max)`.
pub fn range_basis(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * smax.max(1.0);
    let r = d.s.iter().filter(|&&s| s > cutoff).count();
    d.u.columns(0, r).into_owned()
}

/// Numerical rank with cutoff `rel_tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m).s
}

pub fn pseudo_inverse(m: &CMatrix, rel_tol: f64) -> CMatrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMatrix::zeros(m.ncols(), m.nrows());
    }
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * smax.max(f64::MIN_POSITIVE);
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in d.s.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        out += d.v.column(k) * d.u.column(k).adjoint() * C64::new(1.0 / s, 0.0);
    }
    out
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Spectral norm of `P1 - P2` for the orthogonal projections onto the column
/// spaces of two orthonormal bases.
pub fn projection_distance(q1: &CMatrix, q2: &CMatrix) -> f64 {
    if q1.ncols() != q2.ncols() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let p = q1 * q1.adjoint() - q2 * q2.adjoint();
    singular_values(&p).first().copied().unwrap_or(0.0)
}

/// Count of negative, zero and positive eigenvalues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub positive: usize,
}

impl Inertia {
    pub fn add(self, other: Inertia) -> Inertia {
        Inertia {
            negative: self.negative + other.negative,
            positive: self.positive + other.positive,
        }
    }
}

/// A pivot fell below the breakdown threshold: the matrix is numerically
/// singular at this shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakdown {
    pub pivot: f64,
    pub index: usize,
}

/// Inertia of a dense Hermitian matrix by Bunch-Kaufman symmetric pivoting.
/// `scale` sets the breakdown threshold `rel_tol * scale`; pass 0 to use the
/// largest entry.
pub fn bunch_kaufman_inertia(
    mut a: CMatrix,
    scale: f64,
    rel_tol: f64,
) -> Result<Inertia, Breakdown> {
    let n = a.nrows();
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let scale = if scale > 0.0 {
        scale
    } else {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    let tiny = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut inertia = Inertia::default();
    let mut k = 0;
    let swap = |a: &mut CMatrix, i: usize, j: usize| {
        if i != j {
            a.swap_rows(i, j);
            a.swap_columns(i, j);
        }
    };
    while k < n {
        let akk = a[(k, k)].re.abs();
        let (mut r, mut colmax) = (k, 0.0);
        for i in k + 1..n {
            let v = a[(i, k)].norm();
            if v > colmax {
                colmax = v;
                r = i;
            }
        }
        if akk.max(colmax) <= tiny {
            return Err(Breakdown {
                pivot: akk.max(colmax),
                index: k,
            });
        }
        let two_by_two;
        if akk >= alpha * colmax {
            two_by_two = false;
        } else {
            let mut rowmax = 0.0f64;
            for j in k..n {
                if j != r {
                    rowmax = rowmax.max(a[(r, j)].norm());
                }
            }
            if akk * rowmax >= alpha * colmax * colmax {
                two_by_two = false;
            } else if a[(r, r)].re.abs() >= alpha * rowmax {
                swap(&mut a, k, r);
                two_by_two = false;
            } else {
                swap(&mut a, k + 1, r);
                two_by_two = true;
            }
        }
        if !two_by_two {
            let d = a[(k, k)].re;
            if d.abs() <= tiny {
                return Err(Breakdown { pivot: d, index: k });
            }
            if d < 0.0 {
                inertia.negative += 1;
            } else {
                inertia.positive += 1;
            }
            for j in k + 1..n {
                let f = a[(j, k)].conj() / d;
                if f == ZERO {
                    continue;
                }
                for i in k + 1..n {
                    let aik = a[(i, k)];
                    a[(i, j)] -= aik * f;
                }
            }
            k += 1;
        } else {
            let d11 = a[(k, k)].re;
            let d22 = a[(k + 1, k + 1)].re;
            let d21 = a[(k + 1, k)];
            let det = d11 * d22 - d21.norm_sqr();
            if det.abs() <= tiny * tiny {
                return Err(Breakdown {
                    pivot: det.abs().sqrt(),
                    index: k,
                });
            }
            if det < 0.0 {
                inertia.negative += 1;
                inertia.positive += 1;
            } else if d11 + d22 < 0.0 {
                inertia.negative += 2;
            } else {
                inertia.positive += 2;
            }
            // inverse of [[d11, conj(d21)], [d21, d22]]
            let i11 = d22 / det;
            let i22 = d11 / det;
            let i12 = -d21.conj() / det;
            let i21 = -d21 / det;
            for j in k + 2..n {
                let bj1 = a[(j, k)].conj();
                let bj2 = a[(j, k + 1)].conj();
                let w1 = i11 * bj1 + i12 * bj2;
                let w2 = i21 * bj1 + i22 * bj2;
                for i in k + 2..n {
                    let ai1 = a[(i, k)];
                    let ai2 = a[(i, k + 1)];
                    a[(i, j)] -= ai1 * w1 + ai2 * w2;
                }
            }
            k += 2;
        }
    }
    Ok(inertia)
}

/// Solve `A x = b` for a small dense complex matrix by LU.
pub fn solve_dense(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    a.clone().lu().solve(b)
}
