//! Self-adjoint vertex conditions `A f(v) + B f'(v) = 0` on the boundary data
//! of the edge-ends meeting at a vertex, with `f'` the inward derivative.
//!
//! Rows and columns follow the canonical incidence order of the vertex. The
//! admissible boundary data form the kernel of `[A | B]`, which equals the
//! range of `[-B*; A*]` whenever `A B*` is Hermitian and `[A | B]` has full
//! rank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    fro, hermitian_eigen, hermitian_part, numerical_rank, projection_distance, pseudo_inverse,
    range_basis, CMatrix, C64, ONE,
};

/// Relative tolerance for the rank and Hermiticity checks.
pub const CONDITION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct VertexCondition {
    a: CMatrix,
    b: CMatrix,
}

impl VertexCondition {
    /// Shape-checked pair; validity is not enforced (see [`validate`]).
    pub fn from_matrices(a: CMatrix, b: CMatrix) -> Result<Self> {
        if !a.is_square() || a.shape() != b.shape() {
            return Err(Error::DimensionMismatch(format!(
                "condition matrices {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::DimensionMismatch("degree must be at least 1".into()));
        }
        Ok(Self { a, b })
    }

    /// Shape-checked and validated.
    pub fn checked(a: CMatrix, b: CMatrix) -> Result<Self> {
        let c = Self::from_matrices(a, b)?;
        let v = validate(&c);
        if !v.is_valid() {
            return Err(Error::InvalidCondition(v.to_string()));
        }
        Ok(c)
    }

    pub fn degree(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// Orthonormal basis (2δ × δ) of the admissible boundary data `(v, v')`.
    pub fn lagrangian_basis(&self) -> CMatrix {
        let d = self.degree();
        let mut f = CMatrix::zeros(2 * d, d);
        f.view_mut((0, 0), (d, d)).copy_from(&(-self.b.adjoint()));
        f.view_mut((d, 0), (d, d)).copy_from(&self.a.adjoint());
        range_basis(&f, CONDITION_TOL)
    }

    /// Residual of `A v + B v'` for given boundary data.
    pub fn residual(&self, values: &[C64], derivatives: &[C64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(values);
        let w = nalgebra::DVector::from_column_slice(derivatives);
        (&self.a * v + &self.b * w).norm()
    }
}

/// Outcome of [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub degree: usize,
    pub rank: usize,
    /// `‖A B* - B A*‖_F` relative to `max(1, ‖A‖_F ‖B‖_F)`.
    pub hermitian_defect: f64,
}

impl Validation {
    pub fn rank_ok(&self) -> bool {
        self.rank == self.degree
    }

    pub fn hermitian_ok(&self) -> bool {
        self.hermitian_defect <= CONDITION_TOL
    }

    pub fn is_valid(&self) -> bool {
        self.rank_ok() && self.hermitian_ok()
    }
}

impl std::fmt::Display for Validation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.rank_ok(), self.hermitian_ok()) {
            (true, true) => write!(f, "valid"),
            (false, true) => write!(f, "rank [A|B] = {} < {}", self.rank, self.degree),
            (true, false) => write!(f, "A B* not Hermitian (defect {:.3e})", self.hermitian_defect),
            (false, false) => write!(
                f,
                "rank [A|B] = {} < {} and A B* not Hermitian (defect {:.3e})",
                self.rank, self.degree, self.hermitian_defect
            ),
        }
    }
}

pub fn validate(c: &VertexCondition) -> Validation {
    let d = c.degree();
    let mut ab = CMatrix::zeros(d, 2 * d);
    ab.view_mut((0, 0), (d, d)).copy_from(&c.a);
    ab.view_mut((0, d), (d, d)).copy_from(&c.b);
    let rank = numerical_rank(&ab, CONDITION_TOL);
    let p = &c.a * c.b.adjoint();
    let defect = fro(&(&p - p.adjoint())) / (fro(&c.a) * fro(&c.b)).max(1.0);
    Validation {
        degree: d,
        rank,
        hermitian_defect: defect,
    }
}

/// Validate raw matrices, reporting shape problems as errors.
pub fn validate_matrices(a: &CMatrix, b: &CMatrix) -> Result<Validation> {
    Ok(validate(&VertexCondition::from_matrices(a.clone(), b.clone())?))
}

/// Largest principal-angle sine between the two admissible subspaces.
pub fn subspace_distance(c1: &VertexCondition, c2: &VertexCondition) -> f64 {
    if c1.degree() != c2.degree() {
        return 1.0;
    }
    projection_distance(&c1.lagrangian_basis(), &c2.lagrangian_basis())
}

pub fn subspace_equal(c1: &VertexCondition, c2: &VertexCondition) -> bool {
    c1.degree() == c2.degree() && subspace_distance(c1, c2) < CONDITION_TOL
}

pub fn make_dirichlet(degree: usize) -> VertexCondition {
    VertexCondition {
        a: CMatrix::identity(degree, degree),
        b: CMatrix::zeros(degree, degree),
    }
}

pub fn make_neumann(degree: usize) -> VertexCondition {
    VertexCondition {
        a: CMatrix::zeros(degree, degree),
        b: CMatrix::identity(degree, degree),
    }
}

pub fn make_kirchhoff(degree: usize) -> VertexCondition {
    make_delta(degree, 0.0)
}

/// Continuity plus `Σ f' = α f(v)`.
pub fn make_delta(degree: usize, alpha: f64) -> VertexCondition {
    let d = degree;
    let mut a = CMatrix::zeros(d, d);
    let mut b = CMatrix::zeros(d, d);
    for k in 0..d - 1 {
        a[(k, k)] = ONE;
        a[(k, k + 1)] = -ONE;
    }
    for k in 0..d {
        a[(d - 1, k)] = C64::new(-alpha / d as f64, 0.0);
        b[(d - 1, k)] = ONE;
    }
    VertexCondition { a, b }
}

/// Pinned ends (`true`) get `v_i = 0`; the remaining ends are Kirchhoff-coupled
/// among themselves.
pub fn assemble_from_end_flags(pinned: &[bool]) -> VertexCondition {
    let d = pinned.len();
    assert!(d >= 1, "vertex degree must be at least 1");
    let mut a = CMatrix::zeros(d, d);
    let mut b = CMatrix::zeros(d, d);
    let kept: Vec<usize> = (0..d).filter(|&i| !pinned[i]).collect();
    let mut row = 0;
    for i in (0..d).filter(|&i| pinned[i]) {
        a[(row, i)] = ONE;
        row += 1;
    }
    for w in kept.windows(2) {
        a[(row, w[0])] = ONE;
        a[(row, w[1])] = -ONE;
        row += 1;
    }
    if !kept.is_empty() {
        for &i in &kept {
            b[(row, i)] = ONE;
        }
        row += 1;
    }
    debug_assert_eq!(row, d);
    VertexCondition { a, b }
}

/// Projection/coupling normal form of a vertex condition.
///
/// The admissible data are `P_D v = 0`, `P_N v' = 0` and `P_R v' = Λ P_R v`.
/// `basis` is an orthonormal basis of `range(P_N + P_R)` diagonalizing `Λ`,
/// with `theta` the matching coupling values (exactly zero on `range(P_N)`).
#[derive(Clone, Debug)]
pub struct FormTriple {
    pub p_d: CMatrix,
    pub p_n: CMatrix,
    pub p_r: CMatrix,
    pub lam: CMatrix,
    pub basis: CMatrix,
    pub theta: Vec<f64>,
}

impl FormTriple {
    pub fn degree(&self) -> usize {
        self.p_d.nrows()
    }

    /// `P_N + P_R`, the projection onto the admissible values.
    pub fn p_w(&self) -> CMatrix {
        &self.p_n + &self.p_r
    }

    /// Rebuild the full normal form from the three projections and `Λ`,
    /// checking the triple invariants.
    pub fn from_parts(p_d: CMatrix, p_n: CMatrix, p_r: CMatrix, lam: CMatrix) -> Result<Self> {
        let d = p_d.nrows();
        for m in [&p_d, &p_n, &p_r, &lam] {
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch("form triple blocks".into()));
            }
        }
        let tol = 1e-8;
        let id = CMatrix::identity(d, d);
        if fro(&(&p_d + &p_n + &p_r - &id)) > tol
            || fro(&(&p_d * &p_n)) > tol
            || fro(&(&p_d * &p_r)) > tol
            || fro(&(&p_n * &p_r)) > tol
            || fro(&(&lam - lam.adjoint())) > tol * fro(&lam).max(1.0)
        {
            return Err(Error::InvalidCondition("inconsistent form triple".into()));
        }
        let p_w = &p_n + &p_r;
        let q = range_basis(&p_w, 1e-6);
        let lw = hermitian_part(&(q.adjoint() * &lam * &q));
        let (theta, v) = hermitian_eigen(&lw);
        let scale = theta.iter().map(|t| t.abs()).fold(1.0, f64::max);
        let theta = theta
            .into_iter()
            .map(|t| if t.abs() <= CONDITION_TOL * scale { 0.0 } else { t })
            .collect();
        Ok(Self {
            p_d,
            p_n,
            p_r,
            lam,
            basis: q * v,
            theta,
        })
    }
}

pub fn to_form_triple(c: &VertexCondition) -> Result<FormTriple> {
    let v = validate(c);
    if !v.is_valid() {
        return Err(Error::InvalidCondition(v.to_string()));
    }
    let d = c.degree();
    let x = -c.b.adjoint();
    let y = c.a.adjoint();
    // admissible values: range(B*)
    let q = range_basis(&x, CONDITION_TOL);
    let lw = hermitian_part(&(q.adjoint() * &y * pseudo_inverse(&x, CONDITION_TOL) * &q));
    let (theta, vecs) = hermitian_eigen(&lw);
    let scale = theta.iter().map(|t| t.abs()).fold(1.0, f64::max);
    let basis = &q * vecs;
    let mut p_n = CMatrix::zeros(d, d);
    let mut p_r = CMatrix::zeros(d, d);
    let mut lam = CMatrix::zeros(d, d);
    let mut th = Vec::with_capacity(theta.len());
    for (k, &t) in theta.iter().enumerate() {
        let col = basis.column(k);
        let proj = &col * col.adjoint();
        if t.abs() <= CONDITION_TOL * scale {
            p_n += &proj;
            th.push(0.0);
        } else {
            lam += &proj * C64::new(t, 0.0);
            p_r += proj;
            th.push(t);
        }
    }
    let p_d = CMatrix::identity(d, d) - &q * q.adjoint();
    Ok(FormTriple {
        p_d,
        p_n,
        p_r,
        lam,
        basis,
        theta: th,
    })
}

/// `A = P_D - Λ`, `B = P_N + P_R`.
pub fn from_form_triple(t: &FormTriple) -> VertexCondition {
    VertexCondition {
        a: &t.p_d - &t.lam,
        b: t.p_w(),
    }
}

/// Diagonal unitary acting on the edge-ends of one vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTwist {
    entries: Vec<C64>,
}

impl PhaseTwist {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::NonUnitaryTwist);
        }
        Ok(Self { entries })
    }

    /// Entry `e^{i phi}` for each end; start-role ends pass `0`.
    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            entries: phases.iter().map(|&p| C64::from_polar(1.0, p)).collect(),
        }
    }

    pub fn identity(degree: usize) -> Self {
        Self {
            entries: vec![ONE; degree],
        }
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).collect(),
        }
    }
}

/// `Ã = A u`, `B̃ = B u`.
pub fn twist(c: &VertexCondition, u: &PhaseTwist) -> Result<VertexCondition> {
    if u.len() != c.degree() {
        return Err(Error::DimensionMismatch(format!(
            "twist of size {} on a vertex of degree {}",
            u.len(),
            c.degree()
        )));
    }
    let mut a = c.a.clone();
    let mut b = c.b.clone();
    for (j, &z) in u.entries().iter().enumerate() {
        for i in 0..c.degree() {
            a[(i, j)] *= z;
            b[(i, j)] *= z;
        }
    }
    Ok(VertexCondition { a, b })
}

/// Config literal for a condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConditionSpec {
    Dirichlet,
    Neumann,
    Kirchhoff,
    Delta {
        alpha: f64,
    },
    /// Row-major entries given as `[re, im]` pairs.
    Matrix {
        #[serde(rename = "A")]
        a: Vec<Vec<[f64; 2]>>,
        #[serde(rename = "B")]
        b: Vec<Vec<[f64; 2]>>,
    },
}

impl ConditionSpec {
    pub fn build(&self, degree: usize) -> Result<VertexCondition> {
        match self {
            ConditionSpec::Dirichlet => Ok(make_dirichlet(degree)),
            ConditionSpec::Neumann => Ok(make_neumann(degree)),
            ConditionSpec::Kirchhoff => Ok(make_kirchhoff(degree)),
            ConditionSpec::Delta { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::InvalidArgument("delta strength must be finite".into()));
                }
                Ok(make_delta(degree, *alpha))
            }
            ConditionSpec::Matrix { a, b } => {
                let to_mat = |rows: &Vec<Vec<[f64; 2]>>| -> Result<CMatrix> {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::DimensionMismatch("matrix literal is not square".into()));
                    }
                    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
                };
                let (a, b) = (to_mat(a)?, to_mat(b)?);
                if a.nrows() != degree {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix condition of size {} on a vertex of degree {degree}",
                        a.nrows()
                    )));
                }
                VertexCondition::checked(a, b)
            }
        }
    }
}

/// Random valid conditions: a Dirichlet block, a Neumann block and a
/// Robin block `v' = H v` with random Hermitian `H`, mixed by a random
/// unitary.
pub fn random_condition(seed: u64, d: usize) -> VertexCondition {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nd = rng.gen_range(0..=d);
    let nn = rng.gen_range(0..=d - nd);
    let nr = d - nd - nn;
    let h = CMatrix::from_fn(nr, nr, |_, _| {
        C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
    });
    let h = hermitian_part(&h);
    let mut a = CMatrix::zeros(d, d);
    let mut b = CMatrix::zeros(d, d);
    for i in 0..nd {
        a[(i, i)] = ONE;
    }
    for i in nd..nd + nn {
        b[(i, i)] = ONE;
    }
    for i in 0..nr {
        b[(nd + nn + i, nd + nn + i)] = ONE;
        for j in 0..nr {
            a[(nd + nn + i, nd + nn + j)] = -h[(i, j)];
        }
    }
    let g = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let u = g.qr().q();
    // rows mixed by a well-conditioned invertible matrix, columns by the unitary
    let g2 = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let scales = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| {
        C64::new(rng.gen_range(0.5..2.0), 0.0)
    }));
    let r = g2.qr().q() * scales;
    VertexCondition {
        a: &r * &a * u.adjoint(),
        b: &r * &b * u.adjoint(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Admissible data `(v, v')` of a condition directly from its kernel,
    /// computed without the normal form.
    fn kernel_dim(c: &VertexCondition) -> usize {
        let d = c.degree();
        let mut ab = CMatrix::zeros(d, 2 * d);
        ab.view_mut((0, 0), (d, d)).copy_from(c.a());
        ab.view_mut((0, d), (d, d)).copy_from(c.b());
        2 * d - numerical_rank(&ab, 1e-10)
    }

    /// Subspace spanned by the triple's defining equations, assembled
    /// as an explicit stacked kernel.
    fn triple_subspace(t: &FormTriple) -> CMatrix {
        let d = t.degree();
        // rows: P_D v = 0 ; P_N v' = 0 ; P_R v' - Λ v = 0
        let mut m = CMatrix::zeros(3 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&t.p_d);
        m.view_mut((d, d), (d, d)).copy_from(&t.p_n);
        m.view_mut((2 * d, 0), (d, d)).copy_from(&(-&t.lam));
        m.view_mut((2 * d, d), (d, d)).copy_from(&t.p_r);
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let mut cols = Vec::new();
        for k in 0..2 * d {
            let s = if k < svd.singular_values.len() { svd.singular_values[k] } else { 0.0 };
            if s <= 1e-10 * smax.max(1.0) {
                cols.push(vt.row(k).adjoint());
            }
        }
        CMatrix::from_columns(&cols)
    }

    fn cmat(rows: &[&[f64]]) -> CMatrix {
        let n = rows.len();
        CMatrix::from_fn(n, rows[0].len(), |i, j| C64::new(rows[i][j], 0.0))
    }

    #[test]
    fn catalog_is_valid() {
        for d in 1..=8 {
            for c in [
                make_dirichlet(d),
                make_neumann(d),
                make_kirchhoff(d),
                make_delta(d, 2.5),
                make_delta(d, -1.3),
            ] {
                assert!(validate(&c).is_valid(), "degree {d}");
                assert_eq!(kernel_dim(&c), d);
            }
        }
    }

    #[test]
    fn small_catalog_identities() {
        assert!(subspace_equal(&make_kirchhoff(1), &make_neumann(1)));
        for d in 1..6 {
            assert!(subspace_equal(&make_delta(d, 0.0), &make_kirchhoff(d)));
        }
        // delta on one end is Robin: f' = α f
        let c = make_delta(1, 2.0);
        assert!(c.residual(&[C64::new(1.0, 0.0)], &[C64::new(2.0, 0.0)]) < 1e-14);
        // Kirchhoff at an interior point of an interval
        let k = make_kirchhoff(2);
        let v = [C64::new(0.7, 0.0), C64::new(0.7, 0.0)];
        let w = [C64::new(1.5, 0.0), C64::new(-1.5, 0.0)];
        assert!(k.residual(&v, &w) < 1e-14);
    }

    #[test]
    fn validate_examples() {
        let i2 = CMatrix::identity(2, 2);
        let v = validate_matrices(&i2, &i2).unwrap();
        assert!(v.is_valid());
        let a = cmat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let v = validate_matrices(&a, &CMatrix::zeros(2, 2)).unwrap();
        assert!(!v.is_valid());
        assert!(!v.rank_ok());
        assert_eq!(v.rank, 1);
        let b = cmat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let v = validate_matrices(&CMatrix::zeros(2, 2), &b).unwrap();
        assert!(v.hermitian_ok() && !v.rank_ok());
        // non-Hermitian coupling
        let a = cmat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let v = validate_matrices(&a, &i2).unwrap();
        assert!(v.rank_ok() && !v.hermitian_ok());
        assert!(v.to_string().contains("Hermitian"));
        assert!(matches!(
            validate_matrices(&i2, &CMatrix::identity(3, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn triple_of_catalog() {
        let t = to_form_triple(&make_dirichlet(3)).unwrap();
        assert!(fro(&(&t.p_d - CMatrix::identity(3, 3))) < 1e-12);
        assert!(fro(&t.p_n) < 1e-12 && fro(&t.p_r) < 1e-12);
        let t = to_form_triple(&make_neumann(3)).unwrap();
        assert!(fro(&(&t.p_n - CMatrix::identity(3, 3))) < 1e-12);
        assert!(fro(&t.p_d) < 1e-12 && fro(&t.p_r) < 1e-12);

        let (d, alpha) = (4, 3.0);
        let c = make_delta(d, alpha);
        let t = to_form_triple(&c).unwrap();
        let ones = CMatrix::from_element(d, 1, C64::new(1.0 / (d as f64).sqrt(), 0.0));
        let pc = &ones * ones.adjoint();
        assert!(fro(&(&t.p_r - &pc)) < 1e-10);
        assert!(fro(&(&t.p_d - (CMatrix::identity(d, d) - &pc))) < 1e-10);
        assert!(fro(&t.p_n) < 1e-10);
        // coupling on the unit constant vector: α/δ, i.e. α |c|^2 for f ≡ c
        assert_eq!(t.theta.len(), 1);
        assert!((t.theta[0] - alpha / d as f64).abs() < 1e-12);
        let rebuilt = triple_subspace(&t);
        assert!(projection_distance(&rebuilt, &c.lagrangian_basis()) < 1e-9);
        assert!(subspace_equal(&from_form_triple(&t), &c));
    }

    #[test]
    fn twist_examples() {
        let u = PhaseTwist::from_phases(&[0.0, 1.1, -0.4]);
        assert!(subspace_equal(&twist(&make_dirichlet(3), &u).unwrap(), &make_dirichlet(3)));
        assert!(subspace_equal(&twist(&make_neumann(3), &u).unwrap(), &make_neumann(3)));
        let k = make_kirchhoff(3);
        let tk = twist(&k, &u).unwrap();
        assert!(validate(&tk).is_valid());
        assert!(!subspace_equal(&tk, &k));
        let back = twist(&tk, &u.adjoint()).unwrap();
        assert!(subspace_equal(&back, &k));
        assert!(matches!(
            PhaseTwist::new(vec![C64::new(0.5, 0.0)]),
            Err(Error::NonUnitaryTwist)
        ));
        assert!(twist(&k, &PhaseTwist::identity(2)).is_err());
    }

    #[test]
    fn end_flag_blocks() {
        assert!(subspace_equal(&assemble_from_end_flags(&[false; 4]), &make_kirchhoff(4)));
        assert!(subspace_equal(&assemble_from_end_flags(&[true; 4]), &make_dirichlet(4)));
        // ends 1, 2 pinned, end 3 Neumann
        let explicit = VertexCondition::checked(
            cmat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]),
            cmat(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]),
        )
        .unwrap();
        let c = assemble_from_end_flags(&[true, true, false]);
        assert!(validate(&c).is_valid());
        assert!(subspace_equal(&c, &explicit));
    }

    #[test]
    fn spec_literals() {
        let s: ConditionSpec = serde_json::from_str(r#"{"kind":"delta","alpha":1.5}"#).unwrap();
        assert!(subspace_equal(&s.build(3).unwrap(), &make_delta(3, 1.5)));
        let s: ConditionSpec = serde_json::from_str(
            r#"{"kind":"matrix","A":[[[1,0],[0,0]],[[0,0],[1,0]]],"B":[[[0,0],[0,0]],[[0,0],[0,0]]]}"#,
        )
        .unwrap();
        assert!(subspace_equal(&s.build(2).unwrap(), &make_dirichlet(2)));
        assert!(s.build(3).is_err());
        let bad: ConditionSpec = serde_json::from_str(
            r#"{"kind":"matrix","A":[[[0,0],[1,0]],[[0,0],[0,0]]],"B":[[[0,0],[0,0]],[[0,0],[0,0]]]}"#,
        )
        .unwrap();
        assert!(matches!(bad.build(2), Err(Error::InvalidCondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn form_triple_round_trip(seed in any::<u64>(), d in 1usize..=6) {
            let c = random_condition(seed, d);
            prop_assert!(validate(&c).is_valid());
            let t = to_form_triple(&c).unwrap();
            let rebuilt = triple_subspace(&t);
            prop_assert_eq!(rebuilt.ncols(), d);
            prop_assert!(projection_distance(&rebuilt, &c.lagrangian_basis()) < 1e-9);
            let c2 = from_form_triple(&t);
            prop_assert!(validate(&c2).is_valid());
            prop_assert!(subspace_distance(&c2, &c) < 1e-9);
        }

        #[test]
        fn twist_is_group_action(seed in any::<u64>(), d in 1usize..=6,
                                 p1 in prop::collection::vec(-7.0f64..7.0, 6),
                                 p2 in prop::collection::vec(-7.0f64..7.0, 6)) {
            let c = random_condition(seed, d);
            let u1 = PhaseTwist::from_phases(&p1[..d]);
            let u2 = PhaseTwist::from_phases(&p2[..d]);
            let lhs = twist(&c, &u1.compose(&u2)).unwrap();
            let rhs = twist(&twist(&c, &u2).unwrap(), &u1).unwrap();
            prop_assert!(validate(&lhs).is_valid());
            prop_assert!(subspace_distance(&lhs, &rhs) < 1e-9);
            let back = twist(&twist(&c, &u1).unwrap(), &u1.adjoint()).unwrap();
            prop_assert!(subspace_distance(&back, &c) < 1e-9);
        }
    }
}
