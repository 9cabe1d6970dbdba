//! Compressed sparse row storage, reverse Cuthill-McKee ordering and a banded
//! Hermitian LDL* factorization without pivoting.

use std::collections::VecDeque;

use crate::linalg::{Breakdown, CMatrix, Inertia, C64, ZERO};

/// Square complex matrix in CSR form with sorted, merged column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => ZERO,
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `x^H A y`.
    pub fn form(&self, x: &[C64], y: &[C64]) -> C64 {
        (0..self.n)
            .map(|i| x[i].conj() * self.row(i).map(|(j, v)| v * y[j]).sum::<C64>())
            .sum()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal(&self, idx: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in idx.iter().enumerate() {
            map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, &old_i) in idx.iter().enumerate() {
            for (j, v) in self.row(old_i) {
                if map[j] != usize::MAX {
                    trip.push((new_i, map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(idx.len(), trip)
    }

    /// Connected components of the symmetric sparsity graph, each sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut q = VecDeque::from([s]);
            while let Some(i) = q.pop_front() {
                for (j, _) in self.row(i) {
                    if !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                        q.push_back(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm_ordering(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut dist = vec![usize::MAX; n];
    // returns (eccentricity, a node of minimal degree in the last level)
    let mut bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        let mut touched = vec![start];
        dist[start] = 0;
        let mut head = 0;
        while head < touched.len() {
            let i = touched[head];
            head += 1;
            for &j in &adj[i] {
                if dist[j] == usize::MAX && !visited[j] {
                    dist[j] = dist[i] + 1;
                    touched.push(j);
                }
            }
        }
        let ecc = dist[*touched.last().unwrap()];
        let best = touched
            .iter()
            .copied()
            .filter(|&i| dist[i] == ecc)
            .min_by_key(|&i| (deg[i], i))
            .unwrap_or(start);
        for &i in &touched {
            dist[i] = usize::MAX;
        }
        (ecc, best)
    };
    for s in 0..n {
        if visited[s] {
            continue;
        }
        // pseudo-peripheral start
        let mut root = s;
        let (mut ecc, mut cand) = bfs_levels(root, &visited);
        for _ in 0..8 {
            let (e2, c2) = bfs_levels(cand, &visited);
            if e2 <= ecc {
                break;
            }
            root = cand;
            ecc = e2;
            cand = c2;
        }
        let start = order.len();
        visited[root] = true;
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let i = order[head];
            head += 1;
            let mut nb: Vec<usize> = adj[i].iter().copied().filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (deg[j], j));
            for j in nb {
                if !visited[j] {
                    visited[j] = true;
                    order.push(j);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Ordering and half-bandwidth for a sparsity pattern.
#[derive(Clone, Debug)]
pub struct BandOrdering {
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    /// `inv[old] = new`.
    pub inv: Vec<usize>,
    pub bandwidth: usize,
}

impl BandOrdering {
    pub fn for_pattern(m: &CsrMatrix) -> Self {
        Self::from_adjacency(&m.adjacency())
    }

    pub fn from_adjacency(adj: &[Vec<usize>]) -> Self {
        let perm = rcm_ordering(adj);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let bandwidth = adj
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
            .map(|(i, j)| inv[i].abs_diff(inv[j]))
            .max()
            .unwrap_or(0);
        Self {
            perm,
            inv,
            bandwidth,
        }
    }
}

/// Hermitian band matrix, lower band stored row-wise: entry `(i, j)` with
/// `i - bw <= j <= i` lives at `i * (bw + 1) + (j + bw - i)`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![ZERO; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are folded onto their
    /// conjugate position.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        if j > i {
            return;
        }
        debug_assert!(i - j <= self.bw, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Band of `sum_t c_t A_t` reordered by `ord`, reading lower triangles.
    pub fn combine(parts: &[(&CsrMatrix, C64)], ord: &BandOrdering) -> Self {
        let n = ord.perm.len();
        let mut b = Self::zeros(n, ord.bandwidth);
        for &(m, c) in parts {
            for old_i in 0..m.dim() {
                let i = ord.inv[old_i];
                for (old_j, v) in m.row(old_i) {
                    let j = ord.inv[old_j];
                    if j <= i {
                        b.add(i, j, c * v);
                    }
                }
            }
        }
        b
    }

    pub fn scale_estimate(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// In-place LDL* without pivoting.
    pub fn factor(mut self, rel_tol: f64) -> Result<BandLdl, Breakdown> {
        let (n, bw) = (self.n, self.bw);
        let tiny = rel_tol * self.scale_estimate().max(f64::MIN_POSITIVE);
        let mut d = vec![0.0; n];
        let mut inertia = Inertia::default();
        let w = bw + 1;
        // row-oriented: for each row i compute L(i, j) for j in [i-bw, i)
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                // s = A(i,j) - sum_{k} L(i,k) d_k conj(L(j,k)), k in [max(i,j)-bw, j)
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[i * w + (j + bw - i)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= self.data[ri + k] * d[k] * self.data[rj + k].conj();
                }
                self.data[ri + j] = s / d[j];
            }
            let ri = i * w + bw - i;
            let mut s = self.data[ri + i].re;
            for k in j0..i {
                s -= self.data[ri + k].norm_sqr() * d[k];
            }
            if s.abs() <= tiny || !s.is_finite() {
                return Err(Breakdown { pivot: s, index: i });
            }
            d[i] = s;
            if s < 0.0 {
                inertia.negative += 1;
            } else {
                inertia.positive += 1;
            }
            self.data[ri + i] = C64::new(1.0, 0.0);
        }
        Ok(BandLdl {
            band: self,
            d,
            inertia,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BandLdl {
    band: BandMatrix,
    d: Vec<f64>,
    inertia: Inertia,
}

impl BandLdl {
    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Solve in the band's own (permuted) ordering.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let (n, bw) = (self.band.n, self.band.bw);
        let w = bw + 1;
        let data = &self.band.data;
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= data[ri + k] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let ri = i * w + bw - i;
            for k in i.saturating_sub(bw)..i {
                x[k] -= data[ri + k].conj() * xi;
            }
        }
    }

    /// Solve for a right-hand side in the original ordering.
    pub fn solve(&self, ord: &BandOrdering, b: &[C64]) -> Vec<C64> {
        let mut x: Vec<C64> = ord.perm.iter().map(|&old| b[old]).collect();
        self.solve_in_place(&mut x);
        let mut out = vec![ZERO; b.len()];
        for (new, &old) in ord.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
