//! Right-continuous step functions on a closed λ-range: counting functions,
//! their normalized versions and differences.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jump positions closer than this (relative to `1 + |λ|`) are one jump.
pub const MERGE_TOL: f64 = 1e-12;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn same_range(a: (f64, f64), b: (f64, f64)) -> bool {
    let eq = |x: f64, y: f64| x == y || close(x, y, MERGE_TOL);
    eq(a.0, b.0) && eq(a.1, b.1)
}

/// `offset + Σ_{x_i <= λ} h_i` for `λ` in `[lo, hi]`. Jumps lie in `(lo, hi]`;
/// anything at or below `lo` is folded into the offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    lo: f64,
    hi: f64,
    offset: f64,
    jumps: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn new(lo: f64, hi: f64, offset: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("bad range [{lo}, {hi}]")));
        }
        let mut raw: Vec<(f64, f64)> = jumps.into_iter().collect();
        if raw.iter().any(|j| !j.0.is_finite() || !j.1.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidArgument("jumps must be finite".into()));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut offset = offset;
        let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (x, h) in raw {
            if x <= lo {
                offset += h;
                continue;
            }
            if x > hi {
                break;
            }
            match jumps.last_mut() {
                Some(last) if close(last.0, x, MERGE_TOL) => last.1 += h,
                _ => jumps.push((x, h)),
            }
        }
        jumps.retain(|j| j.1 != 0.0);
        Ok(Self { lo, hi, offset, jumps })
    }

    /// Constant function.
    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(lo, hi, value, [])
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn value(&self, lambda: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.0 <= lambda);
        self.offset + self.jumps[..k].iter().map(|j| j.1).sum::<f64>()
    }

    /// `lim_{μ↑λ} f(μ)`.
    pub fn left_limit(&self, lambda: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.0 < lambda);
        self.offset + self.jumps[..k].iter().map(|j| j.1).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.offset *= c;
        for j in &mut out.jumps {
            j.1 *= c;
        }
        out.jumps.retain(|j| j.1 != 0.0);
        out
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        if !same_range(self.range(), other.range()) {
            return Err(Error::RangeMismatch(format!(
                "[{}, {}] vs [{}, {}]",
                self.lo, self.hi, other.lo, other.hi
            )));
        }
        let jumps = self
            .jumps
            .iter()
            .copied()
            .chain(other.jumps.iter().map(|&(x, h)| (x, sign * h)));
        Self::new(self.lo, self.hi, self.offset + sign * other.offset, jumps)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    /// The same function on a subrange.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        if lo < self.lo || hi > self.hi {
            return Err(Error::RangeMismatch(format!(
                "[{lo}, {hi}] is not inside [{}, {}]",
                self.lo, self.hi
            )));
        }
        Self::new(lo, hi, self.offset, self.jumps.iter().copied())
    }

    /// `sup |f|` over the range, attained at the offset or right after a jump.
    pub fn sup_norm(&self) -> f64 {
        let mut v = self.offset;
        let mut best = v.abs();
        for j in &self.jumps {
            v += j.1;
            best = best.max(v.abs());
        }
        best
    }

    /// Jumps whose positions are within `resolution·(1 + |λ|)` of their
    /// neighbour merged into one, placed at the first position.
    pub fn coarsened(&self, resolution: f64) -> Self {
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        let mut prev = f64::NAN;
        for &(x, h) in &self.jumps {
            match jumps.last_mut() {
                Some(last) if close(prev, x, resolution) => last.1 += h,
                _ => jumps.push((x, h)),
            }
            prev = x;
        }
        jumps.retain(|j| j.1.abs() > 1e-14);
        Self {
            lo: self.lo,
            hi: self.hi,
            offset: self.offset,
            jumps,
        }
    }

    /// Values on a grid.
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&l| self.value(l)).collect()
    }

    /// `lambda,value` rows: the value at the lower end (when finite) and
    /// after every jump.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,value\n");
        let mut v = self.offset;
        if self.lo.is_finite() {
            let _ = writeln!(s, "{},{}", self.lo, v);
        }
        for &(x, h) in &self.jumps {
            v += h;
            let _ = writeln!(s, "{x},{v}");
        }
        s
    }
}

/// Exact `sup |f - g|` over the common range.
pub fn sup_distance(f: &StepFunction, g: &StepFunction) -> Result<f64> {
    Ok(f.sub(g)?.sup_norm())
}

/// `sup |f - g|` after merging jumps of the difference lying within
/// `resolution·(1 + |λ|)` of each other. Comparing a discretized counting
/// function with an exact one, this disregards the thin windows between a
/// discrete eigenvalue and its exact counterpart.
pub fn sup_distance_resolved(f: &StepFunction, g: &StepFunction, resolution: f64) -> Result<f64> {
    Ok(f.sub(g)?.coarsened(resolution).sup_norm())
}

/// Integer eigenvalue counts divided by `rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingFunction {
    rho: f64,
    lo: f64,
    hi: f64,
    base: u64,
    jumps: Vec<(f64, u64)>,
}

impl CountingFunction {
    /// From eigenvalues with multiplicity. Values within `merge_tol·(1 + |λ|)`
    /// of the previous one join its jump.
    pub fn from_eigenvalues(
        eigenvalues: impl IntoIterator<Item = f64>,
        rho: f64,
        lo: f64,
        hi: f64,
        merge_tol: f64,
    ) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument("normalization must be positive".into()));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidArgument(format!("bad range [{lo}, {hi}]")));
        }
        let mut ev: Vec<f64> = eigenvalues.into_iter().collect();
        if ev.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("NaN eigenvalue".into()));
        }
        ev.sort_by(f64::total_cmp);
        let mut base = 0;
        let mut jumps: Vec<(f64, u64)> = Vec::new();
        let mut prev = f64::NAN;
        for x in ev {
            if x <= lo {
                base += 1;
                continue;
            }
            if x > hi {
                break;
            }
            match jumps.last_mut() {
                Some(last) if close(prev, x, merge_tol) => last.1 += 1,
                _ => jumps.push((x, 1)),
            }
            prev = x;
        }
        Ok(Self { rho, lo, hi, base, jumps })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn jumps(&self) -> &[(f64, u64)] {
        &self.jumps
    }

    /// Unnormalized count at `λ`.
    pub fn count(&self, lambda: f64) -> u64 {
        let k = self.jumps.partition_point(|j| j.0 <= lambda);
        self.base + self.jumps[..k].iter().map(|j| j.1).sum::<u64>()
    }

    pub fn left_count(&self, lambda: f64) -> u64 {
        let k = self.jumps.partition_point(|j| j.0 < lambda);
        self.base + self.jumps[..k].iter().map(|j| j.1).sum::<u64>()
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.count(lambda) as f64 / self.rho
    }

    pub fn left_limit(&self, lambda: f64) -> f64 {
        self.left_count(lambda) as f64 / self.rho
    }

    /// The count itself (normalization ignored).
    pub fn raw(&self) -> StepFunction {
        StepFunction {
            lo: self.lo,
            hi: self.hi,
            offset: self.base as f64,
            jumps: self.jumps.iter().map(|&(x, h)| (x, h as f64)).collect(),
        }
    }

    /// The normalized function `count / rho`.
    pub fn normalized(&self) -> StepFunction {
        self.raw().scaled(1.0 / self.rho)
    }

    pub fn to_csv(&self) -> String {
        self.normalized().to_csv()
    }
}
