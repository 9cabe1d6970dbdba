use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise constant potential on the unit edge: `values[i]` on
/// `(breakpoints[i], breakpoints[i + 1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct StepPotential {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepPotential {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let k = values.len();
        if k == 0 || breakpoints.len() != k + 1 {
            return Err(Error::InvalidArgument(
                "a step potential needs k >= 1 values and k + 1 breakpoints".into(),
            ));
        }
        if breakpoints[0] != 0.0 || breakpoints[k] != 1.0 {
            return Err(Error::InvalidArgument("breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("potential values must be finite".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            values: vec![value],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_pieces(&self) -> usize {
        self.values.len()
    }

    /// `(start, end, value)` for each constant piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.breakpoints[i], self.breakpoints[i + 1], v))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.values.as_slice() {
            [v] => Some(*v),
            vs if vs.iter().all(|v| *v == vs[0]) => Some(vs[0]),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Right-continuous evaluation on `[0, 1]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.values.len();
        let i = self.breakpoints[1..k].partition_point(|&b| b <= t);
        self.values[i.min(k - 1)]
    }

    /// Bit pattern identifying the potential exactly.
    pub fn key(&self) -> Vec<u64> {
        self.breakpoints
            .iter()
            .chain(&self.values)
            .map(|x| x.to_bits())
            .collect()
    }

    /// Pointwise sum.
    pub fn add(&self, other: &StepPotential) -> StepPotential {
        let mut bps: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let values = bps
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.value_at(mid) + other.value_at(mid)
            })
            .collect();
        StepPotential {
            breakpoints: bps,
            values,
        }
    }
}

/// Config form of a potential: a number or explicit steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Constant(f64),
    Steps { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl TryFrom<PotentialSpec> for StepPotential {
    type Error = Error;

    fn try_from(s: PotentialSpec) -> Result<Self> {
        match s {
            PotentialSpec::Constant(v) => {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument("potential values must be finite".into()));
                }
                Ok(StepPotential::constant(v))
            }
            PotentialSpec::Steps { breakpoints, values } => StepPotential::new(breakpoints, values),
        }
    }
}

impl From<StepPotential> for PotentialSpec {
    fn from(p: StepPotential) -> Self {
        match p.values.as_slice() {
            [v] => PotentialSpec::Constant(*v),
            _ => PotentialSpec::Steps {
                breakpoints: p.breakpoints,
                values: p.values,
            },
        }
    }
}
