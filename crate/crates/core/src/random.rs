//! Seeded random colourings of `Z^d`, the percolation ensembles, realization
//! of operator data on a region, and cube-pattern statistics.
//!
//! The symbol at a site is a pure function of the master seed and the site:
//! a ChaCha8 generator seeded from the master seed is switched to a stream
//! identified by the packed coordinates, and the site's uniforms are read
//! from the start of that stream. `d` potential draws come first, followed by
//! the condition draws of the ensemble.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    assemble_from_end_flags, make_dirichlet, make_kirchhoff, to_form_triple, ConditionSpec,
    VertexCondition,
};
use crate::error::{Error, Result};
use crate::lattice::{induced_subgraph, EndRole, LatticeSite, Region, MAX_DIM};
use crate::spectral::operator::OperatorData;
use crate::spectral::potential::StepPotential;

/// Condition part of a site symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionSymbol {
    /// Index into the ensemble's condition alphabet.
    Label(u16),
    /// Bit `j - 1` set: edge `[x, x + e_j]` is cut off by Dirichlet ends.
    EdgeFlags(u8),
    /// Bit `2(j - 1)` for the end `+j` at `x`, bit `2(j - 1) + 1` for `-j`.
    JunctionFlags(u16),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteSymbol {
    /// Index into the potential alphabet per direction `1..=d`.
    pub potentials: Vec<u16>,
    pub condition: ConditionSymbol,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Iid,
    SitePercolation { p: f64 },
    EdgePercolation { p0: f64 },
    JunctionPercolation { p: f64 },
}

/// Distribution of the site symbols.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    kind: EnsembleKind,
    d: usize,
    potentials: Vec<Arc<StepPotential>>,
    potential_cdf: Vec<f64>,
    conditions: Vec<ConditionSpec>,
    condition_cdf: Vec<f64>,
    seed: u64,
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(())
}

fn cdf(weights: &[f64], allow_zero: bool) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::InvalidEnsemble("empty alphabet".into()));
    }
    if weights
        .iter()
        .any(|&w| !w.is_finite() || w < 0.0 || (!allow_zero && w == 0.0))
    {
        return Err(Error::InvalidEnsemble("weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidEnsemble(format!("weights sum to {total}, not 1")));
    }
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    *out.last_mut().unwrap() = 1.0;
    Ok(out)
}

fn pick(cdf: &[f64], u: f64) -> u16 {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u16
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

impl EnsembleSpec {
    /// General i.i.d. colouring over finite alphabets.
    pub fn iid(
        d: usize,
        potentials: Vec<(StepPotential, f64)>,
        conditions: Vec<(ConditionSpec, f64)>,
        seed: u64,
    ) -> Result<Self> {
        check_dim(d)?;
        let potential_cdf = cdf(&potentials.iter().map(|p| p.1).collect::<Vec<_>>(), false)?;
        let condition_cdf = cdf(&conditions.iter().map(|p| p.1).collect::<Vec<_>>(), false)?;
        // catch malformed condition literals up front
        for (c, _) in &conditions {
            c.build(2 * d)?;
        }
        Ok(Self {
            kind: EnsembleKind::Iid,
            d,
            potentials: potentials.into_iter().map(|p| Arc::new(p.0)).collect(),
            potential_cdf,
            conditions: conditions.into_iter().map(|c| c.0).collect(),
            condition_cdf,
            seed,
        })
    }

    fn zero_potential(d: usize, kind: EnsembleKind, seed: u64) -> Self {
        Self {
            kind,
            d,
            potentials: vec![Arc::new(StepPotential::zero())],
            potential_cdf: vec![1.0],
            conditions: Vec::new(),
            condition_cdf: Vec::new(),
            seed,
        }
    }

    /// Kirchhoff with probability `p`, else Dirichlet, at every site.
    pub fn site_percolation(d: usize, p: f64, seed: u64) -> Result<Self> {
        check_dim(d)?;
        check_probability(p)?;
        let mut s = Self::zero_potential(d, EnsembleKind::SitePercolation { p }, seed);
        s.conditions = vec![ConditionSpec::Kirchhoff, ConditionSpec::Dirichlet];
        s.condition_cdf = cdf(&[p, 1.0 - p], true)?;
        Ok(s)
    }

    /// Each anchored edge is kept with probability `p0` and cut off by
    /// Dirichlet ends otherwise.
    pub fn edge_percolation(d: usize, p0: f64, seed: u64) -> Result<Self> {
        check_dim(d)?;
        check_probability(p0)?;
        Ok(Self::zero_potential(d, EnsembleKind::EdgePercolation { p0 }, seed))
    }

    /// Each edge-end at each site is pinned with probability `1 - p`.
    pub fn junction_percolation(d: usize, p: f64, seed: u64) -> Result<Self> {
        check_dim(d)?;
        check_probability(p)?;
        Ok(Self::zero_potential(d, EnsembleKind::JunctionPercolation { p }, seed))
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.seed = seed;
        s
    }

    pub fn potential_alphabet(&self) -> &[Arc<StepPotential>] {
        &self.potentials
    }

    pub fn condition_alphabet(&self) -> &[ConditionSpec] {
        &self.conditions
    }

    /// Largest sup-norm in the potential alphabet.
    pub fn potential_bound(&self) -> f64 {
        self.potentials.iter().map(|p| p.sup_norm()).fold(0.0, f64::max)
    }

    fn needs_neighbours(&self) -> bool {
        matches!(
            self.kind,
            EnsembleKind::EdgePercolation { .. } | EnsembleKind::JunctionPercolation { .. }
        )
    }

    /// Symbol at `x`, computed statelessly.
    pub fn symbol_at(&self, x: &LatticeSite) -> Result<SiteSymbol> {
        if x.dim() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "site of dimension {} for an ensemble in dimension {}",
                x.dim(),
                self.d
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id(x.coords())?);
        let potentials = (0..self.d)
            .map(|_| pick(&self.potential_cdf, rng.gen::<f64>()))
            .collect();
        let condition = match self.kind {
            EnsembleKind::Iid | EnsembleKind::SitePercolation { .. } => {
                ConditionSymbol::Label(pick(&self.condition_cdf, rng.gen::<f64>()))
            }
            EnsembleKind::EdgePercolation { p0 } => {
                let mut bits = 0u8;
                for j in 0..self.d {
                    if rng.gen::<f64>() < 1.0 - p0 {
                        bits |= 1 << j;
                    }
                }
                ConditionSymbol::EdgeFlags(bits)
            }
            EnsembleKind::JunctionPercolation { p } => {
                let mut bits = 0u16;
                for k in 0..2 * self.d {
                    if rng.gen::<f64>() < 1.0 - p {
                        bits |= 1 << k;
                    }
                }
                ConditionSymbol::JunctionFlags(bits)
            }
        };
        Ok(SiteSymbol {
            potentials,
            condition,
        })
    }
}

/// Injective packing of coordinates into a 64-bit stream id.
pub fn stream_id(coords: &[i64]) -> Result<u64> {
    let d = coords.len();
    let bits = 64 / d as u32;
    if d == 1 {
        return Ok(coords[0] as u64);
    }
    let half = 1i64 << (bits - 1);
    let mut id = 0u64;
    for &c in coords {
        if c < -half || c >= half {
            return Err(Error::OutOfDomain);
        }
        id = (id << bits) | (c + half) as u64;
    }
    Ok(id)
}

/// Config form of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnsembleConfig {
    Iid {
        potentials: Vec<Weighted<StepPotential>>,
        conditions: Vec<Weighted<ConditionSpec>>,
    },
    Site {
        p: f64,
    },
    Edge {
        p0: f64,
    },
    Junction {
        p: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weighted<T> {
    pub value: T,
    pub weight: f64,
}

impl EnsembleConfig {
    pub fn build(&self, d: usize, seed: u64) -> Result<EnsembleSpec> {
        match self {
            EnsembleConfig::Iid {
                potentials,
                conditions,
            } => EnsembleSpec::iid(
                d,
                potentials.iter().map(|w| (w.value.clone(), w.weight)).collect(),
                conditions.iter().map(|w| (w.value.clone(), w.weight)).collect(),
                seed,
            ),
            EnsembleConfig::Site { p } => EnsembleSpec::site_percolation(d, *p, seed),
            EnsembleConfig::Edge { p0 } => EnsembleSpec::edge_percolation(d, *p0, seed),
            EnsembleConfig::Junction { p } => EnsembleSpec::junction_percolation(d, *p, seed),
        }
    }
}

/// Site symbols on a finite domain.
#[derive(Clone, Debug)]
pub struct Colouring {
    d: usize,
    spec: Option<Arc<EnsembleSpec>>,
    symbols: HashMap<LatticeSite, SiteSymbol>,
}

/// Symbols of `spec` on `region` dilated by `margin`.
pub fn sample(spec: &EnsembleSpec, region: &Region, margin: u32) -> Result<Colouring> {
    if region.dim() != spec.d {
        return Err(Error::DimensionMismatch("region and ensemble dimensions differ".into()));
    }
    let domain = region.dilate(margin);
    let sites: Vec<LatticeSite> = domain.sites().cloned().collect();
    let symbols = sites
        .par_iter()
        .map(|x| spec.symbol_at(x).map(|s| (x.clone(), s)))
        .collect::<Result<HashMap<_, _>>>()?;
    Ok(Colouring {
        d: spec.d,
        spec: Some(Arc::new(spec.clone())),
        symbols,
    })
}

/// Which conditions non-inner vertices receive in [`realize_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Dirichlet at every boundary vertex.
    #[default]
    Dirichlet,
    /// Apply the colouring rule at boundary vertices too, restricted to the
    /// ends present in the subgraph. Experimental.
    FromColouring,
}

impl Colouring {
    /// Explicit colouring without a generating ensemble.
    pub fn from_symbols(d: usize, symbols: impl IntoIterator<Item = (LatticeSite, SiteSymbol)>) -> Self {
        Self {
            d,
            spec: None,
            symbols: symbols.into_iter().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn spec(&self) -> Option<&EnsembleSpec> {
        self.spec.as_deref()
    }

    pub fn get(&self, x: &LatticeSite) -> Option<&SiteSymbol> {
        self.symbols.get(x)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn contains(&self, x: &LatticeSite) -> bool {
        self.symbols.contains_key(x)
    }

    fn require(&self, x: &LatticeSite) -> Result<&SiteSymbol> {
        self.symbols
            .get(x)
            .ok_or_else(|| Error::MissingMargin(format!("no symbol at {:?}", x.coords())))
    }
}

/// Operator data on `Q` with Dirichlet at the boundary vertices.
pub fn realize(colouring: &Colouring, region: &Region) -> Result<OperatorData> {
    realize_with(colouring, region, BoundaryPolicy::Dirichlet)
}

pub fn realize_with(
    colouring: &Colouring,
    region: &Region,
    policy: BoundaryPolicy,
) -> Result<OperatorData> {
    let spec = colouring
        .spec()
        .ok_or_else(|| Error::InvalidEnsemble("colouring has no generating ensemble".into()))?;
    let d = spec.d;
    if region.dim() != d {
        return Err(Error::DimensionMismatch("region and colouring dimensions differ".into()));
    }
    let required = if spec.needs_neighbours() {
        region.dilate(1)
    } else {
        region.clone()
    };
    for x in required.sites() {
        colouring.require(x)?;
    }
    let graph = Arc::new(induced_subgraph(region));
    let potentials = graph
        .edges()
        .iter()
        .map(|e| {
            let s = colouring.require(&e.anchor)?;
            Ok(spec.potentials[s.potentials[e.direction - 1] as usize].clone())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut dirichlet: HashMap<usize, Arc<VertexCondition>> = HashMap::new();
    let mut labelled: HashMap<(u16, usize), Arc<VertexCondition>> = HashMap::new();
    let mut flagged: HashMap<Vec<bool>, Arc<VertexCondition>> = HashMap::new();
    let mut conditions = Vec::with_capacity(graph.num_vertices());
    for (vi, v) in graph.vertices().iter().enumerate() {
        let deg = graph.degree(vi);
        let inner = graph.is_inner_vertex(vi);
        if !inner && policy == BoundaryPolicy::Dirichlet {
            conditions.push(
                dirichlet
                    .entry(deg)
                    .or_insert_with(|| Arc::new(make_dirichlet(deg)))
                    .clone(),
            );
            continue;
        }
        let c = match spec.kind {
            EnsembleKind::Iid | EnsembleKind::SitePercolation { .. } => {
                let label = match colouring.get(v).map(|s| s.condition) {
                    Some(ConditionSymbol::Label(l)) => l,
                    Some(_) => return Err(Error::InvalidEnsemble("symbol kind mismatch".into())),
                    None => {
                        // boundary vertex outside the sampled domain
                        conditions.push(Arc::new(make_dirichlet(deg)));
                        continue;
                    }
                };
                match labelled.get(&(label, deg)) {
                    Some(c) => c.clone(),
                    None => {
                        let c = Arc::new(spec.conditions[label as usize].build(deg)?);
                        labelled.insert((label, deg), c.clone());
                        c
                    }
                }
            }
            EnsembleKind::EdgePercolation { .. } | EnsembleKind::JunctionPercolation { .. } => {
                let mut pinned = Vec::with_capacity(deg);
                for inc in graph.incidence(vi) {
                    let e = &graph.edges()[inc.edge];
                    let j = e.direction;
                    let flag = match (spec.kind, inc.role) {
                        (EnsembleKind::EdgePercolation { .. }, _) => {
                            match colouring.require(&e.anchor)?.condition {
                                ConditionSymbol::EdgeFlags(b) => b & (1 << (j - 1)) != 0,
                                _ => return Err(Error::InvalidEnsemble("symbol kind mismatch".into())),
                            }
                        }
                        (_, role) => match colouring.require(v)?.condition {
                            ConditionSymbol::JunctionFlags(b) => {
                                let bit = 2 * (j - 1) + usize::from(role == EndRole::End);
                                b & (1 << bit) != 0
                            }
                            _ => return Err(Error::InvalidEnsemble("symbol kind mismatch".into())),
                        },
                    };
                    pinned.push(flag);
                }
                match flagged.get(&pinned) {
                    Some(c) => c.clone(),
                    None => {
                        let c = Arc::new(assemble_from_end_flags(&pinned));
                        flagged.insert(pinned, c.clone());
                        c
                    }
                }
            }
        };
        conditions.push(c);
    }
    let mut full_rules: HashMap<u16, Vec<bool>> = HashMap::new();
    let artificial = (0..graph.num_vertices())
        .map(|vi| {
            if graph.is_inner_vertex(vi) {
                return Ok(vec![false; graph.degree(vi)]);
            }
            graph
                .incidence(vi)
                .iter()
                .map(|inc| Ok(!pinned_in_lattice(colouring, spec, &graph, vi, inc, &mut full_rules)?))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    OperatorData::new(graph, potentials, conditions)?.with_artificial_ends(artificial)
}

/// Whether the colouring rule on the full star of `v` pins the end `inc` to
/// zero and decouples it from the other ends.
fn pinned_in_lattice(
    colouring: &Colouring,
    spec: &EnsembleSpec,
    graph: &crate::lattice::MetricSubgraph,
    vi: usize,
    inc: &crate::lattice::Incidence,
    full_rules: &mut HashMap<u16, Vec<bool>>,
) -> Result<bool> {
    let d = spec.d;
    let e = &graph.edges()[inc.edge];
    let j = e.direction;
    let v = &graph.vertices()[vi];
    if matches!(spec.kind, EnsembleKind::EdgePercolation { .. }) {
        return Ok(match colouring.get(&e.anchor).map(|s| s.condition) {
            Some(ConditionSymbol::EdgeFlags(b)) => b & (1 << (j - 1)) != 0,
            _ => false,
        });
    }
    Ok(match colouring.get(v).map(|s| s.condition) {
        None => false,
        Some(ConditionSymbol::Label(l)) => {
            if !full_rules.contains_key(&l) {
                let c = spec.conditions[l as usize].build(2 * d)?;
                let t = to_form_triple(&c)?;
                let pins = (0..2 * d).map(|s| (t.p_d[(s, s)].re - 1.0).abs() < 1e-8).collect();
                full_rules.insert(l, pins);
            }
            let slot = match inc.role {
                EndRole::Start => j - 1,
                EndRole::End => d + j - 1,
            };
            full_rules[&l][slot]
        }
        Some(ConditionSymbol::JunctionFlags(b)) => {
            let bit = 2 * (j - 1) + usize::from(inc.role == EndRole::End);
            b & (1 << bit) != 0
        }
        Some(ConditionSymbol::EdgeFlags(_)) => false,
    })
}

/// Cube pattern anchored at the origin.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern {
    pub d: usize,
    pub side: usize,
    /// Symbols over `C_side` in lexicographic offset order.
    pub symbols: Vec<SiteSymbol>,
}

impl Pattern {
    /// Symbol at an offset inside the cube.
    pub fn symbol(&self, offset: &[i64]) -> &SiteSymbol {
        let m = self.side as i64;
        let idx = offset.iter().fold(0i64, |acc, &c| acc * m + c);
        &self.symbols[idx as usize]
    }

    /// Colouring on `C_side` carrying this pattern.
    pub fn to_colouring(&self, spec: &EnsembleSpec) -> Colouring {
        let offsets = cube_offsets(self.d, self.side);
        let symbols = offsets
            .into_iter()
            .zip(&self.symbols)
            .map(|(o, s)| (LatticeSite::new(o).expect("valid dimension"), s.clone()));
        Colouring {
            d: self.d,
            spec: Some(Arc::new(spec.clone())),
            symbols: symbols.collect(),
        }
    }
}

fn cube_offsets(d: usize, side: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(d)];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..side as i64).map(move |c| {
                    let mut v = p.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

fn window(colouring: &Colouring, x: &LatticeSite, offsets: &[Vec<i64>]) -> Option<Vec<SiteSymbol>> {
    offsets
        .iter()
        .map(|o| colouring.get(&x.translate(o)).cloned())
        .collect()
}

/// Pattern of the window `x + C_side`.
pub fn pattern_at(colouring: &Colouring, x: &LatticeSite, side: usize) -> Result<Pattern> {
    if side == 0 {
        return Err(Error::InvalidArgument("pattern side must be >= 1".into()));
    }
    let offsets = cube_offsets(colouring.d, side);
    let symbols = window(colouring, x, &offsets).ok_or(Error::OutOfDomain)?;
    Ok(Pattern {
        d: colouring.d,
        side,
        symbols,
    })
}

/// Number of `x` in `Q` whose window lies in the sampled domain and matches.
pub fn count_occurrences(pattern: &Pattern, colouring: &Colouring, region: &Region) -> u64 {
    let offsets = cube_offsets(colouring.d, pattern.side);
    region
        .sites()
        .filter(|x| window(colouring, x, &offsets).as_deref() == Some(pattern.symbols.as_slice()))
        .count() as u64
}

/// Occurrence counts of all observed `side`-patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    pub side: usize,
    pub counts: BTreeMap<Pattern, u64>,
    /// Admissible window positions.
    pub windows: u64,
}

impl FrequencyTable {
    pub fn frequency(&self, p: &Pattern) -> f64 {
        if self.windows == 0 {
            return 0.0;
        }
        self.counts.get(p).copied().unwrap_or(0) as f64 / self.windows as f64
    }

    /// `(pattern, estimated frequency)` in pattern order.
    pub fn frequencies(&self) -> impl Iterator<Item = (&Pattern, f64)> {
        let w = self.windows.max(1) as f64;
        self.counts.iter().map(move |(p, &c)| (p, c as f64 / w))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn frequency_table(colouring: &Colouring, region: &Region, side: usize) -> Result<FrequencyTable> {
    if side == 0 {
        return Err(Error::InvalidArgument("pattern side must be >= 1".into()));
    }
    let offsets = cube_offsets(colouring.d, side);
    let sites: Vec<&LatticeSite> = region.sites().collect();
    let partial: Vec<(HashMap<Vec<SiteSymbol>, u64>, u64)> = sites
        .par_chunks(4096)
        .map(|chunk| {
            let mut map: HashMap<Vec<SiteSymbol>, u64> = HashMap::new();
            let mut n = 0u64;
            for x in chunk {
                if let Some(w) = window(colouring, x, &offsets) {
                    *map.entry(w).or_insert(0) += 1;
                    n += 1;
                }
            }
            (map, n)
        })
        .collect();
    let mut counts = BTreeMap::new();
    let mut windows = 0;
    for (map, n) in partial {
        windows += n;
        for (symbols, c) in map {
            *counts
                .entry(Pattern {
                    d: colouring.d,
                    side,
                    symbols,
                })
                .or_insert(0) += c;
        }
    }
    Ok(FrequencyTable {
        side,
        counts,
        windows,
    })
}

/// Kirchhoff everywhere inside, for tests and deterministic chains.
pub fn kirchhoff_condition(d: usize) -> VertexCondition {
    make_kirchhoff(2 * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{make_neumann, subspace_equal};
    use crate::lattice::cube_region;

    fn site(c: &[i64]) -> LatticeSite {
        LatticeSite::new(c.to_vec()).unwrap()
    }

    fn label(l: u16) -> SiteSymbol {
        SiteSymbol {
            potentials: vec![0],
            condition: ConditionSymbol::Label(l),
        }
    }

    fn alternating(n: i64) -> Colouring {
        Colouring::from_symbols(1, (0..n).map(|i| (site(&[i]), label((i % 2) as u16))))
    }

    #[test]
    fn degenerate_site_percolation() {
        let q = cube_region(1, 50).unwrap();
        for (p, want) in [(1.0, 0u16), (0.0, 1u16)] {
            let spec = EnsembleSpec::site_percolation(1, p, 9).unwrap();
            let col = sample(&spec, &q, 0).unwrap();
            for x in q.sites() {
                assert_eq!(col.get(x).unwrap().condition, ConditionSymbol::Label(want));
            }
        }
        assert!(matches!(
            EnsembleSpec::site_percolation(1, 1.5, 0),
            Err(Error::ProbabilityOutOfRange(_))
        ));
        assert!(EnsembleSpec::edge_percolation(1, -0.1, 0).is_err());
        assert!(EnsembleSpec::junction_percolation(2, f64::NAN, 0).is_err());
    }

    #[test]
    fn sampling_is_pure() {
        let spec = EnsembleSpec::site_percolation(2, 0.4, 123).unwrap();
        let a = sample(&spec, &cube_region(2, 6).unwrap(), 1).unwrap();
        let shifted = cube_region(2, 6).unwrap().translate(&[3, 2]);
        let b = sample(&spec, &shifted, 0).unwrap();
        let mut overlap = 0;
        for (x, s) in &b.symbols {
            if let Some(t) = a.get(x) {
                assert_eq!(s, t);
                overlap += 1;
            }
        }
        assert!(overlap > 0);
        assert_eq!(spec.symbol_at(&site(&[1, 1])).unwrap(), spec.symbol_at(&site(&[1, 1])).unwrap());
    }

    #[test]
    fn stream_ids_are_injective_on_small_boxes() {
        let mut seen = std::collections::HashSet::new();
        for x in -5..5 {
            for y in -5..5 {
                assert!(seen.insert(stream_id(&[x, y]).unwrap()));
            }
        }
        assert_ne!(stream_id(&[-1]).unwrap(), stream_id(&[1]).unwrap());
        assert!(stream_id(&[1 << 40, 0]).is_err());
    }

    #[test]
    fn site_marginal() {
        let spec = EnsembleSpec::site_percolation(1, 0.3, 2024).unwrap();
        let q = cube_region(1, 100_000).unwrap();
        let col = sample(&spec, &q, 0).unwrap();
        let k = q
            .sites()
            .filter(|x| col.get(x).unwrap().condition == ConditionSymbol::Label(0))
            .count() as f64
            / q.len() as f64;
        assert!((k - 0.3).abs() < 0.01, "fraction {k}");
        let spec = EnsembleSpec::site_percolation(1, 0.5, 1).unwrap();
        assert_eq!(spec.condition_cdf, vec![0.5, 1.0]);
    }

    #[test]
    fn edge_symbol_product_law() {
        // P(S = (1, 1)) = (1 - p0)^2 over many sites
        let p0 = 0.6;
        let spec = EnsembleSpec::edge_percolation(2, p0, 5).unwrap();
        let q = cube_region(2, 200).unwrap();
        let col = sample(&spec, &q, 0).unwrap();
        let both = q
            .sites()
            .filter(|x| col.get(x).unwrap().condition == ConditionSymbol::EdgeFlags(0b11))
            .count() as f64
            / q.len() as f64;
        let p1 = 1.0 - p0;
        let se = (p1 * p1 * (1.0 - p1 * p1) / q.len() as f64).sqrt();
        assert!((both - p1 * p1).abs() < 4.0 * se, "{both}");
    }

    #[test]
    fn realize_site_chain() {
        let spec = EnsembleSpec::site_percolation(1, 1.0, 0).unwrap();
        let q = cube_region(1, 3).unwrap();
        let col = sample(&spec, &q, 1).unwrap();
        let data = realize(&col, &q).unwrap();
        let g = data.graph();
        for v in 0..g.num_vertices() {
            let want = if g.is_inner_vertex(v) {
                make_kirchhoff(2)
            } else {
                make_dirichlet(1)
            };
            assert!(subspace_equal(data.condition(v), &want));
        }
        assert!(data.dirichlet_on_boundary());
    }

    #[test]
    fn realize_edge_percolation_reads_neighbours() {
        let spec = EnsembleSpec::edge_percolation(1, 0.5, 77).unwrap();
        let q = cube_region(1, 30).unwrap();
        assert!(matches!(realize(&sample(&spec, &q, 0).unwrap(), &q), Err(Error::MissingMargin(_))));
        let col = sample(&spec, &q, 1).unwrap();
        let data = realize(&col, &q).unwrap();
        let g = data.graph();
        for v in 0..g.num_vertices() {
            if !g.is_inner_vertex(v) {
                continue;
            }
            let x = &g.vertices()[v];
            let cut = |y: &LatticeSite| {
                matches!(col.get(y).unwrap().condition, ConditionSymbol::EdgeFlags(1))
            };
            let pinned = [cut(x), cut(&x.step(1, -1))];
            assert!(subspace_equal(data.condition(v), &assemble_from_end_flags(&pinned)));
        }
        let spec = EnsembleSpec::edge_percolation(1, 1.0, 77).unwrap();
        let data = realize(&sample(&spec, &q, 1).unwrap(), &q).unwrap();
        for v in 0..data.graph().num_vertices() {
            if data.graph().is_inner_vertex(v) {
                assert!(subspace_equal(data.condition(v), &make_kirchhoff(2)));
            }
        }
    }

    #[test]
    fn junction_single_flag() {
        // only +1 pinned at x: the outgoing end is Dirichlet, the incoming end Neumann
        let spec = EnsembleSpec::junction_percolation(1, 0.5, 0).unwrap();
        let q = cube_region(1, 3).unwrap();
        let mut col = sample(&spec, &q, 1).unwrap();
        let x = site(&[1]);
        col.symbols.insert(
            x.clone(),
            SiteSymbol {
                potentials: vec![0],
                condition: ConditionSymbol::JunctionFlags(0b01),
            },
        );
        let data = realize(&col, &q).unwrap();
        let v = data.graph().vertex_index(&x).unwrap();
        let c = data.condition(v);
        // ends ordered (+1 start, -1 end)
        let explicit = assemble_from_end_flags(&[true, false]);
        assert!(subspace_equal(c, &explicit));
        let f = [num_complex::Complex64::new(0.0, 0.0), num_complex::Complex64::new(0.4, 0.0)];
        let g = [num_complex::Complex64::new(2.0, 0.0), num_complex::Complex64::new(0.0, 0.0)];
        assert!(c.residual(&f, &g) < 1e-14);
        assert!(subspace_equal(&make_neumann(1), &assemble_from_end_flags(&[false])));
    }

    #[test]
    fn all_flags() {
        let q = cube_region(2, 4).unwrap();
        for (p, kirchhoff) in [(1.0, true), (0.0, false)] {
            let spec = EnsembleSpec::junction_percolation(2, p, 3).unwrap();
            let data = realize(&sample(&spec, &q, 1).unwrap(), &q).unwrap();
            for v in 0..data.graph().num_vertices() {
                if data.graph().is_inner_vertex(v) {
                    let want = if kirchhoff { make_kirchhoff(4) } else { make_dirichlet(4) };
                    assert!(subspace_equal(data.condition(v), &want));
                }
            }
        }
    }

    #[test]
    fn patterns_on_alternating_colouring() {
        let col = alternating(6);
        let ab = pattern_at(&col, &site(&[0]), 2).unwrap();
        let ba = pattern_at(&col, &site(&[1]), 2).unwrap();
        assert_eq!(ab.symbols, vec![label(0), label(1)]);
        assert_ne!(ab, ba);
        assert_eq!(pattern_at(&col, &site(&[3]), 1).unwrap().symbols, vec![label(1)]);
        assert!(matches!(pattern_at(&col, &site(&[5]), 2), Err(Error::OutOfDomain)));
        let q = cube_region(1, 6).unwrap();
        assert_eq!(count_occurrences(&ab, &col, &q), 3);
        let whole = pattern_at(&col, &site(&[0]), 6).unwrap();
        assert_eq!(count_occurrences(&whole, &col, &q), 1);
        let aa = Pattern {
            d: 1,
            side: 2,
            symbols: vec![label(0), label(0)],
        };
        assert_eq!(count_occurrences(&aa, &col, &q), 0);
    }

    #[test]
    fn frequency_tables() {
        let col = alternating(1001);
        let q = cube_region(1, 1000).unwrap();
        let t = frequency_table(&col, &q, 2).unwrap();
        assert_eq!(t.windows, 1000);
        assert_eq!(t.len(), 2);
        for (_, f) in t.frequencies() {
            assert!((f - 0.5).abs() < 1e-12);
        }
        let spec = EnsembleSpec::site_percolation(1, 0.5, 31).unwrap();
        let q = cube_region(1, 100_000).unwrap();
        let col = sample(&spec, &q, 0).unwrap();
        let t = frequency_table(&col, &q, 1).unwrap();
        let k = t.frequency(&Pattern { d: 1, side: 1, symbols: vec![label(0)] });
        assert!((k - 0.5).abs() < 0.01);
        let t3 = frequency_table(&col, &q, 3).unwrap();
        assert_eq!(t3.windows, 100_000 - 2);
        assert_eq!(t3.counts.values().sum::<u64>(), t3.windows);
        let total: f64 = t3.frequencies().map(|(_, f)| f).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationarity_of_marginals() {
        let spec = EnsembleSpec::site_percolation(1, 0.5, 8).unwrap();
        let q = cube_region(1, 20_000).unwrap();
        let qt = q.translate(&[1_000_003]);
        let f = |r: &Region| {
            let col = sample(&spec, r, 0).unwrap();
            frequency_table(&col, r, 2)
                .unwrap()
                .frequency(&Pattern { d: 1, side: 2, symbols: vec![label(0), label(0)] })
        };
        let (a, b) = (f(&q), f(&qt));
        let se = (2.0f64 * 0.25 * 0.75 / 20_000.0).sqrt();
        assert!((a - b).abs() < 3.0 * se * 2.0, "{a} vs {b}");
    }

    #[test]
    fn config_forms() {
        let c: EnsembleConfig = serde_json::from_str(r#"{"kind":"site","p":0.5}"#).unwrap();
        assert!(matches!(c.build(1, 0).unwrap().kind(), EnsembleKind::SitePercolation { .. }));
        let c: EnsembleConfig = serde_json::from_str(
            r#"{"kind":"iid","potentials":[{"value":0,"weight":0.5},{"value":10,"weight":0.5}],
                "conditions":[{"value":{"kind":"kirchhoff"},"weight":1.0}]}"#,
        )
        .unwrap();
        let s = c.build(2, 4).unwrap();
        assert_eq!(s.potential_bound(), 10.0);
        let bad: EnsembleConfig = serde_json::from_str(
            r#"{"kind":"iid","potentials":[{"value":0,"weight":0.4}],"conditions":[{"value":{"kind":"kirchhoff"},"weight":1.0}]}"#,
        )
        .unwrap();
        assert!(matches!(bad.build(1, 0), Err(Error::InvalidEnsemble(_))));
        assert!(serde_json::from_str::<EnsembleConfig>(r#"{"kind":"site"}"#).is_err());
    }
}
