//! Summary maps from samples to dimension-0 persistence diagrams.
//!
//! Three constructions are provided:
//!
//! * Vietoris–Rips in dimension 0 for point clouds in `R^p`, read off the
//!   Euclidean minimum spanning tree;
//! * superlevel-set persistence of a 1D Gaussian kernel density estimate
//!   evaluated on a grid;
//! * sublevel-set persistence of the 1D empirical distance-to-a-measure.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagram::{InfiniteBarPolicy, Orientation, PersistenceDiagram, PersistencePair};
use crate::error::{Error, Result};

/// Uniform partition of `[lo, hi]` into `n_nodes` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_nodes: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n_nodes: usize) -> Result<Self> {
        let grid = Self { lo, hi, n_nodes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!(
                "grid bounds must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.n_nodes < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 nodes, got {}",
                self.n_nodes
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n_nodes)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// Parses `lo:hi:n`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid must be lo:hi:n, got {s:?}")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("grid bound {p:?}: {e}")))
        };
        let n = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("grid node count {:?}: {e}", parts[2])))?;
        Self::new(num(parts[0])?, num(parts[1])?, n)
    }
}

/// An ordered, nonempty set of points in `R^p`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidCloud("empty point cloud".into()))?;
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidCloud("points have differing dimensions".into()));
        }
        Self::from_flat(dim, points.into_iter().flatten().collect())
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("points must have dimension >= 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::InvalidCloud("empty point cloud".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_1d(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// All values of coordinate `k` (zero-based).
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points().map(|p| p[k]).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Reads a CSV with columns `y1..yp`; `t` and `z` columns are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let columns = outcome_columns(&headers)?;
        let mut coords = Vec::new();
        for record in r.records() {
            let record = record?;
            for &c in &columns {
                coords.push(parse_f64(&record[c])?);
            }
        }
        Self::from_flat(columns.len(), coords)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((1..=self.dim).map(|k| format!("y{k}")))?;
        for p in self.points() {
            w.write_record(p.iter().map(f64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Indices of the `y1..yp` columns, in order.
pub(crate) fn outcome_columns(headers: &csv::StringRecord) -> Result<Vec<usize>> {
    let mut columns = Vec::new();
    for k in 1.. {
        let name = format!("y{k}");
        match headers.iter().position(|h| h.trim() == name) {
            Some(c) => columns.push(c),
            None => break,
        }
    }
    if columns.is_empty() {
        return Err(Error::Parse(format!("no y1..yp columns in header {headers:?}")));
    }
    Ok(columns)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum.sqrt()
}

/// Which filtration the summary map uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    VietorisRips0D,
    /// Gaussian KDE superlevel sets. `None` fields fall back to Silverman's
    /// bandwidth and a 512-node grid over the sample range padded by 3h.
    DensitySuperlevel1D {
        bandwidth: Option<f64>,
        grid: Option<GridSpec>,
    },
    DtmSublevel1D {
        mass_fraction: f64,
        grid: Option<GridSpec>,
    },
}

impl fmt::Display for SummaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryKind::VietorisRips0D => write!(f, "vr0"),
            SummaryKind::DensitySuperlevel1D { bandwidth: None, .. } => write!(f, "kde"),
            SummaryKind::DensitySuperlevel1D { bandwidth: Some(h), .. } => write!(f, "kde:{h}"),
            SummaryKind::DtmSublevel1D { mass_fraction, .. } => write!(f, "dtm:{mass_fraction}"),
        }
    }
}

impl FromStr for SummaryKind {
    type Err = Error;

    /// Parses `vr0`, `kde`, `kde:<bandwidth>` or `dtm:<m0>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let kind = match (name.to_ascii_lowercase().as_str(), arg) {
            ("vr0", None) => SummaryKind::VietorisRips0D,
            ("kde", None) => SummaryKind::DensitySuperlevel1D {
                bandwidth: None,
                grid: None,
            },
            ("kde", Some(h)) => SummaryKind::DensitySuperlevel1D {
                bandwidth: Some(parse_f64(h)?),
                grid: None,
            },
            ("dtm", Some(m)) => SummaryKind::DtmSublevel1D {
                mass_fraction: parse_f64(m)?,
                grid: None,
            },
            _ => return Err(Error::Parse(format!("unknown summary {s:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl SummaryKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SummaryKind::VietorisRips0D => Ok(()),
            SummaryKind::DensitySuperlevel1D { bandwidth, grid } => {
                if let Some(h) = bandwidth {
                    if !(h.is_finite() && h > 0.0) {
                        return Err(Error::InvalidConfig(format!("bandwidth must be > 0, got {h}")));
                    }
                }
                grid.map_or(Ok(()), |g| g.validate())
            }
            SummaryKind::DtmSublevel1D { mass_fraction, grid } => {
                if !(mass_fraction > 0.0 && mass_fraction < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "mass fraction must lie in (0, 1), got {mass_fraction}"
                    )));
                }
                grid.map_or(Ok(()), |g| g.validate())
            }
        }
    }

    /// Replaces the evaluation grid of a 1D kind; no-op for `VietorisRips0D`.
    pub fn with_grid(self, grid: GridSpec) -> Self {
        match self {
            SummaryKind::VietorisRips0D => self,
            SummaryKind::DensitySuperlevel1D { bandwidth, .. } => SummaryKind::DensitySuperlevel1D {
                bandwidth,
                grid: Some(grid),
            },
            SummaryKind::DtmSublevel1D { mass_fraction, .. } => SummaryKind::DtmSublevel1D {
                mass_fraction,
                grid: Some(grid),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub kind: SummaryKind,
    pub infinite_bar_policy: InfiniteBarPolicy,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            kind: SummaryKind::VietorisRips0D,
            infinite_bar_policy: InfiniteBarPolicy::Dropped,
        }
    }
}

impl SummaryConfig {
    pub fn new(kind: SummaryKind) -> Self {
        Self {
            kind,
            infinite_bar_policy: InfiniteBarPolicy::Dropped,
        }
    }
}

/// Applies the summary map to a cloud. The 1D kinds use the first coordinate.
pub fn summarize(cloud: &PointCloud, config: &SummaryConfig) -> Result<PersistenceDiagram> {
    match config.kind {
        SummaryKind::VietorisRips0D => Ok(vr0_diagram(cloud, config.infinite_bar_policy)),
        SummaryKind::DensitySuperlevel1D { .. } => {
            density_superlevel_diagram_1d(&cloud.coordinate(0), config)
        }
        SummaryKind::DtmSublevel1D { .. } => dtm_sublevel_diagram_1d(&cloud.coordinate(0), config),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Minimum spanning tree of the complete Euclidean graph (dense Prim),
/// returned with edges sorted by ascending length.
pub fn euclidean_mst(cloud: &PointCloud) -> Vec<MstEdge> {
    let n = cloud.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);

    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let here = cloud.point(current);
        let mut next = usize::MAX;
        let mut next_len = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = euclidean(here, cloud.point(j));
            if d < best[j] {
                best[j] = d;
                parent[j] = current;
            }
            if best[j] < next_len || next == usize::MAX {
                next_len = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: parent[next],
            b: next,
            length: next_len,
        });
        current = next;
    }
    edges.sort_by(|x, y| x.length.total_cmp(&y.length));
    edges
}

/// Dimension-0 Vietoris–Rips diagram: one `(0, ℓ)` pair per MST edge length
/// plus the essential component, resolved by `policy`.
pub fn vr0_diagram(cloud: &PointCloud, policy: InfiniteBarPolicy) -> PersistenceDiagram {
    let mut pairs: Vec<PersistencePair> = euclidean_mst(cloud)
        .into_iter()
        .map(|e| PersistencePair::new(0.0, e.length))
        .collect();
    pairs.push(PersistencePair::essential(0.0));
    PersistenceDiagram::raw(0, pairs, Orientation::Sublevel)
        .expect("MST edge lengths are finite and nonnegative")
        .apply_policy(policy)
}

/// Union-find with path compression and union by rank.
#[derive(Clone, Debug)]
pub(crate) struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Merges the two sets and returns the new root.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        a
    }
}

/// Dimension-0 persistence of a function on a path graph (grid adjacency).
///
/// With `superlevel` the nodes enter in descending value; otherwise ascending.
/// Ties enter by lower node index. When two components meet, the one born at
/// the less extreme value dies (equal birth values: the later-born node dies).
/// Zero-persistence pairs are omitted; the surviving component is reported as
/// an essential pair.
pub fn grid_persistence_1d(values: &[f64], superlevel: bool) -> Result<PersistenceDiagram> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite grid function value".into()));
    }
    let orientation = if superlevel {
        Orientation::Superlevel
    } else {
        Orientation::Sublevel
    };
    let n = values.len();
    if n == 0 {
        return PersistenceDiagram::raw(0, Vec::new(), orientation);
    }

    let mut order: Vec<usize> = (0..n).collect();
    if superlevel {
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    } else {
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    }
    // Rank in entry order doubles as the "age" of a component's birth node.
    let mut entry = vec![usize::MAX; n];
    for (rank, &i) in order.iter().enumerate() {
        entry[i] = rank;
    }

    let mut sets = DisjointSet::new(n);
    // Birth node of the component rooted at each root.
    let mut birth_node: Vec<usize> = (0..n).collect();
    let mut pairs = Vec::new();

    for &i in &order {
        let level = values[i];
        let neighbors = [i.checked_sub(1), (i + 1 < n).then_some(i + 1)];
        for j in neighbors.into_iter().flatten() {
            if entry[j] > entry[i] {
                continue;
            }
            let (ri, rj) = (sets.find(i), sets.find(j));
            if ri == rj {
                continue;
            }
            if birth_node[ri] == i {
                // `i` is still a singleton that has not been born: absorb it.
                let root = sets.union(ri, rj);
                birth_node[root] = birth_node[rj];
                continue;
            }
            let (bi, bj) = (birth_node[ri], birth_node[rj]);
            let (elder, younger) = if entry[bi] < entry[bj] { (bi, bj) } else { (bj, bi) };
            let born = values[younger];
            if born != level {
                pairs.push(if superlevel {
                    PersistencePair::new(level, born)
                } else {
                    PersistencePair::new(born, level)
                });
            }
            let root = sets.union(ri, rj);
            birth_node[root] = elder;
        }
    }

    let root = sets.find(order[0]);
    pairs.push(PersistencePair::essential(values[birth_node[root]]));
    PersistenceDiagram::raw(0, pairs, orientation)
}

/// Silverman's rule `1.06 · sd · n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidConfig("Silverman's rule needs at least 2 samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::InvalidConfig("samples have zero spread".into()));
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate evaluated at `points`.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, points: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Empirical distance-to-a-measure with `k0 = ceil(m0 · n)` neighbours.
pub fn dtm_1d(samples: &[f64], mass_fraction: f64, points: &[f64]) -> Vec<f64> {
    let k0 = neighbor_count(samples.len(), mass_fraction);
    let mut sq = vec![0.0; samples.len()];
    points
        .iter()
        .map(|&x| {
            for (d, &s) in sq.iter_mut().zip(samples) {
                *d = (x - s) * (x - s);
            }
            sq.sort_by(f64::total_cmp);
            (sq[..k0].iter().sum::<f64>() / k0 as f64).sqrt()
        })
        .collect()
}

fn neighbor_count(n: usize, mass_fraction: f64) -> usize {
    ((mass_fraction * n as f64).ceil() as usize).clamp(1, n.max(1))
}

fn sample_range(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidCloud("non-finite sample".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn check_coverage(grid: &GridSpec, need_lo: f64, need_hi: f64) -> Result<()> {
    let slack = 1e-12 * (1.0 + need_lo.abs().max(need_hi.abs()));
    if grid.lo > need_lo + slack || grid.hi < need_hi - slack {
        return Err(Error::Coverage {
            lo: grid.lo,
            hi: grid.hi,
            need_lo,
            need_hi,
        });
    }
    Ok(())
}

pub const DEFAULT_FILTRATION_NODES: usize = 512;

/// Superlevel persistence of the Gaussian KDE of `samples` on a grid.
pub fn density_superlevel_diagram_1d(
    samples: &[f64],
    config: &SummaryConfig,
) -> Result<PersistenceDiagram> {
    let SummaryKind::DensitySuperlevel1D { bandwidth, grid } = config.kind else {
        return Err(Error::InvalidConfig(format!(
            "density superlevel diagram requested with summary {}",
            config.kind
        )));
    };
    config.kind.validate()?;
    if samples.len() < 2 {
        return Err(Error::InvalidCloud("density estimate needs at least 2 samples".into()));
    }
    let (lo, hi) = sample_range(samples)?;
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(samples)?,
    };
    let grid = match grid {
        Some(g) => g,
        None => GridSpec::new(lo - 3.0 * h, hi + 3.0 * h, DEFAULT_FILTRATION_NODES)?,
    };
    check_coverage(&grid, lo - 3.0 * h, hi + 3.0 * h)?;
    let density = gaussian_kde(samples, h, &grid.nodes());
    Ok(grid_persistence_1d(&density, true)?.apply_policy(config.infinite_bar_policy))
}

/// Sublevel persistence of the empirical distance-to-a-measure on a grid.
pub fn dtm_sublevel_diagram_1d(samples: &[f64], config: &SummaryConfig) -> Result<PersistenceDiagram> {
    let SummaryKind::DtmSublevel1D { mass_fraction, grid } = config.kind else {
        return Err(Error::InvalidConfig(format!(
            "DTM sublevel diagram requested with summary {}",
            config.kind
        )));
    };
    config.kind.validate()?;
    if samples.len() < 2 {
        return Err(Error::InvalidCloud("distance-to-measure needs at least 2 samples".into()));
    }
    let (lo, hi) = sample_range(samples)?;
    let grid = match grid {
        Some(g) => g,
        None => {
            let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.5 };
            GridSpec::new(lo - pad, hi + pad, DEFAULT_FILTRATION_NODES)?
        }
    };
    check_coverage(&grid, lo, hi)?;
    let dtm = dtm_1d(samples, mass_fraction, &grid.nodes());
    Ok(grid_persistence_1d(&dtm, false)?.apply_policy(config.infinite_bar_policy))
}
