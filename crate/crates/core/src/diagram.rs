//! Persistence diagrams and the diagram metrics.
//!
//! A diagram is a multiset of `(birth, death)` pairs. Essential classes carry
//! an infinite death until an [`InfiniteBarPolicy`] is applied; every metric
//! in this module requires a finite diagram.
//!
//! Distances use the ∞-norm ground metric, with unmatched points sent to
//! their diagonal projection at cost `(death - birth) / 2`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub birth: f64,
    /// `f64::INFINITY` marks an essential class (serialized as `null`).
    #[serde(with = "death_serde")]
    pub death: f64,
}

impl PersistencePair {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    /// An essential class born at `birth`.
    pub fn essential(birth: f64) -> Self {
        Self {
            birth,
            death: f64::INFINITY,
        }
    }

    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// ∞-norm distance to the nearest point of the diagonal.
    pub fn diagonal_cost(&self) -> f64 {
        0.5 * (self.death - self.birth)
    }

    fn linf(&self, other: &Self) -> f64 {
        (self.birth - other.birth)
            .abs()
            .max((self.death - other.death).abs())
    }
}

mod death_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(death: &f64, s: S) -> Result<S::Ok, S::Error> {
        if death.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*death)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// How the essential class of a diagram was handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteBarPolicy {
    #[default]
    Dropped,
    /// The essential class is closed at the given filtration level.
    CappedAt(f64),
}

impl FromStr for InfiniteBarPolicy {
    type Err = Error;

    /// Parses `drop` or `cap:<level>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("drop") || s.eq_ignore_ascii_case("dropped") {
            return Ok(InfiniteBarPolicy::Dropped);
        }
        match s.split_once(':') {
            Some((name, level)) if name.eq_ignore_ascii_case("cap") => {
                let level: f64 = level
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("cap level {level:?}: {e}")))?;
                if !level.is_finite() {
                    return Err(Error::Parse("cap level must be finite".into()));
                }
                Ok(InfiniteBarPolicy::CappedAt(level))
            }
            _ => Err(Error::Parse(format!("unknown infinite-bar policy {s:?}"))),
        }
    }
}

/// Direction of the filtration that produced a diagram.
///
/// Superlevel diagrams store each pair as `(death level, birth level)` so that
/// `death >= birth` holds for every stored pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Sublevel,
    Superlevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    homology_dim: u8,
    /// `None` while essential classes are still present as infinite bars.
    infinite_bar_policy: Option<InfiniteBarPolicy>,
    #[serde(default)]
    orientation: Orientation,
    pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    /// A finite diagram. Every pair must satisfy `birth <= death < ∞`.
    pub fn new(homology_dim: u8, pairs: Vec<PersistencePair>) -> Result<Self> {
        let diagram = Self {
            homology_dim,
            infinite_bar_policy: Some(InfiniteBarPolicy::Dropped),
            orientation: Orientation::Sublevel,
            pairs,
        };
        diagram.validate()?;
        Ok(diagram)
    }

    /// A diagram that may still contain essential classes.
    pub fn raw(
        homology_dim: u8,
        pairs: Vec<PersistencePair>,
        orientation: Orientation,
    ) -> Result<Self> {
        let diagram = Self {
            homology_dim,
            infinite_bar_policy: None,
            orientation,
            pairs,
        };
        diagram.validate()?;
        Ok(diagram)
    }

    pub fn empty(homology_dim: u8) -> Self {
        Self {
            homology_dim,
            infinite_bar_policy: Some(InfiniteBarPolicy::Dropped),
            orientation: Orientation::Sublevel,
            pairs: Vec::new(),
        }
    }

    /// Resolve essential classes.
    ///
    /// With `CappedAt(c)` an essential class born at `b` becomes `(b, max(b, c))`
    /// for sublevel diagrams and `(min(b, c), b)` for superlevel diagrams.
    pub fn apply_policy(mut self, policy: InfiniteBarPolicy) -> Self {
        match policy {
            InfiniteBarPolicy::Dropped => self.pairs.retain(|p| !p.is_essential()),
            InfiniteBarPolicy::CappedAt(cap) => {
                let orientation = self.orientation;
                for pair in self.pairs.iter_mut().filter(|p| p.is_essential()) {
                    *pair = match orientation {
                        Orientation::Sublevel => PersistencePair::new(pair.birth, pair.birth.max(cap)),
                        Orientation::Superlevel => PersistencePair::new(cap.min(pair.birth), pair.birth),
                    };
                }
            }
        }
        self.infinite_bar_policy = Some(policy);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pairs {
            if p.birth.is_nan() || p.death.is_nan() || !p.birth.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite pair {p:?}")));
            }
            if p.death < p.birth {
                return Err(Error::InvalidConfig(format!("pair {p:?} has death < birth")));
            }
            if p.is_essential() && self.infinite_bar_policy.is_some() {
                return Err(Error::InvalidConfig(
                    "essential bar present after an infinite-bar policy was applied".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn homology_dim(&self) -> u8 {
        self.homology_dim
    }

    pub fn infinite_bar_policy(&self) -> Option<InfiniteBarPolicy> {
        self.infinite_bar_policy
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn has_essential(&self) -> bool {
        self.pairs.iter().any(PersistencePair::is_essential)
    }

    /// Largest finite death, or `None` for a diagram without finite pairs.
    pub fn max_death(&self) -> Option<f64> {
        self.pairs
            .iter()
            .filter(|p| !p.is_essential())
            .map(|p| p.death)
            .fold(None, |acc, d| Some(acc.map_or(d, |m: f64| m.max(d))))
    }

    /// Pairs sorted by `(birth, death)`; handy for multiset comparison.
    pub fn sorted_pairs(&self) -> Vec<PersistencePair> {
        let mut pairs = self.pairs.clone();
        pairs.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
        pairs
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        if self.has_essential() {
            return Err(Error::UnhandledEssentialClass);
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["birth", "death"])?;
        for p in &self.pairs {
            w.write_record([p.birth.to_string(), p.death.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `birth,death` CSV as a finite dimension-0 sublevel diagram.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "birth" || &headers[1] != "death" {
            return Err(Error::Parse(format!("expected header birth,death, got {headers:?}")));
        }
        let mut pairs = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
            };
            pairs.push(PersistencePair::new(parse(&record[0])?, parse(&record[1])?));
        }
        Self::new(0, pairs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let diagram: Self = serde_json::from_str(s)?;
        diagram.validate()?;
        Ok(diagram)
    }
}

/// The diagram metric `d_D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramMetric {
    Bottleneck,
    Wasserstein(f64),
}

impl Default for DiagramMetric {
    fn default() -> Self {
        DiagramMetric::Wasserstein(2.0)
    }
}

impl fmt::Display for DiagramMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagramMetric::Bottleneck => write!(f, "bottleneck"),
            DiagramMetric::Wasserstein(p) => write!(f, "wasserstein:{p}"),
        }
    }
}

impl FromStr for DiagramMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("bottleneck") {
            return Ok(DiagramMetric::Bottleneck);
        }
        let order = match s.split_once(':') {
            Some((name, p)) if name.eq_ignore_ascii_case("wasserstein") => p
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("metric order {p:?}: {e}")))?,
            None if s.eq_ignore_ascii_case("wasserstein") => 2.0,
            _ => return Err(Error::Parse(format!("unknown metric {s:?}"))),
        };
        if !(order.is_finite() && order >= 1.0) {
            return Err(Error::InvalidOrder(order));
        }
        Ok(DiagramMetric::Wasserstein(order))
    }
}

fn check_comparable(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<()> {
    if a.homology_dim != b.homology_dim {
        return Err(Error::DimensionMismatch {
            left: a.homology_dim,
            right: b.homology_dim,
        });
    }
    if a.has_essential() || b.has_essential() {
        return Err(Error::UnhandledEssentialClass);
    }
    Ok(())
}

/// Square cost matrix of the augmented matching problem.
///
/// Rows are the points of `a` followed by one diagonal slot per point of `b`;
/// columns are the points of `b` followed by one diagonal slot per point of `a`.
fn augmented_costs(a: &[PersistencePair], b: &[PersistencePair]) -> (Vec<f64>, usize) {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    let mut costs = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            costs[i * size + j] = match (i < n, j < m) {
                (true, true) => a[i].linf(&b[j]),
                (true, false) => a[i].diagonal_cost(),
                (false, true) => b[j].diagonal_cost(),
                (false, false) => 0.0,
            };
        }
    }
    (costs, size)
}

pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<f64> {
    check_comparable(a, b)?;
    let (costs, size) = augmented_costs(&a.pairs, &b.pairs);
    if size == 0 {
        return Ok(0.0);
    }
    let mut candidates = costs.clone();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // The largest candidate is always feasible.
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if matching::has_perfect_matching(&costs, size, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

pub fn wasserstein_distance(a: &PersistenceDiagram, b: &PersistenceDiagram, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidOrder(p));
    }
    check_comparable(a, b)?;
    let (mut costs, size) = augmented_costs(&a.pairs, &b.pairs);
    if size == 0 {
        return Ok(0.0);
    }
    costs.iter_mut().for_each(|c| *c = c.powf(p));
    let assignment = matching::min_cost_assignment(&costs, size);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * size + j])
        .sum();
    Ok(total.max(0.0).powf(1.0 / p))
}

pub fn diagram_distance(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    metric: DiagramMetric,
) -> Result<f64> {
    match metric {
        DiagramMetric::Bottleneck => bottleneck_distance(a, b),
        DiagramMetric::Wasserstein(p) => wasserstein_distance(a, b, p),
    }
}
