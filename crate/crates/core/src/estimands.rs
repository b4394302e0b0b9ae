//! Stratified topological effect estimators and their mean-based baselines.
//!
//! Every averaged estimator weights strata by the empirical law of `Z`
//! (pooled stratum size over `N`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagram::{diagram_distance, DiagramMetric, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::filtration::{summarize, SummaryConfig};
use crate::landscape::{
    landscape, landscape_difference, landscape_l2_distance, weighted_average, weighted_norm,
    Landscape, LandscapeConfig,
};
use crate::sample::ObservationalSample;

/// Smallest `(t, z)` cell a diagram is built from.
pub const MIN_CELL_SIZE: usize = 2;

/// Per-stratum diagrams before landscapes are attached. Useful for freezing
/// a landscape grid over a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct StratumDiagrams {
    pub z: u32,
    pub n0: usize,
    pub n1: usize,
    pub diagram0: PersistenceDiagram,
    pub diagram1: PersistenceDiagram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratumSummary {
    pub z: u32,
    pub n0: usize,
    pub n1: usize,
    pub diagram0: PersistenceDiagram,
    pub diagram1: PersistenceDiagram,
    pub landscape0: Landscape,
    pub landscape1: Landscape,
}

impl StratumDiagrams {
    pub fn with_landscapes(self, lcfg: &LandscapeConfig) -> Result<StratumSummary> {
        Ok(StratumSummary {
            landscape0: landscape(&self.diagram0, lcfg)?,
            landscape1: landscape(&self.diagram1, lcfg)?,
            z: self.z,
            n0: self.n0,
            n1: self.n1,
            diagram0: self.diagram0,
            diagram1: self.diagram1,
        })
    }
}

pub fn stratum_diagrams(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
) -> Result<Vec<StratumDiagrams>> {
    sample
        .strata()
        .into_iter()
        .map(|z| {
            let c0 = sample.cell_cloud(0, z, MIN_CELL_SIZE)?;
            let c1 = sample.cell_cloud(1, z, MIN_CELL_SIZE)?;
            Ok(StratumDiagrams {
                z,
                n0: c0.len(),
                n1: c1.len(),
                diagram0: summarize(&c0, summary)?,
                diagram1: summarize(&c1, summary)?,
            })
        })
        .collect()
}

pub fn stratum_summaries(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
    lcfg: &LandscapeConfig,
) -> Result<Vec<StratumSummary>> {
    stratum_diagrams(sample, summary)?
        .into_iter()
        .map(|d| d.with_landscapes(lcfg))
        .collect()
}

/// Diagrams of the two pooled arms, ignoring `Z`.
pub fn pooled_diagrams(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
) -> Result<(PersistenceDiagram, PersistenceDiagram)> {
    let d0 = summarize(&sample.arm_cloud(0, MIN_CELL_SIZE)?, summary)?;
    let d1 = summarize(&sample.arm_cloud(1, MIN_CELL_SIZE)?, summary)?;
    Ok((d0, d1))
}

/// Freezes a landscape grid over every stratum and pooled diagram of `sample`.
pub fn freeze_landscape_config(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
    n_layers: usize,
    n_nodes: usize,
) -> Result<LandscapeConfig> {
    let strata = stratum_diagrams(sample, summary)?;
    let (p0, p1) = pooled_diagrams(sample, summary)?;
    let all = strata
        .iter()
        .flat_map(|s| [&s.diagram0, &s.diagram1])
        .chain([&p0, &p1]);
    LandscapeConfig::frozen_for(all, n_layers, n_nodes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    TcateHat(u32),
    TateHat,
    EtcateHat(u32),
    EtateHat,
    AdjustedTopo,
    UnadjustedTopo,
    UnadjustedMean,
    AdjustedMeanAte,
    MarginalTopoDiagnostic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectValue {
    Scalar(f64),
    /// Flattened `K × G` landscape difference with its Riemann-weighted norm.
    Vector { values: Vec<f64>, norm: f64 },
}

impl EffectValue {
    /// The scalar value, or the norm of a vector value.
    pub fn magnitude(&self) -> f64 {
        match self {
            EffectValue::Scalar(v) => *v,
            EffectValue::Vector { norm, .. } => *norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub value: EffectValue,
    /// Empirical `P(Z = z)` for averaged estimators.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<u32, f64>,
    /// Within-stratum contributions before weighting.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_stratum: BTreeMap<u32, f64>,
}

fn summary_weights(summaries: &[StratumSummary]) -> Result<BTreeMap<u32, f64>> {
    if summaries.is_empty() {
        return Err(Error::InvalidConfig("no strata to average over".into()));
    }
    let total: usize = summaries.iter().map(|s| s.n0 + s.n1).sum();
    Ok(summaries
        .iter()
        .map(|s| (s.z, (s.n0 + s.n1) as f64 / total as f64))
        .collect())
}

fn averaged_scalar(
    kind: EffectKind,
    summaries: &[StratumSummary],
    per: impl Fn(&StratumSummary) -> Result<f64>,
) -> Result<EffectEstimate> {
    let weights = summary_weights(summaries)?;
    let per_stratum = summaries
        .iter()
        .map(|s| Ok((s.z, per(s)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let value = per_stratum.iter().map(|(z, v)| weights[z] * v).sum();
    Ok(EffectEstimate {
        kind,
        value: EffectValue::Scalar(value),
        weights,
        per_stratum,
    })
}

/// `d_D(D(1, z), D(0, z))`.
pub fn tcate_hat(s: &StratumSummary, metric: DiagramMetric) -> Result<f64> {
    diagram_distance(&s.diagram1, &s.diagram0, metric)
}

pub fn tate_hat(summaries: &[StratumSummary], metric: DiagramMetric) -> Result<EffectEstimate> {
    averaged_scalar(EffectKind::TateHat, summaries, |s| tcate_hat(s, metric))
}

/// `φ(D(1, z)) − φ(D(0, z))`, flattened layer-major.
pub fn etcate_hat(s: &StratumSummary) -> Result<Vec<f64>> {
    landscape_difference(&s.landscape1, &s.landscape0)
}

pub fn etate_hat(summaries: &[StratumSummary]) -> Result<EffectEstimate> {
    let weights = summary_weights(summaries)?;
    let spacing = summaries[0].landscape0.config().grid.spacing();
    let mut values: Vec<f64> = Vec::new();
    let mut per_stratum = BTreeMap::new();
    for s in summaries {
        if s.landscape0.config() != summaries[0].landscape0.config() {
            return Err(Error::IncompatibleLandscape("strata use different grids".into()));
        }
        let diff = etcate_hat(s)?;
        per_stratum.insert(s.z, weighted_norm(&diff, spacing));
        if values.is_empty() {
            values = vec![0.0; diff.len()];
        }
        let w = weights[&s.z];
        for (acc, d) in values.iter_mut().zip(&diff) {
            *acc += w * d;
        }
    }
    let norm = weighted_norm(&values, spacing);
    Ok(EffectEstimate {
        kind: EffectKind::EtateHat,
        value: EffectValue::Vector { values, norm },
        weights,
        per_stratum,
    })
}

/// Weighted average of within-stratum landscape L2 distances.
pub fn adjusted_topological_effect(summaries: &[StratumSummary]) -> Result<EffectEstimate> {
    averaged_scalar(EffectKind::AdjustedTopo, summaries, |s| {
        landscape_l2_distance(&s.landscape1, &s.landscape0)
    })
}

/// Landscape L2 distance between the pooled treated and pooled control arms.
pub fn unadjusted_topological_contrast(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
    lcfg: &LandscapeConfig,
) -> Result<EffectEstimate> {
    let (d0, d1) = pooled_diagrams(sample, summary)?;
    let value = landscape_l2_distance(&landscape(&d1, lcfg)?, &landscape(&d0, lcfg)?)?;
    Ok(EffectEstimate {
        kind: EffectKind::UnadjustedTopo,
        value: EffectValue::Scalar(value),
        weights: BTreeMap::new(),
        per_stratum: BTreeMap::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEffects {
    pub unadjusted: f64,
    pub adjusted: f64,
}

/// Mean contrasts in the first outcome coordinate.
pub fn mean_effects(sample: &ObservationalSample) -> Result<MeanEffects> {
    // (sum, count) per (z, t)
    let mut cells: BTreeMap<(u32, u8), (f64, usize)> = BTreeMap::new();
    let mut arms = [(0.0f64, 0usize); 2];
    for r in sample.records() {
        let y = r.y[0];
        let cell = cells.entry((r.z, r.t)).or_default();
        cell.0 += y;
        cell.1 += 1;
        arms[r.t as usize].0 += y;
        arms[r.t as usize].1 += 1;
    }
    for (t, arm) in arms.iter().enumerate() {
        if arm.1 == 0 {
            return Err(Error::ArmTooSmall {
                t: t as u8,
                count: 0,
                min: 1,
            });
        }
    }
    let unadjusted = arms[1].0 / arms[1].1 as f64 - arms[0].0 / arms[0].1 as f64;

    let mut adjusted = 0.0;
    for (z, w) in sample.stratum_weights() {
        let mean = |t: u8| {
            cells
                .get(&(z, t))
                .map(|&(s, c)| s / c as f64)
                .ok_or(Error::Positivity { t, z, count: 0, min: 1 })
        };
        adjusted += w * (mean(1)? - mean(0)?);
    }
    Ok(MeanEffects {
        unadjusted,
        adjusted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoncommutationReport {
    /// Riemann-weighted L2 gap between the pooled-cloud landscape and the
    /// `P(Z)`-average of per-stratum landscapes (control arm).
    pub gap: f64,
    pub pooled_norm: f64,
    pub averaged_norm: f64,
    pub per_stratum_norms: BTreeMap<u32, f64>,
    pub weights: BTreeMap<u32, f64>,
}

/// Compares the summary of the pooled control cloud with the mixture of
/// per-stratum summaries. A positive gap shows the summary map does not
/// commute with mixing over `Z`.
pub fn marginal_noncommutation_diagnostic(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
    lcfg: &LandscapeConfig,
) -> Result<NoncommutationReport> {
    let strata = sample.strata();
    if strata.len() < 2 {
        return Err(Error::DiagnosticUndefined(format!(
            "need at least 2 strata, found {}",
            strata.len()
        )));
    }
    let weights = sample.stratum_weights();
    let pooled = landscape(&summarize(&sample.arm_cloud(0, MIN_CELL_SIZE)?, summary)?, lcfg)?;
    let per_stratum: Vec<(u32, Landscape)> = strata
        .iter()
        .map(|&z| {
            let cloud = sample.cell_cloud(0, z, MIN_CELL_SIZE)?;
            Ok((z, landscape(&summarize(&cloud, summary)?, lcfg)?))
        })
        .collect::<Result<_>>()?;
    let weighted: Vec<(&Landscape, f64)> = per_stratum.iter().map(|(z, l)| (l, weights[z])).collect();
    let averaged = weighted_average(&weighted)?;
    Ok(NoncommutationReport {
        gap: landscape_l2_distance(&pooled, &averaged)?,
        pooled_norm: pooled.norm(),
        averaged_norm: averaged.norm(),
        per_stratum_norms: per_stratum.iter().map(|(z, l)| (*z, l.norm())).collect(),
        weights,
    })
}

/// All estimators on one sample, keyed by estimator name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub metric: DiagramMetric,
    pub landscape: LandscapeConfig,
    pub estimates: BTreeMap<String, EffectEstimate>,
}

pub fn effect_report(
    sample: &ObservationalSample,
    summary: &SummaryConfig,
    lcfg: &LandscapeConfig,
    metric: DiagramMetric,
) -> Result<EffectReport> {
    let summaries = stratum_summaries(sample, summary, lcfg)?;
    let means = mean_effects(sample)?;
    let scalar = |kind, v| EffectEstimate {
        kind,
        value: EffectValue::Scalar(v),
        weights: BTreeMap::new(),
        per_stratum: BTreeMap::new(),
    };
    let mut adjusted_mean = scalar(EffectKind::AdjustedMeanAte, means.adjusted);
    adjusted_mean.weights = sample.stratum_weights();

    let mut estimates = BTreeMap::new();
    estimates.insert("tate_hat".to_string(), tate_hat(&summaries, metric)?);
    estimates.insert("etate_hat".to_string(), etate_hat(&summaries)?);
    estimates.insert(
        "adjusted_topological_effect".to_string(),
        adjusted_topological_effect(&summaries)?,
    );
    estimates.insert(
        "unadjusted_topological_contrast".to_string(),
        unadjusted_topological_contrast(sample, summary, lcfg)?,
    );
    estimates.insert(
        "unadjusted_mean".to_string(),
        scalar(EffectKind::UnadjustedMean, means.unadjusted),
    );
    estimates.insert("adjusted_mean_ate".to_string(), adjusted_mean);
    Ok(EffectReport {
        metric,
        landscape: *lcfg,
        estimates,
    })
}
