//! Monte Carlo drivers for the separation sweep, the confounded comparison,
//! the motivating 1D figure and the mixture non-commutation demo.
//!
//! Replication `r` always draws from stream `r` of the configured seed, and
//! results are merged in replication order, so output does not depend on the
//! number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::{DiagramMetric, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::estimands::{
    adjusted_topological_effect, freeze_landscape_config, marginal_noncommutation_diagnostic,
    mean_effects, stratum_diagrams, stratum_summaries, tate_hat, unadjusted_topological_contrast,
    NoncommutationReport,
};
use crate::filtration::{density_superlevel_diagram_1d, GridSpec, SummaryConfig, SummaryKind};
use crate::landscape::{LandscapeConfig, DEFAULT_LANDSCAPE_NODES, DEFAULT_LAYERS};
use crate::synth::{
    draw_balanced_2d, draw_motivating_1d, draw_observational_2d, ground_truth_topological_effect,
    mean_sd, Design1D, Design2D, GroundTruth, SeededRng,
};

/// Stream used for the pilot draw that freezes a landscape grid.
pub const PILOT_STREAM: u64 = 1 << 41;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: Design2D,
    pub deltas: Vec<f64>,
    /// Observations per arm in each sweep replication, split across strata by `P(Z)`.
    pub n_per_arm: usize,
    /// Units per observational replication.
    pub n_total: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub summary: SummaryConfig,
    pub n_layers: usize,
    pub landscape_nodes: usize,
    /// Fixed landscape grid; `None` freezes one from a pilot draw.
    pub landscape_grid: Option<GridSpec>,
    pub metric: DiagramMetric,
    /// Points per arm per stratum in each benchmark replication.
    pub n_big: usize,
    pub ground_truth_reps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            design: Design2D::default(),
            deltas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2],
            n_per_arm: 200,
            n_total: 600,
            n_reps: 50,
            seed: 20240917,
            summary: SummaryConfig::default(),
            n_layers: DEFAULT_LAYERS,
            landscape_nodes: DEFAULT_LANDSCAPE_NODES,
            landscape_grid: None,
            metric: DiagramMetric::default(),
            n_big: 5000,
            ground_truth_reps: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.summary.kind.validate()?;
        let counts = [
            ("n_per_arm", self.n_per_arm),
            ("n_total", self.n_total),
            ("n_reps", self.n_reps),
            ("n_layers", self.n_layers),
            ("n_big", self.n_big),
            ("ground_truth_reps", self.ground_truth_reps),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidConfig(format!("deltas must be nonempty and >= 0: {:?}", self.deltas)));
        }
        if let Some(g) = self.landscape_grid {
            g.validate()?;
        }
        Ok(())
    }

    fn fixed_landscape(&self) -> Result<Option<LandscapeConfig>> {
        self.landscape_grid
            .map(|g| LandscapeConfig::new(self.n_layers, g))
            .transpose()
    }

    /// Per-arm counts in strata 0 and 1 for a sweep replication.
    pub fn sweep_cells(&self) -> [usize; 2] {
        let n1 = (self.n_per_arm as f64 * self.design.pz1).round() as usize;
        [self.n_per_arm - n1, n1]
    }
}

/// Runs `f` on a dedicated pool with `jobs` worker threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn in_replication<T>(replication: usize, r: Result<T>) -> Result<T> {
    r.map_err(|source| Error::Replication {
        replication,
        source: Box::new(source),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub topo_mean: f64,
    pub topo_sd: f64,
    pub topo_se: f64,
    pub mean_effect_mean: f64,
    pub mean_effect_sd: f64,
    pub mean_effect_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub landscape: LandscapeConfig,
    pub per_cell: [usize; 2],
    pub n_reps: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "delta",
            "topo_mean",
            "topo_sd",
            "topo_se",
            "mean_effect_mean",
            "mean_effect_sd",
            "mean_effect_se",
        ])?;
        for r in &self.rows {
            w.write_record(
                [
                    r.delta,
                    r.topo_mean,
                    r.topo_sd,
                    r.topo_se,
                    r.mean_effect_mean,
                    r.mean_effect_sd,
                    r.mean_effect_se,
                ]
                .iter()
                .map(|v| fixed4(*v)),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fixed4(v: f64) -> String {
    format!("{v:.4}")
}

/// Adjusted topological and mean effects as a function of the mixture
/// separation Δ, without confounding: each replication draws a fixed number
/// of units per arm in each stratum.
pub fn run_delta_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let per_cell = config.sweep_cells();
    if per_cell.iter().any(|&c| c < 2) {
        return Err(Error::InvalidConfig(format!(
            "n_per_arm = {} leaves a stratum with fewer than 2 units per arm",
            config.n_per_arm
        )));
    }
    let balanced = Design2D {
        propensity: [0.5, 0.5],
        ..config.design.clone()
    };

    let lcfg = match config.fixed_landscape()? {
        Some(l) => l,
        None => {
            let max_delta = config.deltas.iter().copied().fold(0.0, f64::max);
            let pilot = draw_balanced_2d(
                &balanced.with_delta(max_delta),
                per_cell,
                &mut SeededRng::new(config.seed, PILOT_STREAM),
            )?;
            let diagrams = stratum_diagrams(&pilot, &config.summary)?;
            LandscapeConfig::frozen_for(
                diagrams.iter().flat_map(|d| [&d.diagram0, &d.diagram1]),
                config.n_layers,
                config.landscape_nodes,
            )?
        }
    };

    let rows = config
        .deltas
        .iter()
        .map(|&delta| {
            let design = balanced.with_delta(delta);
            let reps = (0..config.n_reps)
                .into_par_iter()
                .map(|rep| {
                    in_replication(rep, (|| {
                        let mut rng = SeededRng::new(config.seed, rep as u64);
                        let sample = draw_balanced_2d(&design, per_cell, &mut rng)?;
                        let summaries = stratum_summaries(&sample, &config.summary, &lcfg)?;
                        let topo = adjusted_topological_effect(&summaries)?.value.magnitude();
                        Ok((topo, mean_effects(&sample)?.adjusted))
                    })())
                })
                .collect::<Result<Vec<_>>>()?;
            let topo: Vec<f64> = reps.iter().map(|r| r.0).collect();
            let mean: Vec<f64> = reps.iter().map(|r| r.1).collect();
            let (topo_mean, topo_sd) = mean_sd(&topo);
            let (mean_effect_mean, mean_effect_sd) = mean_sd(&mean);
            let root_n = (config.n_reps as f64).sqrt();
            Ok(SweepRow {
                delta,
                topo_mean,
                topo_sd,
                topo_se: topo_sd / root_n,
                mean_effect_mean,
                mean_effect_sd,
                mean_effect_se: mean_effect_sd / root_n,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepReport {
        landscape: lcfg,
        per_cell,
        n_reps: config.n_reps,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let (mean, sd) = mean_sd(&v);
        Self { mean, sd }
    }
}

/// The five quantities of one observational replication plus the
/// diagram-metric average effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Replicate {
    pub unadjusted_mean: f64,
    pub adjusted_mean_ate: f64,
    pub unadjusted_topo: f64,
    pub adjusted_topo: f64,
    pub diagram_metric_tate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub unadjusted_mean: MeanSd,
    pub adjusted_mean_ate: MeanSd,
    pub unadjusted_topo: MeanSd,
    pub adjusted_topo: MeanSd,
    pub ground_truth_topo: MeanSd,
    pub diagram_metric: DiagramMetric,
    pub diagram_metric_tate: MeanSd,
    pub landscape: LandscapeConfig,
    pub replicates: Vec<Table1Replicate>,
    pub ground_truth: GroundTruth,
}

impl Table1Report {
    pub fn rows(&self) -> [(&'static str, MeanSd); 5] {
        [
            ("unadjusted_mean_contrast", self.unadjusted_mean),
            ("adjusted_mean_ate", self.adjusted_mean_ate),
            ("unadjusted_topological_contrast", self.unadjusted_topo),
            ("adjusted_topological_effect", self.adjusted_topo),
            ("ground_truth_topological_effect", self.ground_truth_topo),
        ]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["quantity", "mean", "sd"])?;
        for (name, v) in self.rows() {
            w.write_record([name.to_string(), fixed4(v.mean), fixed4(v.sd)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Confounded observational comparison at a single Δ.
pub fn run_table1(config: &ExperimentConfig) -> Result<Table1Report> {
    config.validate()?;
    let design = &config.design;

    let lcfg = match config.fixed_landscape()? {
        Some(l) => l,
        None => {
            let pilot = draw_observational_2d(
                design,
                config.n_total,
                &mut SeededRng::new(config.seed, PILOT_STREAM),
            )?;
            freeze_landscape_config(&pilot.sample, &config.summary, config.n_layers, config.landscape_nodes)?
        }
    };

    let ground_truth = ground_truth_topological_effect(
        design,
        config.n_big,
        config.seed,
        &config.summary,
        &lcfg,
        config.ground_truth_reps,
    )?;

    let replicates = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            in_replication(rep, (|| {
                let mut rng = SeededRng::new(config.seed, rep as u64);
                let sample = draw_observational_2d(design, config.n_total, &mut rng)?.sample;
                let summaries = stratum_summaries(&sample, &config.summary, &lcfg)?;
                let means = mean_effects(&sample)?;
                Ok(Table1Replicate {
                    unadjusted_mean: means.unadjusted,
                    adjusted_mean_ate: means.adjusted,
                    unadjusted_topo: unadjusted_topological_contrast(&sample, &config.summary, &lcfg)?
                        .value
                        .magnitude(),
                    adjusted_topo: adjusted_topological_effect(&summaries)?.value.magnitude(),
                    diagram_metric_tate: tate_hat(&summaries, config.metric)?.value.magnitude(),
                })
            })())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Table1Report {
        unadjusted_mean: MeanSd::of(replicates.iter().map(|r| r.unadjusted_mean)),
        adjusted_mean_ate: MeanSd::of(replicates.iter().map(|r| r.adjusted_mean_ate)),
        unadjusted_topo: MeanSd::of(replicates.iter().map(|r| r.unadjusted_topo)),
        adjusted_topo: MeanSd::of(replicates.iter().map(|r| r.adjusted_topo)),
        ground_truth_topo: MeanSd {
            mean: ground_truth.mean,
            sd: ground_truth.sd,
        },
        diagram_metric: config.metric,
        diagram_metric_tate: MeanSd::of(replicates.iter().map(|r| r.diagram_metric_tate)),
        landscape: lcfg,
        replicates,
        ground_truth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure1Data {
    pub grid: GridSpec,
    pub control_density: Vec<f64>,
    pub treated_density: Vec<f64>,
    pub control_diagram: PersistenceDiagram,
    pub treated_diagram: PersistenceDiagram,
}

impl Figure1Data {
    /// Long-format CSV `series,x,y`: density curves as `(y, density)` and
    /// diagram pairs as `(birth, death)`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["series", "x", "y"])?;
        let nodes = self.grid.nodes();
        for (series, curve) in [
            ("control_density", &self.control_density),
            ("treated_density", &self.treated_density),
        ] {
            for (x, y) in nodes.iter().zip(curve.iter()) {
                w.write_record([series.to_string(), fixed4(*x), fixed4(*y)])?;
            }
        }
        for (series, d) in [
            ("control_diagram", &self.control_diagram),
            ("treated_diagram", &self.treated_diagram),
        ] {
            for p in d.sorted_pairs() {
                w.write_record([series.to_string(), fixed4(p.birth), fixed4(p.death)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Analytic densities of the two 1D arms on `grid`, plus density-superlevel
/// diagrams of `n` draws from each arm.
pub fn emit_figure1_data(
    control: &Design1D,
    treated: &Design1D,
    grid: GridSpec,
    n: usize,
    seed: u64,
    summary: &SummaryConfig,
) -> Result<Figure1Data> {
    grid.validate()?;
    if !matches!(summary.kind, SummaryKind::DensitySuperlevel1D { .. }) {
        return Err(Error::InvalidConfig(format!(
            "figure diagrams use a density superlevel summary, got {}",
            summary.kind
        )));
    }
    let nodes = grid.nodes();
    let control_samples = draw_motivating_1d(control, 0, n, &mut SeededRng::new(seed, 0))?;
    let treated_samples = draw_motivating_1d(treated, 1, n, &mut SeededRng::new(seed, 1))?;
    Ok(Figure1Data {
        grid,
        control_density: nodes.iter().map(|&y| control.density(0, y)).collect(),
        treated_density: nodes.iter().map(|&y| treated.density(1, y)).collect(),
        control_diagram: density_superlevel_diagram_1d(&control_samples, summary)?,
        treated_diagram: density_superlevel_diagram_1d(&treated_samples, summary)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoncommutationDemo {
    pub per_cell: usize,
    pub landscape: LandscapeConfig,
    pub report: NoncommutationReport,
}

impl NoncommutationDemo {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["quantity", "value"])?;
        w.write_record(["gap".to_string(), fixed4(self.report.gap)])?;
        w.write_record(["pooled_norm".to_string(), fixed4(self.report.pooled_norm)])?;
        w.write_record(["averaged_norm".to_string(), fixed4(self.report.averaged_norm)])?;
        for (z, norm) in &self.report.per_stratum_norms {
            w.write_record([format!("stratum_{z}_norm"), fixed4(*norm)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pooled-versus-averaged control landscapes on a balanced draw with
/// `n_per_arm` units in every `(t, z)` cell.
pub fn run_noncommutation_demo(config: &ExperimentConfig) -> Result<NoncommutationDemo> {
    config.validate()?;
    let per_cell = config.n_per_arm;
    let sample = draw_balanced_2d(
        &config.design,
        [per_cell, per_cell],
        &mut SeededRng::new(config.seed, 0),
    )?;
    let lcfg = match config.fixed_landscape()? {
        Some(l) => l,
        None => freeze_landscape_config(&sample, &config.summary, config.n_layers, config.landscape_nodes)?,
    };
    let report = marginal_noncommutation_diagnostic(&sample, &config.summary, &lcfg)?;
    Ok(NoncommutationDemo {
        per_cell,
        landscape: lcfg,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_per_arm: 40,
            n_total: 200,
            n_reps: 4,
            n_big: 200,
            ground_truth_reps: 3,
            deltas: vec![0.0, 1.2],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_has_one_row_per_delta_in_order() {
        let cfg = ExperimentConfig {
            deltas: vec![1.2, 0.0, 0.6],
            ..small()
        };
        let r = run_delta_sweep(&cfg).unwrap();
        let ds: Vec<f64> = r.rows.iter().map(|r| r.delta).collect();
        assert_eq!(ds, vec![1.2, 0.0, 0.6]);
        assert!(r.rows.iter().all(|r| r.topo_sd >= 0.0 && r.mean_effect_sd >= 0.0));
        assert_eq!(r.per_cell, [20, 20]);
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let cfg = small();
        let a = with_jobs(1, || run_delta_sweep(&cfg)).unwrap().unwrap();
        let b = with_jobs(4, || run_delta_sweep(&cfg)).unwrap().unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a, b);
    }

    #[test]
    fn table1_small_run() {
        let r = run_table1(&small()).unwrap();
        assert_eq!(r.replicates.len(), 4);
        assert_eq!(r.rows().len(), 5);
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(1).unwrap().starts_with("unadjusted_mean_contrast,"));
    }

    #[test]
    fn table1_reports_positivity_with_replication() {
        let cfg = ExperimentConfig {
            n_total: 4,
            ..small()
        };
        let err = run_table1(&ExperimentConfig {
            landscape_grid: Some(GridSpec::new(0.0, 3.0, 16).unwrap()),
            ..cfg
        })
        .unwrap_err();
        assert!(matches!(err, Error::Replication { .. }), "{err}");
    }

    #[test]
    fn figure1_shapes() {
        let grid = GridSpec::new(-4.0, 4.0, 161).unwrap();
        let summary = SummaryConfig::new(SummaryKind::DensitySuperlevel1D {
            bandwidth: None,
            grid: None,
        });
        let f = emit_figure1_data(
            &Design1D::figure_control(),
            &Design1D::figure_treated(),
            grid,
            4000,
            5,
            &summary,
        )
        .unwrap();
        let peak = f.control_density[80];
        assert!((peak - 0.5699).abs() < 1e-4);
        for i in 0..161 {
            assert!((f.treated_density[i] - f.treated_density[160 - i]).abs() < 1e-12);
        }
        assert_eq!(f.treated_diagram.len(), 1);
        // Only negligible tail bumps from isolated extreme draws.
        assert!(f.control_diagram.pairs().iter().all(|p| p.persistence() < 0.01));
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("treated_diagram,"));
    }

    #[test]
    fn noncommutation_gap_collapses_without_stratum_shift() {
        let cfg = ExperimentConfig {
            n_per_arm: 100,
            ..ExperimentConfig::default()
        };
        let shifted = run_noncommutation_demo(&cfg).unwrap();
        assert!(shifted.report.gap > 0.1, "gap {}", shifted.report.gap);
        let same = ExperimentConfig {
            design: Design2D {
                m1: [-1.5, 0.0],
                ..Design2D::default()
            },
            ..cfg
        };
        let flat = run_noncommutation_demo(&same).unwrap();
        assert!(flat.report.gap < shifted.report.gap / 10.0);
    }
}
