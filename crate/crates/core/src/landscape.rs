//! Persistence landscapes sampled on a fixed grid.
//!
//! Layer `k` at node `t` is the k-th largest tent value
//! `max(0, min(t - birth, death - t))` over the diagram's pairs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::filtration::GridSpec;

pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_LANDSCAPE_NODES: usize = 256;
/// Headroom over the largest death when freezing a landscape grid.
pub const GRID_HEADROOM: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub n_layers: usize,
    pub grid: GridSpec,
}

impl LandscapeConfig {
    pub fn new(n_layers: usize, grid: GridSpec) -> Result<Self> {
        if n_layers == 0 {
            return Err(Error::InvalidConfig("landscape needs at least one layer".into()));
        }
        grid.validate()?;
        Ok(Self { n_layers, grid })
    }

    /// Freezes a shared grid `[0, 1.25 · max death]` over a batch of diagrams.
    /// A batch without finite pairs gets `[0, 1]`.
    pub fn frozen_for<'a>(
        diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>,
        n_layers: usize,
        n_nodes: usize,
    ) -> Result<Self> {
        let max_death = diagrams
            .into_iter()
            .filter_map(PersistenceDiagram::max_death)
            .fold(0.0f64, f64::max);
        let hi = if max_death > 0.0 {
            GRID_HEADROOM * max_death
        } else {
            1.0
        };
        Self::new(n_layers, GridSpec::new(0.0, hi, n_nodes)?)
    }
}

/// `n_layers × n_nodes` landscape values, row-major by layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    config: LandscapeConfig,
    values: Vec<f64>,
}

impl Landscape {
    pub fn zeros(config: LandscapeConfig) -> Self {
        Self {
            values: vec![0.0; config.n_layers * config.grid.n_nodes],
            config,
        }
    }

    /// Builds a landscape from raw values; used for averaged landscapes.
    pub fn from_values(config: LandscapeConfig, values: Vec<f64>) -> Result<Self> {
        if values.len() != config.n_layers * config.grid.n_nodes {
            return Err(Error::IncompatibleLandscape(format!(
                "expected {} values, got {}",
                config.n_layers * config.grid.n_nodes,
                values.len()
            )));
        }
        Ok(Self { config, values })
    }

    pub fn config(&self) -> &LandscapeConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        let g = self.config.grid.n_nodes;
        &self.values[k * g..(k + 1) * g]
    }

    pub fn get(&self, k: usize, g: usize) -> f64 {
        self.values[k * self.config.grid.n_nodes + g]
    }

    /// Riemann-weighted L2 norm.
    pub fn norm(&self) -> f64 {
        weighted_norm(&self.values, self.config.grid.spacing())
    }

    /// CSV matrix: header `layer,<node_0>,...`, one row per layer.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["layer".to_string()];
        header.extend(self.config.grid.nodes().iter().map(f64::to_string));
        w.write_record(&header)?;
        for k in 0..self.config.n_layers {
            let mut row = vec![(k + 1).to_string()];
            row.extend(self.layer(k).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `sqrt(Σ v² · Δt)`.
pub fn weighted_norm(values: &[f64], spacing: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * spacing).sqrt()
}

pub fn landscape(diagram: &PersistenceDiagram, config: &LandscapeConfig) -> Result<Landscape> {
    if diagram.has_essential() {
        return Err(Error::UnhandledEssentialClass);
    }
    let k_max = config.n_layers;
    let nodes = config.grid.nodes();
    let g = nodes.len();
    let mut out = Landscape::zeros(*config);
    let mut top = vec![0.0f64; k_max];

    for (gi, &t) in nodes.iter().enumerate() {
        top.iter_mut().for_each(|v| *v = 0.0);
        for p in diagram.pairs() {
            let tent = (t - p.birth).min(p.death - t);
            if tent <= top[k_max - 1] {
                continue;
            }
            // Insert into the descending top-K buffer.
            let mut pos = k_max - 1;
            while pos > 0 && top[pos - 1] < tent {
                top[pos] = top[pos - 1];
                pos -= 1;
            }
            top[pos] = tent;
        }
        for (k, &v) in top.iter().enumerate() {
            out.values[k * g + gi] = v;
        }
    }
    Ok(out)
}

fn check_same_config(a: &Landscape, b: &Landscape) -> Result<()> {
    if a.config != b.config {
        return Err(Error::IncompatibleLandscape(format!(
            "configs differ: {:?} vs {:?}",
            a.config, b.config
        )));
    }
    Ok(())
}

pub fn landscape_l2_distance(a: &Landscape, b: &Landscape) -> Result<f64> {
    check_same_config(a, b)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum * a.config.grid.spacing()).sqrt())
}

pub fn landscape_sup_distance(a: &Landscape, b: &Landscape) -> Result<f64> {
    check_same_config(a, b)?;
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Elementwise `a - b`.
pub fn landscape_difference(a: &Landscape, b: &Landscape) -> Result<Vec<f64>> {
    check_same_config(a, b)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect())
}

/// Weighted average of landscapes sharing one config.
pub fn weighted_average(landscapes: &[(&Landscape, f64)]) -> Result<Landscape> {
    let (first, _) = landscapes
        .first()
        .ok_or_else(|| Error::IncompatibleLandscape("cannot average zero landscapes".into()))?;
    let mut values = vec![0.0; first.values.len()];
    for (l, w) in landscapes {
        check_same_config(first, l)?;
        for (acc, v) in values.iter_mut().zip(&l.values) {
            *acc += w * v;
        }
    }
    Landscape::from_values(first.config, values)
}
