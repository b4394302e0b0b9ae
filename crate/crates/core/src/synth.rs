//! Synthetic designs with mean-preserving topology change.
//!
//! Randomness comes from [`SeededRng`]: ChaCha8 keyed by a 64-bit seed
//! (`seed_from_u64`) with an explicit 64-bit stream id. Uniforms take the top
//! 53 bits of `next_u64`; normals use the Box–Muller transform, consuming two
//! uniforms per pair of draws.

use std::collections::BTreeMap;
use std::io::Write;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{summarize, PointCloud, SummaryConfig};
use crate::landscape::{landscape, landscape_l2_distance, LandscapeConfig};
use crate::sample::{ObservationalSample, Record};

/// Deterministic generator: identical `(seed, stream)` gives identical draws.
#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }
}

/// The two-dimensional confounded design: control outcomes are
/// `N₂(m_z, σ²I)`, treated outcomes the equal mixture of
/// `N₂(m_z ± Δe₁, σ²I)`, so both arms share the conditional mean `m_z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design2D {
    pub m0: [f64; 2],
    pub m1: [f64; 2],
    pub sigma: f64,
    pub delta: f64,
    /// `P(T = 1 | Z = z)` for z = 0, 1.
    pub propensity: [f64; 2],
    /// `P(Z = 1)`.
    pub pz1: f64,
}

impl Default for Design2D {
    fn default() -> Self {
        Self {
            m0: [-1.5, 0.0],
            m1: [1.5, 0.0],
            sigma: 0.18,
            delta: 1.0,
            propensity: [0.2, 0.8],
            pz1: 0.5,
        }
    }
}

impl Design2D {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta must be >= 0, got {}", self.delta)));
        }
        for p in self.propensity.iter().chain([&self.pz1]) {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "probabilities must lie strictly inside (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn center(&self, z: u32) -> [f64; 2] {
        if z == 0 {
            self.m0
        } else {
            self.m1
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    fn draw_point(&self, z: u32, t: u8, rng: &mut SeededRng) -> [f64; 2] {
        let [cx, cy] = self.center(z);
        let shift = if t == 1 {
            if rng.bernoulli(0.5) {
                self.delta
            } else {
                -self.delta
            }
        } else {
            0.0
        };
        [rng.normal(cx + shift, self.sigma), rng.normal(cy, self.sigma)]
    }
}

/// One-dimensional motivating design: `N(m, σ²)` for control and
/// `½N(m − Δ, σ²) + ½N(m + Δ, σ²)` for treatment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design1D {
    pub m: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl Design1D {
    /// Control arm of the motivating figure, `N(0, 0.7²)`.
    pub fn figure_control() -> Self {
        Self {
            m: 0.0,
            sigma: 0.7,
            delta: 0.0,
        }
    }

    /// Treated arm of the motivating figure, `½N(−1.3, 0.45²) + ½N(1.3, 0.45²)`.
    pub fn figure_treated() -> Self {
        Self {
            m: 0.0,
            sigma: 0.45,
            delta: 1.3,
        }
    }

    /// Density of the arm-`t` law at `y`.
    pub fn density(&self, t: u8, y: f64) -> f64 {
        let phi = |mu: f64| {
            let u = (y - mu) / self.sigma;
            (-0.5 * u * u).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        if t == 0 {
            phi(self.m)
        } else {
            0.5 * phi(self.m - self.delta) + 0.5 * phi(self.m + self.delta)
        }
    }
}

pub fn draw_potential_outcomes_2d(
    design: &Design2D,
    z: u32,
    t: u8,
    n: usize,
    rng: &mut SeededRng,
) -> Result<PointCloud> {
    design.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    let coords: Vec<f64> = (0..n).flat_map(|_| design.draw_point(z, t, rng)).collect();
    PointCloud::from_flat(2, coords)
}

/// An observational sample with both potential outcomes retained per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub sample: ObservationalSample,
    /// `[Y(0), Y(1)]` for each record, in record order.
    pub counterfactuals: Vec<[[f64; 2]; 2]>,
}

impl SyntheticSample {
    /// CSV `t,z,y1,y2`, optionally followed by `y0_1,y0_2,y1_1,y1_2`.
    pub fn write_csv<W: Write>(&self, writer: W, with_counterfactuals: bool) -> Result<()> {
        if !with_counterfactuals {
            return self.sample.write_csv(writer);
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "z", "y1", "y2", "y0_1", "y0_2", "y1_1", "y1_2"])?;
        for (r, cf) in self.sample.records().iter().zip(&self.counterfactuals) {
            let mut row = vec![r.t.to_string(), r.z.to_string()];
            row.extend(r.y.iter().map(f64::to_string));
            row.extend(cf.iter().flatten().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per unit: `Z ~ Bernoulli(pz1)`, `T ~ Bernoulli(propensity[Z])`, both
/// potential outcomes drawn, and `Y = Y(T)`.
pub fn draw_observational_2d(design: &Design2D, n: usize, rng: &mut SeededRng) -> Result<SyntheticSample> {
    design.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one unit".into()));
    }
    let mut records = Vec::with_capacity(n);
    let mut counterfactuals = Vec::with_capacity(n);
    for _ in 0..n {
        let z = u32::from(rng.bernoulli(design.pz1));
        let t = u8::from(rng.bernoulli(design.propensity[z as usize]));
        let y0 = design.draw_point(z, 0, rng);
        let y1 = design.draw_point(z, 1, rng);
        let y = if t == 1 { y1 } else { y0 };
        records.push(Record { t, z, y: y.to_vec() });
        counterfactuals.push([y0, y1]);
    }
    Ok(SyntheticSample {
        sample: ObservationalSample::new(records)?,
        counterfactuals,
    })
}

/// Balanced draw without confounding: `per_cell[z]` units per arm in stratum z.
pub fn draw_balanced_2d(
    design: &Design2D,
    per_cell: [usize; 2],
    rng: &mut SeededRng,
) -> Result<ObservationalSample> {
    design.validate()?;
    let mut records = Vec::with_capacity(2 * (per_cell[0] + per_cell[1]));
    for z in 0..2u32 {
        for t in 0..2u8 {
            for _ in 0..per_cell[z as usize] {
                records.push(Record {
                    t,
                    z,
                    y: design.draw_point(z, t, rng).to_vec(),
                });
            }
        }
    }
    ObservationalSample::new(records)
}

pub fn draw_motivating_1d(design: &Design1D, t: u8, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    if !(design.sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be > 0, got {}", design.sigma)));
    }
    Ok((0..n)
        .map(|_| {
            let center = if t == 1 {
                if rng.bernoulli(0.5) {
                    design.m + design.delta
                } else {
                    design.m - design.delta
                }
            } else {
                design.m
            };
            rng.normal(center, design.sigma)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mean: f64,
    pub sd: f64,
    pub replicates: Vec<f64>,
}

/// Stream ids at or above this base are reserved for benchmark replications.
pub const GROUND_TRUTH_STREAM_BASE: u64 = 1 << 40;

/// Counterfactual benchmark: per replication, draw `n_big` points from each
/// potential-outcome law in each stratum, take the landscape distance per
/// stratum and average with the true law of `Z`.
pub fn ground_truth_topological_effect(
    design: &Design2D,
    n_big: usize,
    seed: u64,
    summary: &SummaryConfig,
    lcfg: &LandscapeConfig,
    n_reps: usize,
) -> Result<GroundTruth> {
    design.validate()?;
    if n_reps == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    let weights = [1.0 - design.pz1, design.pz1];
    let replicates = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = SeededRng::new(seed, GROUND_TRUTH_STREAM_BASE + rep as u64);
            let mut effect = 0.0;
            for z in 0..2u32 {
                let c0 = draw_potential_outcomes_2d(design, z, 0, n_big, &mut rng)?;
                let c1 = draw_potential_outcomes_2d(design, z, 1, n_big, &mut rng)?;
                let l0 = landscape(&summarize(&c0, summary)?, lcfg)?;
                let l1 = landscape(&summarize(&c1, summary)?, lcfg)?;
                effect += weights[z as usize] * landscape_l2_distance(&l1, &l0)?;
            }
            Ok(effect)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_sd(&replicates);
    Ok(GroundTruth {
        mean,
        sd,
        replicates,
    })
}

/// Mean and unbiased sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Empirical `P(T = 1 | Z = z)` per stratum.
pub fn empirical_propensity(sample: &ObservationalSample) -> BTreeMap<u32, f64> {
    sample
        .strata()
        .into_iter()
        .map(|z| {
            let treated = sample.cell_count(1, z) as f64;
            let total = treated + sample.cell_count(0, z) as f64;
            (z, treated / total)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        mean_sd(xs)
    }

    #[test]
    fn rng_determinism_and_streams() {
        let a: Vec<f64> = {
            let mut r = SeededRng::new(7, 3);
            (0..10).map(|_| r.standard_normal()).collect()
        };
        let b: Vec<f64> = {
            let mut r = SeededRng::new(7, 3);
            (0..10).map(|_| r.standard_normal()).collect()
        };
        let c: Vec<f64> = {
            let mut r = SeededRng::new(7, 4);
            (0..10).map(|_| r.standard_normal()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn standard_normal_moments() {
        let mut r = SeededRng::new(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| r.standard_normal()).collect();
        let (m, s) = moments(&xs);
        assert!(m.abs() < 4.0 / (xs.len() as f64).sqrt());
        assert!((s - 1.0).abs() < 0.01);
    }

    #[test]
    fn potential_outcome_means_and_mixture_variance() {
        let d = Design2D::default();
        let n = 10_000;
        for z in 0..2u32 {
            for t in 0..2u8 {
                let mut rng = SeededRng::new(11, (z * 2 + t as u32) as u64);
                let c = draw_potential_outcomes_2d(&d, z, t, n, &mut rng).unwrap();
                let spread = if t == 1 { (d.sigma.powi(2) + d.delta.powi(2)).sqrt() } else { d.sigma };
                for k in 0..2 {
                    let (m, _) = moments(&c.coordinate(k));
                    let sd_k = if k == 0 { spread } else { d.sigma };
                    assert!(
                        (m - d.center(z)[k]).abs() < 4.0 * sd_k / (n as f64).sqrt(),
                        "z={z} t={t} k={k} mean {m}"
                    );
                }
                if t == 1 {
                    let (_, s) = moments(&c.coordinate(0));
                    // σ² + Δ² = 1.0324
                    assert!((s * s - 1.0324).abs() < 0.04, "variance {}", s * s);
                }
            }
        }
    }

    #[test]
    fn zero_delta_collapses_mixture() {
        let d = Design2D::default().with_delta(0.0);
        let mut rng = SeededRng::new(5, 0);
        let c0 = draw_potential_outcomes_2d(&d, 0, 0, 20_000, &mut rng).unwrap();
        let c1 = draw_potential_outcomes_2d(&d, 0, 1, 20_000, &mut rng).unwrap();
        let (m0, s0) = moments(&c0.coordinate(0));
        let (m1, s1) = moments(&c1.coordinate(0));
        assert!((m0 - m1).abs() < 4.0 * d.sigma * (2.0 / 20_000f64).sqrt());
        assert!((s0 - s1).abs() < 0.01);
    }

    #[test]
    fn observational_propensities() {
        let d = Design2D::default();
        let n = 10_000;
        let s = draw_observational_2d(&d, n, &mut SeededRng::new(3, 0)).unwrap();
        let pz1 = s.sample.records().iter().filter(|r| r.z == 1).count() as f64 / n as f64;
        assert!((pz1 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        let prop = empirical_propensity(&s.sample);
        let tol = 3.0 * (0.8 * 0.2 / (n as f64 / 2.0)).sqrt();
        assert!((prop[&1] - 0.8).abs() < tol, "{}", prop[&1]);
        assert!((prop[&0] - 0.2).abs() < tol, "{}", prop[&0]);
        // Consistency: the observed outcome is the potential outcome of the arm taken.
        for (r, cf) in s.sample.records().iter().zip(&s.counterfactuals) {
            assert_eq!(r.y, cf[r.t as usize].to_vec());
        }
    }

    #[test]
    fn observational_determinism() {
        let d = Design2D::default();
        let a = draw_observational_2d(&d, 600, &mut SeededRng::new(9, 1)).unwrap();
        let b = draw_observational_2d(&d, 600, &mut SeededRng::new(9, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn motivating_draws() {
        let mut rng = SeededRng::new(2, 0);
        let n = 10_000;
        let c = draw_motivating_1d(&Design1D::figure_control(), 0, n, &mut rng).unwrap();
        let t = draw_motivating_1d(&Design1D::figure_treated(), 1, n, &mut rng).unwrap();
        let (mc, _) = moments(&c);
        let (mt, st) = moments(&t);
        assert!(mc.abs() < 4.0 * 0.7 / (n as f64).sqrt());
        let sd_t = (0.45f64.powi(2) + 1.3f64.powi(2)).sqrt();
        assert!(mt.abs() < 4.0 * sd_t / (n as f64).sqrt());
        assert!((st - sd_t).abs() < 0.05);
        let collapsed = Design1D { m: 2.0, sigma: 1.0, delta: 0.0 };
        let a = draw_motivating_1d(&collapsed, 1, 5, &mut SeededRng::new(4, 0)).unwrap();
        let b = draw_motivating_1d(&collapsed, 1, 5, &mut SeededRng::new(4, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn figure_densities() {
        let c = Design1D::figure_control();
        let peak = c.density(0, 0.0);
        assert!((peak - 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * 0.7)).abs() < 1e-15);
        assert!((peak - 0.5699).abs() < 1e-4);
        let t = Design1D::figure_treated();
        for y in [0.1, 0.9, 1.3, 2.4] {
            assert!((t.density(1, y) - t.density(1, -y)).abs() < 1e-15);
        }
    }

    #[test]
    fn design_validation() {
        let d = Design2D { propensity: [0.0, 0.8], ..Design2D::default() };
        assert!(d.validate().is_err());
        let d = Design2D { sigma: 0.0, ..Design2D::default() };
        assert!(d.validate().is_err());
    }

    #[test]
    fn counterfactual_csv() {
        let s = draw_observational_2d(&Design2D::default(), 3, &mut SeededRng::new(1, 1)).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out, true).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,z,y1,y2,y0_1,y0_2,y1_1,y1_2\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
