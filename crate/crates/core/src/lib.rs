//! Persistent-homology summaries of outcome distributions and stratified
//! topological treatment effects.
//!
//! The pipeline is: samples → [`filtration`] (persistence diagrams) →
//! [`landscape`] (fixed-grid embedding) → [`estimands`] (stratified effects).
//! [`synth`] generates designs where treatment changes the shape of the
//! outcome law but not its conditional mean, and [`experiments`] runs the
//! Monte Carlo studies on them.

pub mod diagram;
pub mod error;
pub mod estimands;
pub mod experiments;
pub mod filtration;
pub mod landscape;
mod matching;
pub mod sample;
pub mod synth;

pub use diagram::{
    bottleneck_distance, diagram_distance, wasserstein_distance, DiagramMetric, InfiniteBarPolicy,
    Orientation, PersistenceDiagram, PersistencePair,
};
pub use error::{Error, Result};
pub use filtration::{GridSpec, PointCloud, SummaryConfig, SummaryKind};
pub use landscape::{Landscape, LandscapeConfig};
pub use sample::{ObservationalSample, Record};
