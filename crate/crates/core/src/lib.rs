//! Room layout inference by aligning layout conjunctions against an
//! edge-likelihood feature field.
//!
//! A layout is a set of 2D conjunction points joined by labeled edges
//! (wall-floor, wall-wall, wall-ceiling) according to one of a small catalog
//! of topologies. Given a 4-channel field of per-pixel class likelihoods,
//! [`optim::run`] moves the conjunctions to maximize the consistency between
//! the rasterized layout and the field.

pub mod bench;
pub mod cli;
pub mod error;
pub mod field;
pub mod layout;
pub mod metrics;
pub mod objective;
pub mod optim;
pub mod raster;

pub use error::{Error, Result};
pub use field::{load_field, save_field, synth_field, FeatureField, SynthParams};
pub use layout::{
    average_init, AnchorConstraint, Catalog, LabelClass, LayoutFile, LayoutState, Point2, RegionLabel, TopologySpec,
};
pub use metrics::{evaluate, EvalResult};
pub use objective::{consistency, energy};
pub use optim::{run, select_topology, Method, OptimConfig, OptimReport};
pub use raster::{rasterize_edges, rasterize_regions, LabelMap, RegionMap};
