//! Beacon planning from floor-plan rasters.
//!
//! The pipeline extracts the walkable indoor path of a plan, detects
//! building-block symbols (doors, stairs, ...) as points of interest, snaps
//! them onto the skeleton of the path and traces a weighted, compass-oriented
//! connectivity graph between beacon locations.

pub mod detect;
pub mod error;
pub mod export;
pub mod imagecore;
pub mod learn;
pub mod overlay;
pub mod pathfind;
pub mod planner;
pub mod project;
pub mod skelgraph;
pub mod synth;

pub use error::{Error, Result};
