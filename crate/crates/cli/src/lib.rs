//! Command-line front end for the distributional semantics toolkit: layered
//! settings, reproducibility records, the model-building pipeline and the
//! model × dataset grid driver.

pub mod config;
pub mod grid;
pub mod pipeline;
pub mod runinfo;
