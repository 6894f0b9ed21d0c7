//! Vehicle speed and heading from sequential-band satellite imagery.
//!
//! Push-frame sensors expose their red, green and blue bands at slightly
//! different instants, so a moving vehicle leaves a chromatic streak whose
//! length is proportional to its speed. This crate synthesizes such scenes,
//! detects and vectorizes the streaks, scores detections against truth and
//! aggregates them into daily series.

pub mod config;
pub mod detection;
pub mod detector;
pub mod error;
pub mod eval;
pub mod filters;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod mask;
pub mod pipeline;
pub mod plot;
pub mod raster;
pub mod sensor;
pub mod synth;
pub mod timeseries;
pub mod vectorize;

pub use error::{Error, Result};
