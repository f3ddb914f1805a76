//! Experiment harness around the pinchlab library: a validated
//! configuration layer, deterministic check suites, and report emission
//! with byte-stable serialisation.

pub mod config;
pub mod report;
pub mod suites;
