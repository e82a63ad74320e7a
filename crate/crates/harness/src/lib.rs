//! Experiment runner for comparing belief estimators on phased evidence.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod study;

/// Hand-authored 32-node demonstration network, in the text network format.
pub const DEMO_NETWORK: &str = include_str!("../assets/demo32.net");
