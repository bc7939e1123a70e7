//! Experiment harness around the sketching library: JSON experiment
//! configs, a task runner with seeded parallel trials and deterministic
//! JSONL/CSV outputs, and the constant-calibration search.

pub mod calibrate;
pub mod config;
pub mod runner;
pub mod support;
