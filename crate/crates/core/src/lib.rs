//! Trace-driven simulator for smart objects: sensor-adjacent nodes that
//! classify activity locally with an O(1) sliding window and an integer
//! naive-Bayes detector, and radio only the detected actions.
//!
//! - [`trace`]: CASAS-style log parsing, synthetic traces, dataset statistics
//! - [`sensor_frontend`]: 1 Hz ON-only impulse events and 3-byte identities
//! - [`smart_object`]: the event window, detectors, learning and prediction
//! - [`energy`]: radio/MCU/battery arithmetic
//! - [`sim`]: baseline vs smart-object replay and reports
//! - [`cli`]: the `sosim` command

pub mod cli;
pub mod energy;
pub mod error;
pub mod sensor_frontend;
pub mod sim;
pub mod smart_object;
pub mod trace;

pub use error::{Error, Result};
