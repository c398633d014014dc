//! Training-free instance-level collaborative perception.
//!
//! Agents share a small set of quality-filtered detection instances instead of
//! dense feature maps. The receiving agent splits the combined instance table
//! into objects seen by one agent and objects seen by several, fuses the latter
//! with two attention passes, and evaluates the result against ground truth.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: SE(2) poses, oriented boxes, rotated IoU.
//! * [`scenario`]: synthetic scenes and a detector emulator.
//! * [`quality`]: the quality-aware loss and transmission filter.
//! * [`wire`]: the binary message format and bandwidth accounting.
//! * [`routing`]: single / cooperative branch split.
//! * [`fusion`]: positional encodings and attention fusion.
//! * [`cogt`]: cooperative ground-truth sampling.
//! * [`eval`]: AP, Hungarian matching, NMS, pose noise.
//! * [`pipeline`] and [`report`]: end-to-end runs and their output formats.
//! * [`cli`]: the command-line front end.

pub mod cli;
pub mod cogt;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod pipeline;
pub mod quality;
pub mod report;
pub mod rng;
pub mod routing;
pub mod scenario;
pub mod wire;

pub use error::{Error, Result};
