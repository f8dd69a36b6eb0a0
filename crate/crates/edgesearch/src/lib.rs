//! Hardware-aware architecture search for multi-task dense-prediction
//! backbones.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`search_space`]: the per-layer genome encoding and backbone
//!   decoder.
//! - [`cost`]: an analytical roofline latency/MACs/params model.
//! - [`metrics`]: task/metric declarations, reports, and relative-delta
//!   summaries against a baseline.
//! - [`reward`]: metric normalization, geometric-mean accuracy
//!   aggregation, and soft latency penalties.
//! - [`evaluators`]: metric sources (deterministic surrogate or an
//!   ingested lookup table) and the end-to-end candidate scorer.
//! - [`evolution`]: the aging-evolution controller with checkpointing
//!   and Pareto-front extraction.
//! - [`depth`]: the composite absolute+relative depth-regression loss
//!   and a synthetic stability study.
//! - [`config`]: the TOML run configuration tying it all together.

// validators use `!(x > 0.0)` deliberately so NaN is rejected; the
// suggested `x <= 0.0` would silently accept it
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cost;
pub mod depth;
pub mod evaluators;
pub mod evolution;
pub mod fixtures;
pub mod metrics;
pub mod reward;
pub mod search_space;
