//! Six-dimensional movable antenna (6DMA) sensing: array geometry, radiation
//! patterns, echo channel, Cramér-Rao bounds on target azimuths, and the
//! particle-swarm placement optimizer, with baselines and an experiment
//! harness.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod pattern;
pub mod pso;
pub mod scenario;
pub mod schemes;
