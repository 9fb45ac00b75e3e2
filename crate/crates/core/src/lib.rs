//! Goal-conditioned off-policy reinforcement learning with a high replay
//! ratio: an ensemble critic (REDQ), store-time hindsight relabeling, and
//! target values bounded to the range implied by a `{-1, 0}` sparse reward.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation over values; file formats, configuration and the command line
//! live in the companion `hredq` crate.
//!
//! Module map:
//!
//! - [`nn`]: multilayer perceptrons with optional layer normalization, exact
//!   backward passes, Adam, and finite-difference gradient checks.
//! - [`env`]: the goal-augmented environment interface and two point-mass
//!   tasks with sparse rewards.
//! - [`replay`]: a ring buffer that stores hindsight-relabeled copies of
//!   every episode.
//! - [`agent`]: the ensemble actor-critic, its REDQ training step, and the
//!   periodic-reset comparator.
//! - [`metrics`]: evaluation rollouts, Q-divergence probes, interquartile
//!   means and stratified bootstrap intervals.
#![no_std]
// `!(x > 0.0)` style checks reject NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod agent;
pub mod env;
mod error;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
