//! Deterministic simulation engine and experiment harness for decentralized
//! binary consensus on lattice networks containing unreliable agents.
//!
//! Reliable agents exchange values with their graph neighbors in lock-step
//! rounds and resample their value from the trusted subset of what they
//! receive (a voter-style update). Each reliable agent additionally learns a
//! binary trust score per neighbor with independent tabular Q-learning
//! (RLTC), toggling at most one score per round; fixed Trust All and Oracle
//! baselines share the same episode loop. The [`oracle`] module evolves the
//! exact value distribution on small instances as a ground truth for the
//! Monte Carlo engine, and [`harness`] runs seeded, reproducible repetitions
//! and parameter sweeps.
//!
//! Everything downstream of a seed is deterministic: a (config, seed) pair
//! maps to one result, byte-for-byte, regardless of worker count.

pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod learning;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod report;
pub mod topology;

pub use error::{Error, Result};
