//! Failure-resilient inference for feed-forward networks split across
//! physical nodes.
//!
//! The crate trains partitioned dense networks with failout, routes
//! activations over skip hyperconnections when nodes crash, evaluates the
//! exact expected accuracy over every failure scenario, and simulates
//! crash/repair/heartbeat dynamics with per-link traffic accounting.

pub mod data;
pub mod error;
pub mod evaluator;
pub mod harness;
pub mod netsim;
pub mod nn;
pub mod resilinet;
pub mod topology;

pub use data::{Dataset, Split};
pub use error::{Error, Result};
