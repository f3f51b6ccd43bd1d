//! Discrete-event simulation of node crashes and repairs, heartbeat failure
//! detection, request streams and per-link traffic.

mod bandwidth;
mod config;
mod sim;

pub use bandwidth::{bandwidth_per_inference, bandwidth_table, topology_bandwidth, BandwidthRow, TrafficLedger};
pub use config::{NodeReliability, SimConfig, NORMAL_PRESET};
pub use sim::{run_sim, run_sim_traced, write_trace, Event, EventKind, SimReport, TraceRecord, WindowStat};
