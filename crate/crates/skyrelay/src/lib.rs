//! Discrete-time simulator and learning harness for energy-efficient,
//! freshness-aware aerial relay trajectory policies.
//!
//! A fleet of relay drones tours a waypoint graph collecting device
//! uplink data and hands it to a ground station over a range-gated
//! mmWave backhaul. The library models the physical layer
//! ([`channel`]), propulsion and transmission energy ([`energy`]),
//! per-waypoint information age ([`aoi`]), and the joint trajectory
//! decision process ([`env`]); trains a deep Q-network with experience
//! replay against it ([`net`], [`agent`]); and reproduces the
//! comparative experiment sweeps ([`harness`]).
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release -p skyrelay --example channel_basics
//! cargo run --release -p skyrelay --example energy_accounting
//! cargo run --release -p skyrelay --example aoi_timeline
//! cargo run --release -p skyrelay --example random_episode
//! cargo run --release -p skyrelay --example greedy_episode
//! cargo run --release -p skyrelay --example train_dqn
//! cargo run --release -p skyrelay --example waypoint_sweep
//! ```
//!
//! The `skyrelay` binary wraps the same machinery behind `train`,
//! `eval`, `sweep`, `validate`, and `replay` subcommands.

pub mod agent;
pub mod aoi;
pub mod channel;
pub mod config;
pub mod energy;
pub mod env;
pub mod error;
pub mod harness;
pub mod net;

#[cfg(test)]
pub(crate) mod testutil;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
