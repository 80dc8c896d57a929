//! Deterministic simulation of a static wireless mesh running AODV route
//! discovery, with per-node monitors that flag selfish forwarders.
//!
//! The layers build on each other:
//!
//! * [`net`]: topology, scenario configuration, RNG substreams
//! * [`aodv`]: control packets and per-node routing behavior
//! * [`monitor`]: overheard-transmission state machines and transition counts
//! * [`detect`]: statistical classification of monitored neighbors
//! * [`crosscheck`]: forwarding obligations derived from packet headers
//! * [`sim`]: the event loop, traces, replay, metrics and parameter sweeps

pub mod aodv;
pub mod crosscheck;
pub mod detect;
pub mod error;
pub mod monitor;
pub mod net;
pub mod sim;
pub mod time;

pub use error::{Error, Result};
pub use net::{NodeId, ScenarioConfig, Strategy, Topology};
pub use time::SimTime;
