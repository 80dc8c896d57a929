//! Event loop, traffic, trace recording and replay, metrics and sweeps.

mod engine;
mod observer;
mod queue;
mod replay;
mod sweep;
pub mod trace;

pub use engine::{plant_selfish, run, run_with, RunMetrics, RunOptions, RunOutput};
pub use observer::{
    node_verdict_majority, rates, MetricsRecord, ModeRates, MonitorReport, ObservationOutcome,
    Observatory, TickDetail,
};
pub use queue::EventQueue;
pub use replay::{replay, replay_file, replay_on, ReplayOutput};
pub use sweep::{
    default_drop_probs, mean_sd, sweep, CellResult, FinalRates, Mode, SweepMetadata, SweepResult,
    SweepRow, SweepSpec, SEED_SCHEME,
};
pub use trace::{
    parse_trace, read_trace, trace_to_string, write_trace, TraceEvent, TraceHeader, TRACE_VERSION,
};
