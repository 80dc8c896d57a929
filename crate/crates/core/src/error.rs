use std::io;

use thiserror::Error;

use crate::net::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("could not build a connected topology after {attempts} placement attempts")]
    ConnectivityUnreachable { attempts: usize },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("node {0} is not a monitored neighbor")]
    UnknownNeighbor(NodeId),

    #[error("malformed packet: {0}")]
    MalformedPacket(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("trace version {found} is not supported (expected {expected})")]
    TraceVersionMismatch { found: u32, expected: u32 },

    #[error("corrupt trace: {0}")]
    TraceCorrupt(String),

    #[error("no monitor verdicts for node {0}")]
    NoMonitors(NodeId),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Configuration problems map to a distinct process exit code in the CLI.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::ConfigInvalid(_))
    }
}
