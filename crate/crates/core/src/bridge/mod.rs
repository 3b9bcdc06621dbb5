//! Driving an out-of-process trainer as an [`Environment`](crate::env::Environment).

mod client;
mod mock;
mod protocol;

pub use client::{bridge_connect, BridgeEnv, Transport};
pub use mock::{mock_trainer_main, serve, MockTransport};
pub use protocol::{BridgeMessage, PROTOCOL_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("timed out after {0} s waiting for the trainer")]
    Timeout(f64),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol version mismatch: {0}")]
    VersionMismatch(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("trainer disconnected")]
    Disconnected,
    #[error("trainer reported {code}: {detail}")]
    Remote { code: String, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
