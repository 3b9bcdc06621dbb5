//! Line-delimited JSON messages exchanged with an external trainer.
//!
//! One UTF-8 JSON object per line, discriminated by `type`:
//!
//! ```text
//! {"type":"init","v":1,"arm_names":["rho"],"config":{"seed":0}}
//! {"type":"init_ack","initial_val_loss":10.0}
//! {"type":"step","v":1,"interaction":3,"arm":{"rho":0.2},"updates":1000}
//! {"type":"step_ack","interaction":3,"val_loss":4.25}
//! {"type":"error","code":"duplicate_interaction","detail":"..."}
//! {"type":"shutdown"}
//! ```

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::BridgeError;

pub const PROTOCOL_VERSION: u32 = 1;

fn current_version() -> u32 {
    PROTOCOL_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BridgeMessage {
    Init {
        v: u32,
        arm_names: Vec<String>,
        #[serde(default)]
        config: Map<String, Value>,
    },
    InitAck {
        initial_val_loss: f64,
    },
    Step {
        #[serde(default = "current_version")]
        v: u32,
        interaction: u64,
        /// Arm coordinates by name, in arm-space dimension order.
        arm: IndexMap<String, f64>,
        updates: u64,
    },
    StepAck {
        interaction: u64,
        val_loss: f64,
    },
    Error {
        code: String,
        detail: String,
    },
    Shutdown {},
}

impl BridgeMessage {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        BridgeMessage::Error { code: code.into(), detail: detail.into() }
    }

    /// Serializes to a single line without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("bridge messages always serialize")
    }

    pub fn decode(line: &str) -> Result<Self, BridgeError> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
            .map_err(|e| BridgeError::Malformed(format!("{e}: {}", truncate(line))))
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
