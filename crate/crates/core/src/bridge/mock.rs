//! A conforming trainer that answers with the synthetic loss model.
//!
//! The synthetic spec and the environment seed may be sent in the init
//! config under `"synthetic"` and `"seed"`; otherwise the spec given at
//! startup and seed 0 are used.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;

use serde_json::{Map, Value};

use super::protocol::{BridgeMessage, PROTOCOL_VERSION};
use crate::env::Environment;
use crate::env::{SyntheticEnv, SyntheticPretrainSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockTransport {
    Stdio,
    /// Listen on this port on localhost; 0 picks a free port. The bound
    /// address is printed to stdout as `listening <addr>`.
    Tcp(u16),
}

struct Session {
    env: SyntheticEnv,
    arm_names: Vec<String>,
    last: u64,
}

/// Serves one connection until `shutdown` (returns 0) or end of input
/// (returns 1).
pub fn serve<R: BufRead, W: Write>(spec: &SyntheticPretrainSpec, reader: R, mut writer: W) -> io::Result<i32> {
    let mut session: Option<Session> = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match BridgeMessage::decode(&line) {
            Err(e) => Some(BridgeMessage::error("malformed", e.to_string())),
            Ok(BridgeMessage::Shutdown {}) => return Ok(0),
            Ok(msg) => Some(handle(spec, &mut session, msg)),
        };
        if let Some(reply) = reply {
            writeln!(writer, "{}", reply.encode())?;
            writer.flush()?;
        }
    }
    Ok(1)
}

fn handle(default_spec: &SyntheticPretrainSpec, session: &mut Option<Session>, msg: BridgeMessage) -> BridgeMessage {
    match msg {
        BridgeMessage::Init { v, arm_names, config } => {
            if v != PROTOCOL_VERSION {
                return BridgeMessage::error(
                    "version_mismatch",
                    format!("trainer speaks v{PROTOCOL_VERSION}, got v{v}"),
                );
            }
            if session.is_some() {
                return BridgeMessage::error("already_initialized", "init received twice");
            }
            match start(default_spec, arm_names, &config) {
                Ok((s, initial)) => {
                    *session = Some(s);
                    BridgeMessage::InitAck { initial_val_loss: initial }
                }
                Err(detail) => BridgeMessage::error("bad_config", detail),
            }
        }
        BridgeMessage::Step { v, interaction, arm, updates } => {
            let Some(s) = session.as_mut() else {
                return BridgeMessage::error("not_initialized", "step before init");
            };
            if v != PROTOCOL_VERSION {
                return BridgeMessage::error("version_mismatch", format!("got v{v}"));
            }
            if interaction <= s.last {
                return BridgeMessage::error(
                    "duplicate_interaction",
                    format!("interaction {interaction} already served"),
                );
            }
            if interaction != s.last + 1 {
                return BridgeMessage::error(
                    "out_of_order",
                    format!("expected interaction {}, got {interaction}", s.last + 1),
                );
            }
            let coords: Option<Vec<f64>> = s.arm_names.iter().map(|n| arm.get(n).copied()).collect();
            let Some(coords) = coords.filter(|_| arm.len() == s.arm_names.len()) else {
                return BridgeMessage::error("bad_arm", format!("arm must name exactly {:?}", s.arm_names));
            };
            match s.env.step_point(&coords, updates) {
                Ok(obs) => {
                    s.last = interaction;
                    BridgeMessage::StepAck { interaction, val_loss: obs.validation_loss }
                }
                Err(e) => BridgeMessage::error("step_failed", e.to_string()),
            }
        }
        other => BridgeMessage::error("unexpected_message", other.encode()),
    }
}

fn start(
    default_spec: &SyntheticPretrainSpec,
    arm_names: Vec<String>,
    config: &Map<String, Value>,
) -> Result<(Session, f64), String> {
    let spec = match config.get("synthetic") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| format!("synthetic: {e}"))?,
        None => default_spec.clone(),
    };
    let seed = match config.get("seed") {
        Some(v) => v.as_u64().ok_or_else(|| format!("seed must be an unsigned integer, got {v}"))?,
        None => 0,
    };
    if arm_names.len() != spec.optimum.len() {
        return Err(format!("{} arm names for a {}-dimensional model", arm_names.len(), spec.optimum.len()));
    }
    let mut env = SyntheticEnv::new(spec, seed).map_err(|e| e.to_string())?;
    let initial = env.init().map_err(|e| e.to_string())?.validation_loss;
    Ok((Session { env, arm_names, last: 0 }, initial))
}

pub fn mock_trainer_main(spec: &SyntheticPretrainSpec, transport: MockTransport) -> i32 {
    let result = match transport {
        MockTransport::Stdio => {
            let stdin = io::stdin();
            serve(spec, stdin.lock(), io::stdout().lock())
        }
        MockTransport::Tcp(port) => (|| {
            let listener = TcpListener::bind(("127.0.0.1", port))?;
            println!("listening {}", listener.local_addr()?);
            io::stdout().flush()?;
            let (stream, _) = listener.accept()?;
            stream.set_nodelay(true)?;
            let reader = BufReader::new(stream.try_clone()?);
            serve(spec, reader, stream)
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mock trainer: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(lines: &[&str]) -> (i32, Vec<BridgeMessage>) {
        let input = lines.join("\n") + "\n";
        let mut out = Vec::new();
        let code = serve(&SyntheticPretrainSpec::default(), input.as_bytes(), &mut out).unwrap();
        let replies = String::from_utf8(out).unwrap().lines().map(|l| BridgeMessage::decode(l).unwrap()).collect();
        (code, replies)
    }

    const INIT: &str = r#"{"type":"init","v":1,"arm_names":["rho"],"config":{"seed":3}}"#;

    fn step(t: u64) -> String {
        format!(r#"{{"type":"step","v":1,"interaction":{t},"arm":{{"rho":0.15}},"updates":100}}"#)
    }

    #[test]
    fn shutdown_right_after_init() {
        let (code, replies) = run(&[INIT, r#"{"type":"shutdown"}"#]);
        assert_eq!(code, 0);
        assert_eq!(replies, vec![BridgeMessage::InitAck { initial_val_loss: 10.0 }]);
    }

    #[test]
    fn three_steps_then_shutdown() {
        let (s1, s2, s3) = (step(1), step(2), step(3));
        let (code, replies) = run(&[INIT, &s1, &s2, &s3, r#"{"type":"shutdown"}"#]);
        assert_eq!(code, 0);
        let ts: Vec<u64> = replies[1..]
            .iter()
            .map(|m| match m {
                BridgeMessage::StepAck { interaction, .. } => *interaction,
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(ts, vec![1, 2, 3]);
    }

    #[test]
    fn duplicate_step_is_rejected() {
        let s1 = step(1);
        let (_, replies) = run(&[INIT, &s1, &s1]);
        assert!(matches!(&replies[2], BridgeMessage::Error { code, .. } if code == "duplicate_interaction"));
    }

    #[test]
    fn malformed_input_gets_error_and_service_continues() {
        let s1 = step(1);
        let (code, replies) = run(&[INIT, "not json", &s1]);
        assert_eq!(code, 1);
        assert!(matches!(&replies[1], BridgeMessage::Error { code, .. } if code == "malformed"));
        assert!(matches!(replies[2], BridgeMessage::StepAck { interaction: 1, .. }));
    }

    #[test]
    fn version_and_order_checks() {
        let (_, r) = run(&[r#"{"type":"init","v":2,"arm_names":["rho"],"config":{}}"#]);
        assert!(matches!(&r[0], BridgeMessage::Error { code, .. } if code == "version_mismatch"));
        let s2 = step(2);
        let (_, r) = run(&[INIT, &s2]);
        assert!(matches!(&r[1], BridgeMessage::Error { code, .. } if code == "out_of_order"));
        let s1 = step(1);
        let (_, r) = run(&[&s1]);
        assert!(matches!(&r[0], BridgeMessage::Error { code, .. } if code == "not_initialized"));
    }
}
