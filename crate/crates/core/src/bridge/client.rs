use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::protocol::{BridgeMessage, PROTOCOL_VERSION};
use super::BridgeError;
use crate::bandit::{Arm, LossObservation};
use crate::env::{EnvError, Environment};

/// How to reach the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Spawn `argv[0]` with the remaining arguments and talk over its stdio.
    Stdio(Vec<String>),
    /// Connect to `host:port`.
    Tcp(String),
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    timeout: Option<Duration>,
}

impl Connection {
    fn open(transport: &Transport, timeout: Option<Duration>) -> Result<Self, BridgeError> {
        match transport {
            Transport::Stdio(argv) => {
                let (program, args) =
                    argv.split_first().ok_or_else(|| BridgeError::Protocol("empty trainer command".into()))?;
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Self { writer: Box::new(stdin), lines: spawn_reader(stdout), child: Some(child), timeout })
            }
            Transport::Tcp(addr) => {
                let stream = match timeout {
                    Some(t) => {
                        let sock = addr
                            .to_socket_addrs()?
                            .next()
                            .ok_or_else(|| BridgeError::Protocol(format!("cannot resolve {addr}")))?;
                        TcpStream::connect_timeout(&sock, t)?
                    }
                    None => TcpStream::connect(addr.as_str())?,
                };
                stream.set_nodelay(true)?;
                let reader = stream.try_clone()?;
                Ok(Self { writer: Box::new(stream), lines: spawn_reader(reader), child: None, timeout })
            }
        }
    }

    fn send(&mut self, msg: &BridgeMessage) -> Result<(), BridgeError> {
        let mut line = msg.encode();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(disconnect)?;
        self.writer.flush().map_err(disconnect)
    }

    fn recv(&mut self) -> Result<BridgeMessage, BridgeError> {
        let next = match self.timeout {
            None => self.lines.recv().map_err(|_| BridgeError::Disconnected)?,
            Some(t) => match self.lines.recv_timeout(t) {
                Ok(line) => line,
                Err(RecvTimeoutError::Timeout) => return Err(BridgeError::Timeout(t.as_secs_f64())),
                Err(RecvTimeoutError::Disconnected) => return Err(BridgeError::Disconnected),
            },
        };
        BridgeMessage::decode(&next?)
    }
}

fn disconnect(e: std::io::Error) -> BridgeError {
    match e.kind() {
        std::io::ErrorKind::BrokenPipe | std::io::ErrorKind::ConnectionReset => BridgeError::Disconnected,
        _ => BridgeError::Io(e),
    }
}

fn spawn_reader<R: std::io::Read + Send + 'static>(r: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(r).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl Drop for Connection {
    fn drop(&mut self) {
        let _ = self.send(&BridgeMessage::Shutdown {});
        if let Some(child) = self.child.as_mut() {
            let deadline = Instant::now() + Duration::from_secs(5);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Environment backed by an external trainer process.
pub struct BridgeEnv {
    conn: Connection,
    arm_names: Vec<String>,
    initial_loss: f64,
    initialized: bool,
    next_interaction: u64,
}

/// Connects to a trainer and performs the init handshake.
///
/// `timeout_s = 0` waits indefinitely for each reply.
pub fn bridge_connect(
    transport: &Transport,
    timeout_s: f64,
    arm_names: Vec<String>,
    config: Map<String, Value>,
) -> Result<BridgeEnv, BridgeError> {
    let timeout = (timeout_s > 0.0).then(|| Duration::from_secs_f64(timeout_s));
    let mut conn = Connection::open(transport, timeout)?;
    conn.send(&BridgeMessage::Init { v: PROTOCOL_VERSION, arm_names: arm_names.clone(), config })?;
    let initial_loss = match conn.recv()? {
        BridgeMessage::InitAck { initial_val_loss } if initial_val_loss.is_finite() => initial_val_loss,
        BridgeMessage::InitAck { initial_val_loss } => {
            return Err(BridgeError::Protocol(format!("non-finite initial loss {initial_val_loss}")))
        }
        BridgeMessage::Error { code, detail } if code == "version_mismatch" => {
            return Err(BridgeError::VersionMismatch(detail))
        }
        BridgeMessage::Error { code, detail } => return Err(BridgeError::Remote { code, detail }),
        other => return Err(BridgeError::Protocol(format!("expected init_ack, got {}", other.encode()))),
    };
    Ok(BridgeEnv { conn, arm_names, initial_loss, initialized: false, next_interaction: 1 })
}

impl BridgeEnv {
    pub fn initial_loss(&self) -> f64 {
        self.initial_loss
    }

    fn request_step(&mut self, arm: Arm<'_>, updates: u64) -> Result<LossObservation, BridgeError> {
        let coords = arm.point.coords();
        if coords.len() != self.arm_names.len() {
            return Err(BridgeError::Protocol(format!(
                "arm has {} coordinates but {} names were announced",
                coords.len(),
                self.arm_names.len()
            )));
        }
        let t = self.next_interaction;
        let map = self.arm_names.iter().cloned().zip(coords.iter().copied()).collect();
        self.conn.send(&BridgeMessage::Step { v: PROTOCOL_VERSION, interaction: t, arm: map, updates })?;
        match self.conn.recv()? {
            BridgeMessage::StepAck { interaction, val_loss } if interaction == t => {
                if !val_loss.is_finite() {
                    return Err(BridgeError::Protocol(format!("non-finite loss {val_loss} at interaction {t}")));
                }
                self.next_interaction += 1;
                Ok(LossObservation::new(t, val_loss))
            }
            BridgeMessage::StepAck { interaction, .. } => {
                Err(BridgeError::Protocol(format!("step {t} answered with step_ack for interaction {interaction}")))
            }
            BridgeMessage::Error { code, detail } => Err(BridgeError::Remote { code, detail }),
            other => Err(BridgeError::Protocol(format!("expected step_ack, got {}", other.encode()))),
        }
    }
}

impl Environment for BridgeEnv {
    fn init(&mut self) -> Result<LossObservation, EnvError> {
        if self.initialized {
            return Err(EnvError::AlreadyInitialized);
        }
        self.initialized = true;
        Ok(LossObservation::new(0, self.initial_loss))
    }

    fn step(&mut self, arm: Arm<'_>, updates: u64) -> Result<LossObservation, EnvError> {
        if !self.initialized {
            return Err(EnvError::NotInitialized);
        }
        Ok(self.request_step(arm, updates)?)
    }
}
