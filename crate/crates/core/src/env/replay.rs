//! Replays validation losses logged from an earlier run.
//!
//! CSV schema: header `arm_index,interaction,val_loss`, one row per logged
//! loss. Rows with `interaction = 0` give the initial loss; if there are
//! several, they must agree.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Counter, EnvError, Environment};
use crate::bandit::{Arm, History, LossObservation};

pub const REPLAY_HEADER: [&str; 3] = ["arm_index", "interaction", "val_loss"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Row {
    arm_index: usize,
    interaction: u64,
    val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplaySpec {
    pub table: HashMap<(usize, u64), f64>,
    pub initial_loss: f64,
}

impl ReplaySpec {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, EnvError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| EnvError::Data(format!("replay header: {e}")))?;
        if headers.iter().collect::<Vec<_>>() != REPLAY_HEADER {
            return Err(EnvError::Data(format!("replay header must be {}", REPLAY_HEADER.join(","))));
        }
        let mut table = HashMap::new();
        let mut initial: Option<f64> = None;
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| EnvError::Data(format!("replay row {}: {e}", line + 2)))?;
            if !row.val_loss.is_finite() {
                return Err(EnvError::Data(format!("replay row {}: non-finite loss", line + 2)));
            }
            if row.interaction == 0 {
                match initial {
                    Some(v) if v.to_bits() != row.val_loss.to_bits() => {
                        return Err(EnvError::Data(format!(
                            "conflicting initial losses {v} and {} in replay log",
                            row.val_loss
                        )))
                    }
                    _ => initial = Some(row.val_loss),
                }
            }
            if table.insert((row.arm_index, row.interaction), row.val_loss).is_some() {
                return Err(EnvError::Data(format!(
                    "duplicate replay entry for arm {} at interaction {}",
                    row.arm_index, row.interaction
                )));
            }
        }
        let initial_loss = initial.ok_or_else(|| EnvError::Data("replay log has no interaction-0 row".into()))?;
        Ok(Self { table, initial_loss })
    }

    pub fn from_path(path: &Path) -> Result<Self, EnvError> {
        let file = std::fs::File::open(path).map_err(|e| EnvError::Data(format!("{}: {e}", path.display())))?;
        Self::from_reader(file).map_err(|e| EnvError::Data(format!("{}: {e}", path.display())))
    }

    pub fn lookup(&self, arm_index: usize, t: u64) -> Result<f64, EnvError> {
        self.table
            .get(&(arm_index, t))
            .copied()
            .ok_or_else(|| EnvError::Data(format!("no logged loss for arm {arm_index} at interaction {t}")))
    }
}

/// Writes a history in replay format. The initial loss is logged against the
/// first played arm (arm 0 for an empty history).
pub fn write_replay_csv<W: Write>(history: &History, writer: W) -> Result<(), EnvError> {
    let mut w = csv::Writer::from_writer(writer);
    let data_err = |e: csv::Error| EnvError::Data(e.to_string());
    w.write_record(REPLAY_HEADER).map_err(data_err)?;
    let first_arm = history.records().first().map_or(0, |r| r.arm_index);
    w.write_record([first_arm.to_string(), "0".into(), history.initial_loss().to_string()]).map_err(data_err)?;
    for r in history.records() {
        w.write_record([r.arm_index.to_string(), r.interaction.to_string(), r.loss_after.to_string()])
            .map_err(data_err)?;
    }
    w.flush().map_err(|e| EnvError::Data(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct ReplayEnv {
    spec: ReplaySpec,
    counter: Counter,
}

impl ReplayEnv {
    pub fn new(spec: ReplaySpec) -> Self {
        Self { spec, counter: Counter::default() }
    }
}

impl Environment for ReplayEnv {
    fn init(&mut self) -> Result<LossObservation, EnvError> {
        self.counter.start()?;
        Ok(LossObservation::new(0, self.spec.initial_loss))
    }

    fn step(&mut self, arm: Arm<'_>, _updates: u64) -> Result<LossObservation, EnvError> {
        let t = self.counter.peek()?;
        let loss = self.spec.lookup(arm.index, t)?;
        self.counter.advance()?;
        Ok(LossObservation::new(t, loss))
    }
}
