use serde::{Deserialize, Serialize};

use crate::gp::InputPoint;

use super::arms::Arm;
use super::BanditError;

/// Validation loss reported after `interaction` rounds (0 = untrained model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossObservation {
    pub interaction: u64,
    pub validation_loss: f64,
}

impl LossObservation {
    pub fn new(interaction: u64, validation_loss: f64) -> Self {
        Self { interaction, validation_loss }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardRecord {
    pub interaction: u64,
    pub arm_index: usize,
    pub arm: InputPoint,
    pub reward: f64,
    pub loss_before: f64,
    pub loss_after: f64,
}

/// Reward of one interaction: the drop in validation loss it produced.
pub fn reward_from_losses(
    prev: LossObservation,
    curr: LossObservation,
    arm: Arm<'_>,
) -> Result<RewardRecord, BanditError> {
    if curr.interaction != prev.interaction + 1 {
        return Err(BanditError::InvalidArgument(format!(
            "losses at interactions {} and {} are not consecutive",
            prev.interaction, curr.interaction
        )));
    }
    for v in [prev.validation_loss, curr.validation_loss] {
        if !v.is_finite() {
            return Err(BanditError::InvalidArgument(format!("non-finite validation loss {v}")));
        }
    }
    Ok(RewardRecord {
        interaction: curr.interaction,
        arm_index: arm.index,
        arm: arm.point.clone(),
        reward: prev.validation_loss - curr.validation_loss,
        loss_before: prev.validation_loss,
        loss_after: curr.validation_loss,
    })
}

/// Interaction log of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    initial_loss: f64,
    records: Vec<RewardRecord>,
}

impl History {
    pub fn new(initial_loss: f64) -> Self {
        Self { initial_loss, records: Vec::new() }
    }

    /// Appends a record; it must continue the interaction count and start from
    /// the previous record's loss.
    pub fn push(&mut self, record: RewardRecord) -> Result<(), BanditError> {
        let expected = self.records.len() as u64 + 1;
        if record.interaction != expected {
            return Err(BanditError::InvalidArgument(format!(
                "expected interaction {expected}, got {}",
                record.interaction
            )));
        }
        if record.loss_before.to_bits() != self.last_loss().to_bits() {
            return Err(BanditError::InvalidArgument(format!(
                "record starts from loss {} but history is at {}",
                record.loss_before,
                self.last_loss()
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn initial_loss(&self) -> f64 {
        self.initial_loss
    }

    pub fn records(&self) -> &[RewardRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Most recent validation loss, `initial_loss` before any interaction.
    pub fn last_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss_after)
    }

    pub fn last_observation(&self) -> LossObservation {
        LossObservation::new(self.records.len() as u64, self.last_loss())
    }
}

pub fn cumulative_reward(h: &History) -> f64 {
    h.records.iter().map(|r| r.reward).sum()
}

/// Relative deviation between the summed rewards and `initial - final`.
pub fn telescoping_error(h: &History) -> f64 {
    let direct = h.initial_loss - h.last_loss();
    let scale = h.initial_loss.abs().max(h.last_loss().abs()).max(f64::MIN_POSITIVE);
    (cumulative_reward(h) - direct).abs() / scale
}
