//! Observation records shared by every optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::FlingParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Mab,
    Cem,
    Exec,
    Baseline,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Mab => "mab",
            Phase::Cem => "cem",
            Phase::Exec => "exec",
            Phase::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EiThreshold,
    IterationLimit,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::EiThreshold => "ei-threshold",
            StopReason::IterationLimit => "iteration-limit",
        }
    }
}

/// One environment trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub arm: Option<usize>,
    pub params: FlingParams,
    pub reward: f64,
    pub phase: Phase,
    /// Seed of the stream that chose this action.
    pub seed: u64,
    pub best_posterior_mean: Option<f64>,
    pub max_ei: Option<f64>,
    pub stopped_reason: Option<StopReason>,
}

/// Ordered trial history; indices are assigned on push.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    records: Vec<TrialRecord>,
}

impl TrialLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a trial and returns its index.
    pub fn push(
        &mut self,
        phase: Phase,
        arm: Option<usize>,
        params: FlingParams,
        reward: f64,
        seed: u64,
    ) -> Result<usize> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        let trial = self.records.len();
        self.records.push(TrialRecord {
            trial,
            arm,
            params,
            reward,
            phase,
            seed,
            best_posterior_mean: None,
            max_ei: None,
            stopped_reason: None,
        });
        Ok(trial)
    }

    pub fn last_mut(&mut self) -> Option<&mut TrialRecord> {
        self.records.last_mut()
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn phase_count(&self, phase: Phase) -> usize {
        self.records.iter().filter(|r| r.phase == phase).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter()
    }
}
