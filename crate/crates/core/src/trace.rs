//! Regret traces shared by every policy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based round.
    pub t: usize,
    pub arm: usize,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

/// Index diagnostics for the estimator in force after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochDiagnostic {
    pub epoch: usize,
    pub arm: usize,
    pub index_error: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub rows: Vec<TraceRow>,
    pub epochs: Vec<EpochDiagnostic>,
    /// Round at which each epoch ended.
    pub epoch_ends: Vec<usize>,
    pub smoothness: Option<crate::smooth::SmoothnessEstimate>,
}

impl RegretTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, arm: usize, inst_regret: f64) {
        let cum_regret = self.cumulative() + inst_regret;
        self.rows.push(TraceRow {
            t: self.rows.len() + 1,
            arm,
            inst_regret,
            cum_regret,
        });
    }

    pub fn cumulative(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret after `t` rounds (0 for `t == 0`).
    pub fn cumulative_at(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.rows[t.min(self.rows.len()) - 1].cum_regret
        }
    }

    /// `Reg(S_m) / S_m` at each recorded epoch end.
    pub fn average_regret_at_epoch_ends(&self) -> Vec<f64> {
        self.epoch_ends
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| self.cumulative_at(s) / s as f64)
            .collect()
    }
}
