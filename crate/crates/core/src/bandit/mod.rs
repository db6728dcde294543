//! Batched single-index bandit with per-covariate arm elimination.
//!
//! Epoch `m` explores uniformly over the active set `K_{m-1}(x)` of each
//! incoming covariate. At the end of the epoch every arm's reward function is
//! refitted on that epoch's log only, and the active sets of later epochs are
//! defined recursively from the frozen per-epoch estimators: a pre-selection
//! against the previous epoch's estimates at half its confidence level, then
//! an elimination against the new estimates.

pub mod schedule;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use schedule::{build_schedule, calibrate_c_t, calibrate_with, epoch_length, EpochSchedule};

use crate::env::{EnvironmentSpec, LabeledSample};
use crate::lpe::floor_strict;
use crate::mrc::{Direction, MrcSearchConfig};
use crate::sireg::{fit_sireg, RewardEstimator, SiregConfig};
use crate::trace::{EpochDiagnostic, RegretTrace};
use crate::{Result, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    pub beta: f64,
    /// Fixed `C_T`; calibrated by [`calibrate_c_t`] when unset.
    pub c_t: Option<f64>,
    pub c_eps: f64,
    pub c_h: f64,
    /// Lower bound on the epoch count used by `C_T` calibration.
    pub min_epochs: usize,
    pub cross_fit: bool,
    /// Clamp estimated rewards into `[0, 1]` (for Bernoulli rewards).
    pub clamp_predictions: bool,
    pub direction: Direction,
    pub mrc: MrcSearchConfig,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            beta: 1.5,
            c_t: None,
            c_eps: 0.5,
            c_h: 1.0,
            min_epochs: 3,
            cross_fit: true,
            clamp_predictions: false,
            direction: Direction::Increasing,
            mrc: MrcSearchConfig::default(),
        }
    }
}

impl BanditConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    /// Schedule for horizon `n`, calibrating `C_T` if needed.
    pub fn schedule(&self, n: usize, d: usize) -> Result<EpochSchedule> {
        let c_t = match self.c_t {
            Some(c) => c,
            None => calibrate_c_t(n, d, self.beta, self.c_eps, self.min_epochs)?,
        };
        build_schedule(n, d, self.beta, c_t, self.c_eps)
    }

    /// Samples an arm needs within an epoch to be refitted.
    pub fn min_fit_samples(&self) -> usize {
        4 * (floor_strict(self.beta) + 2)
    }
}

/// Reward estimate of one arm for one epoch.
#[derive(Debug, Clone)]
pub enum ArmEstimate {
    /// The initial estimate `g_{k,0} = 0`.
    Zero,
    /// A fixed value everywhere.
    Constant(f64),
    Fitted(Arc<RewardEstimator>),
}

impl ArmEstimate {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ArmEstimate::Zero => 0.0,
            ArmEstimate::Constant(c) => *c,
            ArmEstimate::Fitted(est) => est.value(x),
        }
    }

    pub fn fitted(&self) -> Option<&RewardEstimator> {
        match self {
            ArmEstimate::Fitted(e) => Some(e),
            _ => None,
        }
    }
}

/// Active sets computed along the elimination chain for one covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveChain {
    /// `K_0, K_1, ..., K_m`.
    pub sets: Vec<Vec<usize>>,
    /// `K_{1/2}, K_{3/2}, ..., K_{m-1/2}`.
    pub preselected: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct BanditState {
    k: usize,
    eps: Vec<f64>,
    clamp: bool,
    /// `estimators[j][k]` is `g_{k,j}`; frozen once pushed.
    estimators: Vec<Vec<ArmEstimate>>,
    /// Log of the epoch in progress, per arm.
    logs: Vec<Vec<LabeledSample>>,
}

impl BanditState {
    pub fn new(k: usize, schedule: &EpochSchedule, clamp: bool) -> Self {
        Self {
            k,
            eps: schedule.eps.clone(),
            clamp,
            estimators: vec![vec![ArmEstimate::Zero; k]],
            logs: vec![Vec::new(); k],
        }
    }

    /// State with given per-epoch estimators; `estimators[0]` is epoch 0.
    pub fn from_estimators(eps: Vec<f64>, estimators: Vec<Vec<ArmEstimate>>) -> Self {
        let k = estimators.first().map_or(0, |e| e.len());
        Self {
            k,
            eps,
            clamp: false,
            estimators,
            logs: vec![Vec::new(); k],
        }
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    /// Number of epochs with frozen estimators, excluding epoch 0.
    pub fn completed_epochs(&self) -> usize {
        self.estimators.len() - 1
    }

    pub fn estimator(&self, epoch: usize, arm: usize) -> &ArmEstimate {
        &self.estimators[epoch][arm]
    }

    fn estimate(&self, epoch: usize, arm: usize, x: &[f64]) -> f64 {
        let v = self.estimators[epoch][arm].value(x);
        if self.clamp {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    /// `K_m(x)`; `m` may not exceed [`Self::completed_epochs`].
    pub fn active_set(&self, x: &[f64], m: usize) -> Vec<usize> {
        let mut active: Vec<usize> = (0..self.k).collect();
        for j in 1..=m {
            active = self.step(x, j, active).1;
        }
        active
    }

    pub fn active_chain(&self, x: &[f64], m: usize) -> ActiveChain {
        let mut sets = vec![(0..self.k).collect::<Vec<_>>()];
        let mut preselected = Vec::with_capacity(m);
        for j in 1..=m {
            let (pre, next) = self.step(x, j, sets[j - 1].clone());
            preselected.push(pre);
            sets.push(next);
        }
        ActiveChain { sets, preselected }
    }

    fn step(&self, x: &[f64], j: usize, prev: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
        let pre = filter_within(&prev, self.eps[j - 1] / 2.0, |k| self.estimate(j - 1, k, x));
        let next = filter_within(&pre, self.eps[j], |k| self.estimate(j, k, x));
        (pre, next)
    }
}

/// Arms whose value is within `tol` of the best value over `arms`.
fn filter_within(arms: &[usize], tol: f64, value: impl Fn(usize) -> f64) -> Vec<usize> {
    let values: Vec<f64> = arms.iter().map(|&k| value(k)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    arms.iter()
        .zip(&values)
        .filter(|(_, &v)| best - v <= tol)
        .map(|(&k, _)| k)
        .collect()
}

/// Plays epoch `m` (1-based) of `schedule`, appending to `trace`, then freezes
/// the refitted estimators for epoch `m`.
pub fn run_epoch(
    state: &mut BanditState,
    env: &EnvironmentSpec,
    schedule: &EpochSchedule,
    m: usize,
    config: &BanditConfig,
    rng: &mut SimRng,
    trace: &mut RegretTrace,
) -> Result<()> {
    assert_eq!(state.completed_epochs() + 1, m, "epochs must be played in order");
    let (start, end) = schedule.bounds(m);
    for log in state.logs.iter_mut() {
        log.clear();
    }
    for t in start..end {
        let x = env.sample_covariate(rng)?;
        let active = state.active_set(&x, m - 1);
        let arm = if active.len() >= 2 {
            active[rng.random_range(0..active.len())]
        } else {
            active[0]
        };
        let y = env.draw_reward(arm, &x, rng);
        let rewards = env.rewards(&x);
        let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        trace.push(arm, best - rewards[arm]);
        state.logs[arm].push(LabeledSample {
            x,
            y,
            arm: Some(arm),
            t: Some(t),
        });
    }

    let seeds: Vec<u64> = (0..state.k).map(|_| rng.random()).collect();
    let threshold = config.min_fit_samples();
    let fits = fit_arms(&state.logs, &seeds, threshold, config)?;
    let next: Vec<ArmEstimate> = fits
        .into_iter()
        .enumerate()
        .map(|(arm, fit)| match fit {
            Some(est) => ArmEstimate::Fitted(Arc::new(est)),
            None => state.estimators[m - 1][arm].clone(),
        })
        .collect();

    for (arm, est) in next.iter().enumerate() {
        if let Some(fitted) = est.fitted() {
            trace.epochs.push(EpochDiagnostic {
                epoch: m,
                arm,
                index_error: env.index_error(arm, &fitted.index().v),
                objective: fitted.index().objective_value,
            });
        }
    }
    trace.epoch_ends.push(trace.len());
    state.estimators.push(next);
    Ok(())
}

fn fit_arms(
    logs: &[Vec<LabeledSample>],
    seeds: &[u64],
    threshold: usize,
    config: &BanditConfig,
) -> Result<Vec<Option<RewardEstimator>>> {
    let fit = |(log, &seed): (&Vec<LabeledSample>, &u64)| -> Result<Option<RewardEstimator>> {
        if log.len() < threshold.max(4) {
            return Ok(None);
        }
        let sireg = SiregConfig {
            beta: config.beta,
            c_h: config.c_h,
            seed,
            cross_fit: config.cross_fit,
            direction: config.direction,
            mrc: config.mrc.clone(),
        };
        fit_sireg(log, &sireg).map(Some)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        logs.par_iter().zip(seeds.par_iter()).map(fit).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        logs.iter().zip(seeds.iter()).map(fit).collect()
    }
}

/// Runs the whole schedule and returns the regret trace.
pub fn run_policy(
    env: &EnvironmentSpec,
    schedule: &EpochSchedule,
    config: &BanditConfig,
    rng: &mut SimRng,
) -> Result<RegretTrace> {
    let mut trace = RegretTrace::new();
    run_policy_into(env, schedule, config, rng, &mut trace)?;
    Ok(trace)
}

/// Like [`run_policy`] but continues an existing trace; rounds and cumulative
/// regret carry on from where `trace` ends.
pub fn run_policy_into(
    env: &EnvironmentSpec,
    schedule: &EpochSchedule,
    config: &BanditConfig,
    rng: &mut SimRng,
    trace: &mut RegretTrace,
) -> Result<BanditState> {
    env.validate()?;
    let mut state = BanditState::new(env.k, schedule, config.clamp_predictions);
    for m in 1..=schedule.epochs() {
        run_epoch(&mut state, env, schedule, m, config, rng, trace)?;
    }
    Ok(state)
}

/// Builds the schedule from `config` and runs the policy for `n` rounds.
pub fn run_single_index(
    env: &EnvironmentSpec,
    n: usize,
    config: &BanditConfig,
    rng: &mut SimRng,
) -> Result<RegretTrace> {
    let schedule = config.schedule(n, env.d)?;
    run_policy(env, &schedule, config, rng)
}
