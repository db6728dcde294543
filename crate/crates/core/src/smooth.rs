//! Smoothness estimation by bandwidth comparison, and the adaptive policy.
//!
//! Each arm is pulled for `2 N0` rounds. The first half estimates the index;
//! the second half is projected onto it and cut into lattice bins of width
//! `2^-l1`. Inside every bin a coarse (bandwidth `2^-l1`) and a fine
//! (bandwidth `2^-l2`) local polynomial fit are compared on the grid
//! `k 2^-l3`; the largest discrepancy `b_max` over arms, bins and grid points
//! gives `beta_est = -log2(b_max) / l1 - C_l log2(ln n) / log2(n)`, clamped
//! into `[beta_lo, beta_hi]`. The estimate is then plugged into the batched
//! policy for the remaining rounds.

use serde::{Deserialize, Serialize};

use crate::bandit::{run_policy_into, BanditConfig};
use crate::env::{EnvironmentSpec, LabeledSample};
use crate::lpe::{floor_strict, LinkModel};
use crate::mrc::{maximize_mrc, Direction, MrcSearchConfig};
use crate::trace::RegretTrace;
use crate::{dot, Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothnessConfig {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub c_gap: f64,
    pub c_l: f64,
    pub c_h: f64,
    pub direction: Direction,
    pub mrc: MrcSearchConfig,
}

impl Default for SmoothnessConfig {
    fn default() -> Self {
        Self {
            beta_lo: 0.9,
            beta_hi: 1.9,
            c_gap: 0.1,
            c_l: 1.0,
            c_h: 1.0,
            direction: Direction::Increasing,
            mrc: MrcSearchConfig::default(),
        }
    }
}

impl SmoothnessConfig {
    pub fn new(beta_lo: f64, beta_hi: f64) -> Self {
        Self {
            beta_lo,
            beta_hi,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_lo > 0.0 && self.beta_lo < self.beta_hi) {
            return Err(Error::param(
                "beta_lo",
                format!("need 0 < beta_lo < beta_hi, got ({}, {})", self.beta_lo, self.beta_hi),
            ));
        }
        if !(self.c_gap > 0.0 && self.c_l >= 0.0 && self.c_h > 0.0) {
            return Err(Error::param("c_gap", "C_gap and C_H must be positive, C_l nonnegative"));
        }
        Ok(())
    }

    /// Whether `beta_hi > 2 / min(beta_lo, 1 - beta_lo)`, the range condition
    /// under which the estimate is guaranteed to undersmooth.
    pub fn precondition_holds(&self) -> bool {
        let m = self.beta_lo.min(1.0 - self.beta_lo);
        m > 0.0 && self.beta_hi > 2.0 / m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LepskiLevels {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
}

fn log2_ln(n: f64) -> f64 {
    n.ln().log2()
}

/// Resolution levels: `l1 = ceil(beta_lo log2 n / (2 beta_hi + 1)^2)`,
/// `l2 = l1 + ceil(log2(ln n) / beta_lo)`,
/// `l3 = ceil((beta_hi / beta_lo) l1 + log2(ln n) / beta_lo)`.
pub fn lepski_levels(n: usize, beta_lo: f64, beta_hi: f64) -> LepskiLevels {
    let n = n.max(3) as f64;
    let l1 = (beta_lo * n.log2() / (2.0 * beta_hi + 1.0).powi(2)).ceil().max(1.0);
    let ll = log2_ln(n) / beta_lo;
    let l2 = l1 + ll.ceil();
    let l3 = ((beta_hi / beta_lo) * l1 + ll).ceil();
    LepskiLevels {
        l1: l1 as u32,
        l2: l2 as u32,
        l3: l3 as u32,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationBudget {
    /// Rounds per half-sample for each arm.
    pub n0: usize,
    /// Value before the cap.
    pub raw: usize,
    pub capped: bool,
    /// `C_gap` implied by the capped value.
    pub c_gap_effective: f64,
}

/// `N0 = ceil(C_gap (d + ln^2 n) n^(2 beta_lo (beta_hi + 1) / (2 beta_hi + 1)^2))`,
/// capped so that `2 K N0 <= n / 2`.
pub fn exploration_budget(
    n: usize,
    d: usize,
    k: usize,
    beta_lo: f64,
    beta_hi: f64,
    c_gap: f64,
) -> ExplorationBudget {
    let nf = n.max(1) as f64;
    let ln = nf.ln();
    let exponent = 2.0 * beta_lo * (beta_hi + 1.0) / (2.0 * beta_hi + 1.0).powi(2);
    let raw_f = c_gap * (d as f64 + ln * ln) * nf.powf(exponent);
    let raw = raw_f.ceil() as usize;
    let cap = n / (4 * k.max(1));
    if raw > cap {
        log::warn!("exploration budget {raw} exceeds cap {cap}; reducing C_gap");
        ExplorationBudget {
            n0: cap,
            raw,
            capped: true,
            c_gap_effective: c_gap * cap as f64 / raw_f,
        }
    } else {
        ExplorationBudget {
            n0: raw,
            raw,
            capped: false,
            c_gap_effective: c_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDiagnostic {
    pub arm: usize,
    /// Bin `[index * w, (index + 1) * w)` with `w = 2^-l1`.
    pub index: i64,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub grid_points: usize,
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessEstimate {
    /// Clamped estimate.
    pub beta_est: f64,
    /// Estimate before clamping (infinite when `b_max` vanishes).
    pub beta_raw: f64,
    pub b_max: f64,
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
    pub n0: usize,
    pub budget_capped: bool,
    pub zero_discrepancy: bool,
    pub precondition_holds: bool,
    pub bins: Vec<BinDiagnostic>,
}

/// `(raw, clamped)` estimate from `b_max`.
pub fn beta_from_discrepancy(b_max: f64, l1: u32, n: usize, c_l: f64, beta_lo: f64, beta_hi: f64) -> (f64, f64) {
    let nf = n.max(3) as f64;
    let raw = -b_max.log2() / l1 as f64 - c_l * log2_ln(nf) / nf.log2();
    (raw, clamp_beta(raw, beta_lo, beta_hi))
}

/// `min(max(beta, beta_lo), beta_hi)`.
pub fn clamp_beta(beta: f64, beta_lo: f64, beta_hi: f64) -> f64 {
    beta.max(beta_lo).min(beta_hi)
}

/// Runs the exploration phase on `env` for horizon `n`, recording the pulls in
/// `trace` when given.
pub fn estimate_smoothness(
    env: &EnvironmentSpec,
    n: usize,
    config: &SmoothnessConfig,
    rng: &mut SimRng,
    mut trace: Option<&mut RegretTrace>,
) -> Result<SmoothnessEstimate> {
    use rand::Rng;

    config.validate()?;
    env.validate()?;
    let budget = exploration_budget(n, env.d, env.k, config.beta_lo, config.beta_hi, config.c_gap);
    let n0 = budget.n0;
    if n0 < 2 || 2 * env.k * n0 > n {
        return Err(Error::HorizonTooShort {
            horizon: n,
            needed: 2 * env.k * n0.max(2),
        });
    }

    let mut streams = Vec::with_capacity(env.k);
    for arm in 0..env.k {
        let mut stream = Vec::with_capacity(2 * n0);
        for _ in 0..2 * n0 {
            let x = env.sample_covariate(rng)?;
            let y = env.draw_reward(arm, &x, rng);
            if let Some(tr) = trace.as_deref_mut() {
                let rewards = env.rewards(&x);
                let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                tr.push(arm, best - rewards[arm]);
            }
            let t = stream.len();
            stream.push(LabeledSample {
                x,
                y,
                arm: Some(arm),
                t: Some(t),
            });
        }
        streams.push(stream);
    }
    let seeds: Vec<u64> = (0..env.k).map(|_| rng.random()).collect();
    estimate_from_streams(&streams, &seeds, n, env.d, budget, config)
}

/// Smoothness estimate from per-arm streams of `2 N0` samples each.
pub fn estimate_from_streams(
    streams: &[Vec<LabeledSample>],
    seeds: &[u64],
    n: usize,
    d: usize,
    budget: ExplorationBudget,
    config: &SmoothnessConfig,
) -> Result<SmoothnessEstimate> {
    let n0 = budget.n0;
    let levels = lepski_levels(n, config.beta_lo, config.beta_hi);
    let width = 0.5f64.powi(levels.l1 as i32);
    let coarse_h = width;
    let fine_h = 0.5f64.powi(levels.l2 as i32);
    let step = 0.5f64.powi(levels.l3 as i32);
    let degree = floor_strict(config.beta_hi);
    let widen = config.c_h * (d as f64 / n0 as f64).sqrt();

    let mut bins = Vec::new();
    let mut b_max = f64::NEG_INFINITY;
    for (arm, stream) in streams.iter().enumerate() {
        let (first, second) = stream.split_at(n0.min(stream.len()));
        let mrc = MrcSearchConfig {
            seed: seeds[arm],
            ..config.mrc.clone()
        };
        let index = maximize_mrc(first, &mrc, config.direction)?;
        let projected: Vec<(f64, f64)> = second.iter().map(|s| (dot(&index.v, &s.x), s.y)).collect();
        let (lo, hi) = stream
            .iter()
            .map(|s| dot(&index.v, &s.x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| (a.min(z), b.max(z)));
        let (lo, hi) = (lo - widen, hi + widen);

        let first_bin = (lo / width).floor() as i64;
        let last_bin = (hi / width).floor() as i64;
        for b in first_bin..=last_bin {
            let (blo, bhi) = (b as f64 * width, (b + 1) as f64 * width);
            let inside: Vec<(f64, f64)> = projected
                .iter()
                .copied()
                .filter(|&(z, _)| z >= blo && z < bhi)
                .collect();
            if inside.is_empty() {
                continue;
            }
            let samples = inside.len();
            let coarse = LinkModel::new(degree, coarse_h, inside.clone())?;
            let fine = LinkModel::new(degree, fine_h, inside)?;
            let mut max_disc = f64::NEG_INFINITY;
            let mut grid_points = 0;
            let mut g = (blo / step).ceil() as i64;
            while (g as f64) * step < bhi {
                let a = g as f64 * step;
                g += 1;
                let (pc, pf) = (coarse.predict(a), fine.predict(a));
                if pc.fallback || pf.fallback {
                    continue;
                }
                grid_points += 1;
                max_disc = max_disc.max((pc.value - pf.value).abs());
            }
            if grid_points > 0 {
                b_max = b_max.max(max_disc);
            }
            bins.push(BinDiagnostic {
                arm,
                index: b,
                lo: blo,
                hi: bhi,
                samples,
                grid_points,
                max_discrepancy: if grid_points > 0 { max_disc } else { f64::NAN },
            });
        }
    }
    if bins.is_empty() || !b_max.is_finite() {
        return Err(Error::AllBinsEmpty);
    }

    // round-off level discrepancies count as exact agreement
    let zero_discrepancy = b_max <= 1e-12;
    let (beta_raw, beta_est) = if zero_discrepancy {
        (f64::INFINITY, config.beta_hi)
    } else {
        beta_from_discrepancy(b_max, levels.l1, n, config.c_l, config.beta_lo, config.beta_hi)
    };
    if !config.precondition_holds() {
        log::warn!(
            "beta_hi = {} does not exceed 2 / min(beta_lo, 1 - beta_lo) for beta_lo = {}",
            config.beta_hi,
            config.beta_lo
        );
    }
    Ok(SmoothnessEstimate {
        beta_est,
        beta_raw,
        b_max,
        l1: levels.l1,
        l2: levels.l2,
        l3: levels.l3,
        n0,
        budget_capped: budget.capped,
        zero_discrepancy,
        precondition_holds: config.precondition_holds(),
        bins,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveConfig {
    pub smoothness: SmoothnessConfig,
    /// Constants for the batched phase; its `beta` is replaced by the estimate.
    pub bandit: BanditConfig,
}

/// Explores for `2 K N0` rounds to estimate the smoothness, then runs the
/// batched policy with the estimate on the remaining rounds.
pub fn run_adaptive(
    env: &EnvironmentSpec,
    n: usize,
    config: &AdaptiveConfig,
    rng: &mut SimRng,
) -> Result<RegretTrace> {
    let s = &config.smoothness;
    s.validate()?;
    let budget = exploration_budget(n, env.d, env.k, s.beta_lo, s.beta_hi, s.c_gap);
    let explore = 2 * env.k * budget.n0;
    if n <= explore {
        return Err(Error::HorizonTooShort {
            horizon: n,
            needed: explore,
        });
    }
    let mut trace = RegretTrace::new();
    let estimate = estimate_smoothness(env, n, s, rng, Some(&mut trace))?;
    let bandit = BanditConfig {
        beta: estimate.beta_est,
        ..config.bandit.clone()
    };
    let rest = n - explore;
    let schedule = bandit.schedule(rest, env.d)?;
    let offset = trace.len();
    let mut local = RegretTrace::new();
    run_policy_into(env, &schedule, &bandit, rng, &mut local)?;
    for row in &local.rows {
        trace.push(row.arm, row.inst_regret);
    }
    trace.epochs.extend(local.epochs);
    trace.epoch_ends.extend(local.epoch_ends.iter().map(|e| e + offset));
    trace.smoothness = Some(estimate);
    Ok(trace)
}
