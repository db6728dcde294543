//! Exponential epoch schedule.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Epoch lengths and confidence levels for a horizon.
///
/// `eps[m] = c_eps * 2^-m` for `m = 0..=M`; `lengths[m - 1]` is the nominal
/// length `n_m` of epoch `m` and `cum[m - 1] = S_m`. The last epoch is
/// truncated at the horizon when played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub horizon: usize,
    pub c_t: f64,
    pub c_eps: f64,
    pub eps: Vec<f64>,
    pub lengths: Vec<usize>,
    pub cum: Vec<usize>,
    /// Set when the first epoch alone exceeds the horizon.
    pub degenerate: bool,
}

/// Nominal epoch length for confidence level `eps`.
pub fn epoch_length(n: usize, d: usize, beta: f64, c_t: f64, eps: f64) -> usize {
    let ln = (n.max(1) as f64).ln();
    let index_term = (d as f64 + ln * ln) / eps.powf(2.0 / beta.min(1.0));
    let link_term = (ln / (eps * eps)).powf((2.0 * beta + 1.0) / (2.0 * beta));
    (c_t * (index_term + link_term)).ceil().max(1.0) as usize
}

pub fn build_schedule(n: usize, d: usize, beta: f64, c_t: f64, c_eps: f64) -> Result<EpochSchedule> {
    if !(c_eps > 0.0 && c_eps <= 0.6) {
        return Err(Error::param("c_eps", format!("must lie in (0, 0.6], got {c_eps}")));
    }
    if !(c_t > 0.0 && c_t.is_finite()) {
        return Err(Error::param("c_t", format!("must be positive, got {c_t}")));
    }
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let mut eps = vec![c_eps];
    let mut lengths = Vec::new();
    let mut cum = Vec::new();
    let mut total = 0usize;
    let mut m = 0;
    while total < n {
        m += 1;
        let e = c_eps * 0.5f64.powi(m);
        let len = epoch_length(n, d, beta, c_t, e);
        eps.push(e);
        lengths.push(len);
        total = total.saturating_add(len);
        cum.push(total);
    }
    let degenerate = lengths.first().is_some_and(|&l| l > n);
    Ok(EpochSchedule {
        horizon: n,
        c_t,
        c_eps,
        eps,
        lengths,
        cum,
        degenerate,
    })
}

impl EpochSchedule {
    /// Number of epochs `M`.
    pub fn epochs(&self) -> usize {
        self.lengths.len()
    }

    /// Half-open round range `[start, end)` (0-based) played in epoch `m >= 1`.
    pub fn bounds(&self, m: usize) -> (usize, usize) {
        let start = if m <= 1 { 0 } else { self.cum[m - 2] };
        (start.min(self.horizon), self.cum[m - 1].min(self.horizon))
    }

    /// Lengths actually played, with the last epoch truncated.
    pub fn played_lengths(&self) -> Vec<usize> {
        (1..=self.epochs())
            .map(|m| {
                let (a, b) = self.bounds(m);
                b - a
            })
            .collect()
    }
}

/// Picks `C_T` by halving from 1 (floor `1e-3`) until the first epoch takes at
/// most a quarter of the horizon, there are at least `min_epochs` epochs, and
/// the truncated final epoch is no shorter than the one before it. When no
/// value satisfies all three, the largest value meeting the first two is used.
pub fn calibrate_c_t(n: usize, d: usize, beta: f64, c_eps: f64, min_epochs: usize) -> Result<f64> {
    calibrate_with(n, min_epochs, |c_t| build_schedule(n, d, beta, c_t, c_eps))
}

/// The calibration rule of [`calibrate_c_t`] for any schedule family.
pub fn calibrate_with(
    n: usize,
    min_epochs: usize,
    build: impl Fn(f64) -> Result<EpochSchedule>,
) -> Result<f64> {
    let mut c_t = 1.0f64;
    let mut fallback = None;
    loop {
        let s = build(c_t)?;
        let played = s.played_lengths();
        let first_ok = s.lengths.first().is_none_or(|&l| 4 * l <= n);
        let count_ok = s.epochs() >= min_epochs;
        if first_ok && count_ok {
            let tail_ok = played.len() < 2 || played[played.len() - 1] >= played[played.len() - 2];
            if tail_ok {
                return Ok(c_t);
            }
            fallback.get_or_insert(c_t);
        }
        if c_t <= 1e-3 {
            return Ok(fallback.unwrap_or(1e-3));
        }
        c_t = (c_t / 2.0).max(1e-3);
    }
}
