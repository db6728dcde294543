//! Single-index contextual bandits.
//!
//! The expected reward of every arm is modelled as `f_k(v_k · x)`: an unknown
//! monotone link applied to a one-dimensional projection of the covariate.
//! The crate provides
//!
//! * [`env`]: ground-truth environments and oracle quantities,
//! * [`mrc`]: maximum-rank-correlation index estimation,
//! * [`lpe`]: one-dimensional local polynomial regression,
//! * [`sireg`]: the split / index / link regression pipeline,
//! * [`bandit`]: the batched arm-elimination policy,
//! * [`smooth`]: smoothness estimation and the adaptive policy,
//! * [`baseline`]: a bin-partition successive-elimination comparator,
//! * [`harness`]: Monte Carlo experiments, CSV persistence and SVG plots.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod baseline;
pub mod env;
pub mod error;
pub mod harness;
pub mod lpe;
pub mod mrc;
pub mod sireg;
pub mod smooth;
pub mod trace;

pub use error::{Error, Result};

/// Random state used everywhere in the crate.
///
/// ChaCha8 is portable across platforms, so seeded streams are identical on
/// native and wasm targets.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SimRng`] from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
