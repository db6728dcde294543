//! Offline single-index regression: split the sample, estimate the index by
//! rank correlation on one half, fit a local polynomial link on the other
//! half's projections, and optionally cross-fit by swapping the halves.

use serde::{Deserialize, Serialize};

use crate::env::LabeledSample;
use crate::lpe::{bandwidth_hn, floor_strict, LinkModel};
use crate::mrc::{maximize_mrc, Direction, IndexEstimate, MrcSearchConfig};
use crate::{dot, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiregConfig {
    pub beta: f64,
    pub c_h: f64,
    pub seed: u64,
    pub cross_fit: bool,
    pub direction: Direction,
    pub mrc: MrcSearchConfig,
}

impl SiregConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            c_h: 1.0,
            seed: 0,
            cross_fit: false,
            direction: Direction::Increasing,
            mrc: MrcSearchConfig::default(),
        }
    }
}

/// One index estimate paired with the link fitted along it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlugIn {
    pub index: IndexEstimate,
    pub link: LinkModel,
    /// Observed projection range widened by `c_h * h_n`.
    pub region: (f64, f64),
}

impl PlugIn {
    pub fn project(&self, x: &[f64]) -> f64 {
        dot(&self.index.v, x)
    }

    pub fn predict(&self, x: &[f64]) -> (f64, bool) {
        let z = self.project(x);
        let (lo, hi) = self.region;
        let inside = z >= lo && z <= hi;
        (self.link.value(z.clamp(lo, hi)), inside)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub in_region: bool,
}

/// Fitted reward function `x -> f(v · x)`, averaged over two plug-ins when
/// cross-fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardEstimator {
    pub primary: PlugIn,
    pub partner: Option<PlugIn>,
}

impl RewardEstimator {
    pub fn index(&self) -> &IndexEstimate {
        &self.primary.index
    }

    pub fn evaluable_region(&self) -> (f64, f64) {
        self.primary.region
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let (a, in_a) = self.primary.predict(x);
        match &self.partner {
            None => Prediction {
                value: a,
                in_region: in_a,
            },
            Some(p) => {
                let (b, in_b) = p.predict(x);
                Prediction {
                    value: (a + b) / 2.0,
                    in_region: in_a && in_b,
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.predict(x).value
    }
}

/// Interleaved split by arrival order: even positions, odd positions.
pub fn split_even_odd(samples: &[LabeledSample]) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let first = samples.iter().step_by(2).cloned().collect();
    let second = samples.iter().skip(1).step_by(2).cloned().collect();
    (first, second)
}

pub fn fit_sireg(samples: &[LabeledSample], config: &SiregConfig) -> Result<RewardEstimator> {
    if samples.len() < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            got: samples.len(),
        });
    }
    if !(config.beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let d = samples[0].x.len();
    if let Some(bad) = samples.iter().find(|s| s.x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.x.len(),
        });
    }
    let n = samples.len() as f64;
    let h = bandwidth_hn(n, d, config.beta, config.c_h);
    let degree = floor_strict(config.beta);

    let (first, second) = split_even_odd(samples);
    let primary = plug_in(&first, &second, samples, degree, h, config, config.seed)?;
    let partner = if config.cross_fit {
        Some(plug_in(
            &second,
            &first,
            samples,
            degree,
            h,
            config,
            config.seed.wrapping_add(1),
        )?)
    } else {
        None
    };
    Ok(RewardEstimator { primary, partner })
}

fn plug_in(
    index_half: &[LabeledSample],
    link_half: &[LabeledSample],
    all: &[LabeledSample],
    degree: usize,
    h: f64,
    config: &SiregConfig,
    seed: u64,
) -> Result<PlugIn> {
    let mrc = MrcSearchConfig {
        seed,
        ..config.mrc.clone()
    };
    let index = maximize_mrc(index_half, &mrc, config.direction)?;
    let pairs: Vec<(f64, f64)> = link_half.iter().map(|s| (dot(&index.v, &s.x), s.y)).collect();
    let (lo, hi) = all
        .iter()
        .map(|s| dot(&index.v, &s.x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
    let widen = config.c_h * h;
    let region = (lo - widen, hi + widen);
    let link = LinkModel::new(degree, h, pairs)?.with_domain(region.0, region.1);
    Ok(PlugIn {
        index,
        link,
        region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_environment, LinkPreset};
    use rand::Rng;

    fn linear_data(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = crate::rng_from_seed(seed);
        let v0 = [1.0, -0.5, 0.3];
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let y = dot(&v0, &x);
                LabeledSample::new(x, y)
            })
            .collect()
    }

    #[test]
    fn too_few_samples() {
        let s = linear_data(3, 0);
        assert!(matches!(
            fit_sireg(&s, &SiregConfig::new(1.5)),
            Err(Error::TooFewSamples { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn split_is_interleaved() {
        let s = linear_data(5, 1);
        let (a, b) = split_even_odd(&s);
        assert_eq!(a.len(), 3);
        assert_eq!(b.len(), 2);
        assert_eq!(a[1], s[2]);
        assert_eq!(b[1], s[3]);
    }

    #[test]
    fn noiseless_linear_link() {
        let s = linear_data(400, 2);
        let est = fit_sireg(&s, &SiregConfig::new(1.5)).unwrap();
        let v0 = [1.0, -0.5, 0.3];
        let mut worst: f64 = 0.0;
        for i in 0..=20 {
            for j in 0..=20 {
                let x = [-0.5 + i as f64 / 20.0, -0.5 + j as f64 / 20.0, 0.1];
                worst = worst.max((est.value(&x) - dot(&v0, &x)).abs());
            }
        }
        assert!(worst <= 1e-2, "max grid error {worst}");
    }

    #[test]
    fn prediction_is_the_link_at_the_projection() {
        let s = linear_data(200, 3);
        let est = fit_sireg(&s, &SiregConfig::new(2.5)).unwrap();
        for p in &s {
            let pred = est.predict(&p.x);
            assert!(pred.in_region);
            let z = dot(&est.index().v, &p.x);
            assert_eq!(pred.value, est.primary.link.value(z));
        }
    }

    #[test]
    fn far_queries_use_the_boundary() {
        let s = linear_data(200, 4);
        let est = fit_sireg(&s, &SiregConfig::new(1.5)).unwrap();
        let x = [50.0, 0.0, 0.0];
        let pred = est.predict(&x);
        assert!(!pred.in_region);
        assert_eq!(pred.value, est.primary.link.value(est.evaluable_region().1));
    }

    #[test]
    fn cross_fit_averages_both_halves() {
        let s = linear_data(160, 5);
        let config = SiregConfig {
            cross_fit: true,
            ..SiregConfig::new(1.5)
        };
        let est = fit_sireg(&s, &config).unwrap();
        let partner = est.partner.as_ref().unwrap();
        let mut rng = crate::rng_from_seed(0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            let (a, _) = est.primary.predict(&x);
            let (b, _) = partner.predict(&x);
            assert_eq!(est.value(&x), (a + b) / 2.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let env = generate_environment(1, 4, 3, 1.5, LinkPreset::Simulation).unwrap();
        let mut rng = crate::rng_from_seed(1);
        let s: Vec<LabeledSample> = (0..300)
            .map(|_| {
                let x = env.sample_covariate(&mut rng).unwrap();
                let y = env.draw_reward(0, &x, &mut rng);
                LabeledSample::new(x, y)
            })
            .collect();
        let config = SiregConfig {
            seed: 17,
            cross_fit: true,
            ..SiregConfig::new(1.5)
        };
        assert_eq!(fit_sireg(&s, &config).unwrap(), fit_sireg(&s, &config).unwrap());
    }
}
