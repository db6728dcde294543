//! Maximum rank correlation (MRC) index estimation.
//!
//! The rank objective of a direction `v` is the fraction of ordered sample
//! pairs whose responses and projections `x · v` are strictly concordant.
//! [`maximize_mrc`] searches directions with first coordinate fixed to 1 and
//! Euclidean norm at most `bound` using differential evolution.

pub mod concordance;
pub mod de;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::env::LabeledSample;
use crate::{dot, Error, Result, SimRng};
use concordance::{concordant_pairs, dense_ranks, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Increasing,
    Decreasing,
}

/// An estimated index vector, normalized so `v[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub v: Vec<f64>,
    pub objective_value: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MrcSearchConfig {
    pub bound: f64,
    /// Defaults to `15 * (d - 1)` when unset.
    pub population_size: Option<usize>,
    pub max_generations: usize,
    pub restarts: usize,
    pub mutation: f64,
    pub crossover: f64,
    pub stall_generations: Option<usize>,
    pub seed: u64,
    pub subsample_cap: Option<usize>,
}

impl Default for MrcSearchConfig {
    fn default() -> Self {
        Self {
            bound: 2.0,
            population_size: None,
            max_generations: 200,
            restarts: 2,
            mutation: 0.7,
            crossover: 0.9,
            stall_generations: None,
            seed: 0,
            subsample_cap: None,
        }
    }
}

impl MrcSearchConfig {
    pub fn population_for(&self, d: usize) -> usize {
        self.population_size
            .unwrap_or_else(|| (15 * d.saturating_sub(1)).max(4))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.bound >= 1.0) {
            return Err(Error::EmptySearchSpace(self.bound));
        }
        if self.population_for(d) < 4 {
            return Err(Error::param("population_size", "must be at least 4"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::param("crossover", "must lie in [0, 1]"));
        }
        if self.subsample_cap.is_some_and(|c| c < 2) {
            return Err(Error::param("subsample_cap", "must be at least 2"));
        }
        Ok(())
    }
}

/// Rank objective `Γ(v)` of `samples` along `v`.
pub fn rank_objective(samples: &[LabeledSample], v: &[f64], direction: Direction) -> Result<f64> {
    let problem = RankProblem::new(samples)?;
    if v.len() != problem.d {
        return Err(Error::DimensionMismatch {
            expected: problem.d,
            got: v.len(),
        });
    }
    let count = problem.count(v, direction, &mut problem.scratch());
    Ok(problem.normalize(count))
}

/// Integer concordance count behind [`rank_objective`].
pub fn concordance_count(samples: &[LabeledSample], v: &[f64], direction: Direction) -> Result<u64> {
    let problem = RankProblem::new(samples)?;
    Ok(problem.count(v, direction, &mut problem.scratch()))
}

/// Precomputed data for repeated objective evaluations on one sample set.
#[derive(Debug, Clone)]
pub struct RankProblem {
    d: usize,
    n: usize,
    xs: Vec<f64>,
    y_rank: Vec<u32>,
    n_ranks: usize,
}

/// Per-thread buffers for [`RankProblem::count`].
#[derive(Debug, Clone, Default)]
pub struct ProblemScratch {
    proj: Vec<f64>,
    inner: Scratch,
}

impl RankProblem {
    pub fn new(samples: &[LabeledSample]) -> Result<Self> {
        let refs: Vec<&LabeledSample> = samples.iter().collect();
        Self::from_refs(&refs)
    }

    fn from_refs(samples: &[&LabeledSample]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: samples.len(),
            });
        }
        let d = samples[0].x.len();
        let mut xs = Vec::with_capacity(samples.len() * d);
        for s in samples {
            if s.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.x.len(),
                });
            }
            xs.extend_from_slice(&s.x);
        }
        let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
        let (y_rank, n_ranks) = dense_ranks(&y);
        Ok(Self {
            d,
            n: samples.len(),
            xs,
            y_rank,
            n_ranks,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn scratch(&self) -> ProblemScratch {
        ProblemScratch::default()
    }

    pub fn count(&self, v: &[f64], direction: Direction, scratch: &mut ProblemScratch) -> u64 {
        scratch.proj.clear();
        scratch
            .proj
            .extend(self.xs.chunks_exact(self.d).map(|x| dot(x, v)));
        concordant_pairs(
            &scratch.proj,
            &self.y_rank,
            self.n_ranks,
            direction,
            &mut scratch.inner,
        )
    }

    /// Count for the direction `(1, free...)`.
    fn count_free(&self, free: &[f64], direction: Direction, scratch: &mut ProblemScratch) -> u64 {
        scratch.proj.clear();
        scratch.proj.extend(
            self.xs
                .chunks_exact(self.d)
                .map(|x| x[0] + dot(&x[1..], free)),
        );
        concordant_pairs(
            &scratch.proj,
            &self.y_rank,
            self.n_ranks,
            direction,
            &mut scratch.inner,
        )
    }

    pub fn normalize(&self, count: u64) -> f64 {
        count as f64 / (self.n as f64 * (self.n as f64 - 1.0))
    }

    fn evaluate_batch(&self, batch: &[Vec<f64>], direction: Direction) -> Vec<u64> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            batch
                .par_iter()
                .map_init(ProblemScratch::default, |s, u| self.count_free(u, direction, s))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut s = ProblemScratch::default();
            batch
                .iter()
                .map(|u| self.count_free(u, direction, &mut s))
                .collect()
        }
    }
}

/// Result of [`maximize_mrc_traced`]: the estimate plus the optimizer trace
/// as `(restart, generation, best objective)` rows.
#[derive(Debug, Clone)]
pub struct MrcFit {
    pub estimate: IndexEstimate,
    pub trace: Vec<(usize, usize, f64)>,
}

/// Maximizes the rank objective over `{u : u[0] = 1, |u|_2 <= bound}`.
pub fn maximize_mrc(
    samples: &[LabeledSample],
    config: &MrcSearchConfig,
    direction: Direction,
) -> Result<IndexEstimate> {
    maximize_mrc_traced(samples, config, direction).map(|f| f.estimate)
}

pub fn maximize_mrc_traced(
    samples: &[LabeledSample],
    config: &MrcSearchConfig,
    direction: Direction,
) -> Result<MrcFit> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let d = samples[0].x.len();
    config.validate(d)?;

    let mut rng = crate::rng_from_seed(config.seed);
    let problem = match config.subsample_cap {
        Some(cap) if cap < samples.len() => {
            let mut picked = index::sample(&mut rng, samples.len(), cap).into_vec();
            picked.sort_unstable();
            let refs: Vec<&LabeledSample> = picked.iter().map(|&i| &samples[i]).collect();
            RankProblem::from_refs(&refs)?
        }
        _ => RankProblem::new(samples)?,
    };

    if d == 1 {
        let count = problem.count(&[1.0], direction, &mut problem.scratch());
        return Ok(MrcFit {
            estimate: IndexEstimate {
                v: vec![1.0],
                objective_value: problem.normalize(count),
                direction,
            },
            trace: Vec::new(),
        });
    }

    let radius = (config.bound * config.bound - 1.0).max(0.0).sqrt();
    let params = de::DeParams {
        population: config.population_for(d),
        generations: config.max_generations,
        mutation: config.mutation,
        crossover: config.crossover,
        stall_generations: config.stall_generations,
    };

    let mut best: Option<(Vec<f64>, u64)> = None;
    let mut trace = Vec::new();
    for restart in 0..config.restarts {
        let mut run_rng = restart_rng(&mut rng);
        let out = de::run(d - 1, radius, &params, &mut run_rng, |batch| {
            problem.evaluate_batch(batch, direction)
        });
        trace.extend(
            out.trace
                .iter()
                .map(|&(g, c)| (restart, g, problem.normalize(c))),
        );
        let better = match &best {
            None => true,
            Some((u, c)) => {
                de::preference((&out.best, out.score), (u, *c)) == std::cmp::Ordering::Greater
            }
        };
        if better {
            best = Some((out.best, out.score));
        }
    }

    let (free, count) = best.expect("at least one restart");
    let mut v = Vec::with_capacity(d);
    v.push(1.0);
    v.extend(free);
    Ok(MrcFit {
        estimate: IndexEstimate {
            v,
            objective_value: problem.normalize(count),
            direction,
        },
        trace,
    })
}

fn restart_rng(rng: &mut SimRng) -> SimRng {
    use rand::Rng;
    crate::rng_from_seed(rng.random())
}

/// Picks the kernel orientation with the larger maximized objective, using a
/// quarter of the generation budget and a single restart; ties favour
/// [`Direction::Increasing`].
pub fn choose_direction(samples: &[LabeledSample], config: &MrcSearchConfig) -> Result<Direction> {
    let reduced = MrcSearchConfig {
        max_generations: (config.max_generations / 4).max(1),
        restarts: 1,
        ..config.clone()
    };
    let inc = maximize_mrc(samples, &reduced, Direction::Increasing)?;
    let dec = maximize_mrc(samples, &reduced, Direction::Decreasing)?;
    Ok(if dec.objective_value > inc.objective_value {
        Direction::Decreasing
    } else {
        Direction::Increasing
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_environment, LinkPreset};
    use rand::Rng;

    fn sample(x: Vec<f64>, y: f64) -> LabeledSample {
        LabeledSample::new(x, y)
    }

    fn brute(samples: &[LabeledSample], v: &[f64], dir: Direction) -> u64 {
        let p: Vec<f64> = samples.iter().map(|s| dot(&s.x, v)).collect();
        let mut c = 0;
        for i in 0..samples.len() {
            for j in 0..samples.len() {
                if i != j && p[i] > p[j] {
                    c += match dir {
                        Direction::Increasing => samples[i].y > samples[j].y,
                        Direction::Decreasing => samples[i].y < samples[j].y,
                    } as u64;
                }
            }
        }
        c
    }

    fn noiseless(n: usize, d: usize, v: &[f64], seed: u64) -> Vec<LabeledSample> {
        let mut rng = crate::rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let z = dot(&x, v);
                sample(x, z.powi(3) + z)
            })
            .collect()
    }

    #[test]
    fn two_point_objective() {
        let s = vec![sample(vec![1.0], 1.0), sample(vec![0.0], 0.0)];
        assert_eq!(rank_objective(&s, &[1.0], Direction::Increasing).unwrap(), 0.5);
    }

    #[test]
    fn constant_response_is_zero() {
        let s = noiseless(30, 3, &[1.0, 0.2, 0.1], 0)
            .into_iter()
            .map(|mut s| {
                s.y = 2.0;
                s
            })
            .collect::<Vec<_>>();
        assert_eq!(rank_objective(&s, &[1.0, 0.3, -0.7], Direction::Increasing).unwrap(), 0.0);
    }

    #[test]
    fn too_few_samples() {
        let s = vec![sample(vec![1.0, 0.0], 1.0)];
        assert!(matches!(
            rank_objective(&s, &[1.0, 0.0], Direction::Increasing),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn fast_count_matches_brute_force_n50() {
        let mut rng = crate::rng_from_seed(7);
        let s: Vec<LabeledSample> = (0..50)
            .map(|_| sample(vec![rng.random(), rng.random(), rng.random()], rng.random()))
            .collect();
        let v = [1.0, -0.4, 0.9];
        for dir in [Direction::Increasing, Direction::Decreasing] {
            assert_eq!(concordance_count(&s, &v, dir).unwrap(), brute(&s, &v, dir));
        }
    }

    #[test]
    fn scale_invariance_and_complement() {
        let s = noiseless(80, 3, &[1.0, 0.5, -0.5], 3);
        let v = [1.0, 0.1, 0.3];
        let scaled: Vec<f64> = v.iter().map(|a| a * 3.7).collect();
        let inc = rank_objective(&s, &v, Direction::Increasing).unwrap();
        assert_eq!(inc, rank_objective(&s, &scaled, Direction::Increasing).unwrap());
        let dec = rank_objective(&s, &v, Direction::Decreasing).unwrap();
        // no ties: each unordered pair is counted once by exactly one kernel
        assert!((inc + dec - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noiseless_recovers_full_concordance() {
        let v0 = [1.0, 0.0];
        let s = noiseless(200, 2, &v0, 11);
        let est = maximize_mrc(&s, &MrcSearchConfig::default(), Direction::Increasing).unwrap();
        let truth = rank_objective(&s, &v0, Direction::Increasing).unwrap();
        assert_eq!(est.objective_value, truth);
        assert_eq!(est.v[0], 1.0);
    }

    #[test]
    fn beats_one_dimensional_grid() {
        let mut rng = crate::rng_from_seed(21);
        let v0 = [1.0, 0.8];
        let s: Vec<LabeledSample> = (0..100)
            .map(|_| {
                let x = vec![rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
                let y = dot(&x, &v0) + 0.3 * (rng.random::<f64>() - 0.5);
                sample(x, y)
            })
            .collect();
        let config = MrcSearchConfig {
            bound: 5f64.sqrt(),
            seed: 5,
            ..Default::default()
        };
        let est = maximize_mrc(&s, &config, Direction::Increasing).unwrap();
        let grid_best = (0..=400)
            .map(|i| {
                let u = -2.0 + 0.01 * i as f64;
                rank_objective(&s, &[1.0, u], Direction::Increasing).unwrap()
            })
            .fold(0.0, f64::max);
        assert!(est.objective_value >= grid_best);
    }

    #[test]
    fn estimate_respects_bound() {
        let s = noiseless(100, 4, &[1.0, 0.9, -0.9, 0.9], 2);
        let config = MrcSearchConfig {
            bound: 1.5,
            ..Default::default()
        };
        let est = maximize_mrc(&s, &config, Direction::Increasing).unwrap();
        assert_eq!(est.v[0], 1.0);
        assert!(crate::l2_norm(&est.v) <= 1.5 + 1e-12);
    }

    #[test]
    fn empty_search_space() {
        let s = noiseless(10, 2, &[1.0, 0.0], 0);
        let config = MrcSearchConfig {
            bound: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            maximize_mrc(&s, &config, Direction::Increasing),
            Err(Error::EmptySearchSpace(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let s = noiseless(120, 3, &[1.0, -0.3, 0.6], 4);
        let config = MrcSearchConfig {
            seed: 99,
            max_generations: 40,
            ..Default::default()
        };
        let a = maximize_mrc(&s, &config, Direction::Increasing).unwrap();
        let b = maximize_mrc(&s, &config, Direction::Increasing).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsampling_is_deterministic_and_scale_free() {
        let s = noiseless(400, 3, &[1.0, 0.5, 0.2], 8);
        let config = MrcSearchConfig {
            seed: 3,
            subsample_cap: Some(150),
            max_generations: 60,
            ..Default::default()
        };
        let a = maximize_mrc(&s, &config, Direction::Increasing).unwrap();
        let b = maximize_mrc(&s, &config, Direction::Increasing).unwrap();
        assert_eq!(a, b);
        // scaling every covariate leaves the argmax plateau unchanged
        let scaled: Vec<LabeledSample> = s
            .iter()
            .map(|p| sample(p.x.iter().map(|v| v * 2.5).collect(), p.y))
            .collect();
        let c = maximize_mrc(&scaled, &config, Direction::Increasing).unwrap();
        assert_eq!(a.objective_value, c.objective_value);
    }

    #[test]
    fn direction_choice() {
        let s = noiseless(150, 3, &[1.0, 0.4, -0.2], 5);
        let config = MrcSearchConfig::default();
        assert_eq!(choose_direction(&s, &config).unwrap(), Direction::Increasing);
        let negated: Vec<LabeledSample> = s.iter().map(|p| sample(p.x.clone(), -p.y)).collect();
        assert_eq!(choose_direction(&negated, &config).unwrap(), Direction::Decreasing);
    }

    #[test]
    fn direction_choice_on_simulation_environment() {
        let env = generate_environment(2, 4, 3, 1.5, LinkPreset::Simulation).unwrap();
        let mut rng = crate::rng_from_seed(2);
        let s: Vec<LabeledSample> = (0..300)
            .map(|_| {
                let x = env.sample_covariate(&mut rng).unwrap();
                let y = env.draw_reward(2, &x, &mut rng);
                sample(x, y)
            })
            .collect();
        assert_eq!(
            choose_direction(&s, &MrcSearchConfig::default()).unwrap(),
            Direction::Increasing
        );
    }
}
