//! Ground-truth bandit environments.
//!
//! An environment fixes, for every arm `k`, an index vector `v_k` (first
//! coordinate 1) and a monotone link `f_k`, so that the mean reward at `x` is
//! `f_k(v_k · x)`. Arms are zero-based throughout the crate.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{dot, l2_norm, Error, Result, SimRng};

/// Cap on rejection-sampling attempts for a single covariate draw.
pub const REJECTION_CAP: usize = 1_000_000;

/// Cap on index-vector resampling in [`generate_environment`].
pub const RESAMPLE_CAP: usize = 10_000;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFamily {
    PowerSgn,
    PowerSgnPlusLinear,
    CustomTable,
}

/// A one-dimensional link function.
///
/// `power_sgn` is `scale * sgn(z) * |z/2|^beta`; `power_sgn_plus_linear` adds
/// `linear_coef * z`; `custom_table` linearly interpolates `table` and is
/// constant beyond its end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub family: LinkFamily,
    pub beta: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub linear_coef: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

fn one() -> f64 {
    1.0
}

impl LinkSpec {
    pub fn power_sgn(scale: f64, beta: f64) -> Self {
        Self {
            family: LinkFamily::PowerSgn,
            beta,
            scale,
            linear_coef: 0.0,
            table: None,
        }
    }

    pub fn power_sgn_plus_linear(scale: f64, beta: f64, linear_coef: f64) -> Self {
        Self {
            family: LinkFamily::PowerSgnPlusLinear,
            beta,
            scale,
            linear_coef,
            table: None,
        }
    }

    /// Piecewise-linear link through `points`, which must have strictly
    /// increasing abscissae.
    pub fn custom_table(points: Vec<[f64; 2]>, beta: f64) -> Result<Self> {
        let link = Self {
            family: LinkFamily::CustomTable,
            beta,
            scale: 1.0,
            linear_coef: 0.0,
            table: Some(points),
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidEnvironment(format!(
                "link beta must be positive, got {}",
                self.beta
            )));
        }
        match self.family {
            LinkFamily::PowerSgn if self.linear_coef != 0.0 => Err(Error::InvalidEnvironment(
                "power_sgn link must have linear_coef 0".into(),
            )),
            LinkFamily::CustomTable => {
                let table = self.table.as_deref().unwrap_or_default();
                if table.len() < 2 {
                    return Err(Error::InvalidEnvironment(
                        "custom_table link needs at least two points".into(),
                    ));
                }
                if table.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::InvalidEnvironment(
                        "custom_table abscissae must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self.family {
            LinkFamily::PowerSgn => self.power_part(z),
            LinkFamily::PowerSgnPlusLinear => self.power_part(z) + self.linear_coef * z,
            LinkFamily::CustomTable => interpolate(self.table.as_deref().unwrap_or_default(), z),
        }
    }

    fn power_part(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        self.scale * z.signum() * (z.abs() / 2.0).powf(self.beta)
    }
}

fn interpolate(table: &[[f64; 2]], z: f64) -> f64 {
    let (first, last) = match (table.first(), table.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return 0.0,
    };
    if z <= first[0] {
        return first[1];
    }
    if z >= last[0] {
        return last[1];
    }
    let hi = table.partition_point(|p| p[0] <= z);
    let (a, b) = (table[hi - 1], table[hi]);
    let w = (z - a[0]) / (b[0] - a[0]);
    a[1] + w * (b[1] - a[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    #[serde(default)]
    pub variance: f64,
}

impl NoiseSpec {
    pub fn gaussian(variance: f64) -> Self {
        Self {
            family: NoiseFamily::Gaussian,
            variance,
        }
    }

    pub fn bernoulli() -> Self {
        Self {
            family: NoiseFamily::Bernoulli,
            variance: 0.0,
        }
    }
}

/// Law of the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateSpec {
    /// `N(0, I_d)` conditioned on `|x|_2 <= 1`.
    TruncatedGaussianUnitBall,
    /// Independent uniform coordinates on `[low, high]`.
    UniformBox { low: f64, high: f64 },
}

impl CovariateSpec {
    /// Per-coordinate bounding interval of the support.
    pub fn bounding_interval(&self) -> (f64, f64) {
        match *self {
            CovariateSpec::TruncatedGaussianUnitBall => (-1.0, 1.0),
            CovariateSpec::UniformBox { low, high } => (low, high),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            CovariateSpec::TruncatedGaussianUnitBall => l2_norm(x) <= 1.0,
            CovariateSpec::UniformBox { low, high } => x.iter().all(|&v| v >= low && v <= high),
        }
    }

    fn validate(&self) -> Result<()> {
        if let CovariateSpec::UniformBox { low, high } = *self {
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::InvalidEnvironment(format!(
                    "uniform_box needs finite low < high, got [{low}, {high}]"
                )));
            }
        }
        Ok(())
    }
}

/// One observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
    pub arm: Option<usize>,
    pub t: Option<usize>,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self {
            x,
            y,
            arm: None,
            t: None,
        }
    }
}

/// A ground-truth bandit instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub indices: Vec<Vec<f64>>,
    pub links: Vec<LinkSpec>,
    pub noise: NoiseSpec,
    pub covariate_law: CovariateSpec,
}

/// Best arm and the two leading mean rewards at a covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGap {
    pub best_arm: usize,
    pub g1: f64,
    pub g2: f64,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::InvalidEnvironment("d and K must be positive".into()));
        }
        if self.indices.len() != self.k || self.links.len() != self.k {
            return Err(Error::InvalidEnvironment(format!(
                "expected {} index vectors and links, got {} and {}",
                self.k,
                self.indices.len(),
                self.links.len()
            )));
        }
        for (arm, v) in self.indices.iter().enumerate() {
            if v.len() != self.d {
                return Err(Error::InvalidEnvironment(format!(
                    "index {arm} has length {}, expected {}",
                    v.len(),
                    self.d
                )));
            }
            if v[0] != 1.0 {
                return Err(Error::InvalidEnvironment(format!(
                    "index {arm} must have first coordinate 1, got {}",
                    v[0]
                )));
            }
            if l2_norm(v) > 2.0 + NORM_TOL {
                return Err(Error::InvalidEnvironment(format!(
                    "index {arm} has norm {} > 2",
                    l2_norm(v)
                )));
            }
        }
        if self.k <= self.d && index_rank(&self.indices, self.d) < self.k {
            return Err(Error::InvalidEnvironment(
                "index vectors are linearly dependent".into(),
            ));
        }
        for link in &self.links {
            link.validate()?;
        }
        if self.noise.variance < 0.0 || !self.noise.variance.is_finite() {
            return Err(Error::InvalidEnvironment(
                "noise variance must be nonnegative".into(),
            ));
        }
        self.covariate_law.validate()
    }

    pub fn sample_covariate(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        sample_covariate(&self.covariate_law, self.d, rng)
    }

    /// Mean reward `f_k(v_k · x)`.
    pub fn true_reward(&self, arm: usize, x: &[f64]) -> f64 {
        self.links[arm].eval(dot(&self.indices[arm], x))
    }

    pub fn rewards(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k).map(|arm| self.true_reward(arm, x)).collect()
    }

    /// Noisy reward: mean plus Gaussian noise, or a Bernoulli draw with the
    /// mean clamped into `[0, 1]`.
    pub fn draw_reward(&self, arm: usize, x: &[f64], rng: &mut SimRng) -> f64 {
        let mean = self.true_reward(arm, x);
        match self.noise.family {
            NoiseFamily::Gaussian => {
                if self.noise.variance == 0.0 {
                    mean
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    mean + self.noise.variance.sqrt() * z
                }
            }
            NoiseFamily::Bernoulli => {
                let p = mean.clamp(0.0, 1.0);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn oracle_gap(&self, x: &[f64]) -> OracleGap {
        oracle_gap_of(&self.rewards(x))
    }

    /// Euclidean distance between an estimate and the true index of `arm`.
    pub fn index_error(&self, arm: usize, estimate: &[f64]) -> f64 {
        crate::l2_dist(&self.indices[arm], estimate)
    }
}

/// Argmax (lowest index on ties), the maximum, and the largest value strictly
/// below the maximum (or the maximum itself when all values tie).
pub fn oracle_gap_of(rewards: &[f64]) -> OracleGap {
    let mut best_arm = 0;
    let mut g1 = f64::NEG_INFINITY;
    for (arm, &r) in rewards.iter().enumerate() {
        if r > g1 {
            g1 = r;
            best_arm = arm;
        }
    }
    let g2 = rewards
        .iter()
        .copied()
        .filter(|&r| r < g1)
        .fold(f64::NEG_INFINITY, f64::max);
    OracleGap {
        best_arm,
        g1,
        g2: if g2.is_finite() { g2 } else { g1 },
    }
}

pub fn sample_covariate(spec: &CovariateSpec, d: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    sample_covariate_capped(spec, d, rng, REJECTION_CAP)
}

pub fn sample_covariate_capped(
    spec: &CovariateSpec,
    d: usize,
    rng: &mut SimRng,
    cap: usize,
) -> Result<Vec<f64>> {
    match *spec {
        CovariateSpec::UniformBox { low, high } => {
            Ok((0..d).map(|_| rng.random_range(low..=high)).collect())
        }
        CovariateSpec::TruncatedGaussianUnitBall => {
            let mut x = vec![0.0; d];
            for _ in 0..cap {
                for v in x.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                if l2_norm(&x) <= 1.0 {
                    return Ok(x);
                }
            }
            Err(Error::RejectionBudget(cap))
        }
    }
}

/// Link presets for [`generate_environment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkPreset {
    /// Cycles through `0.8 s(z)`, `0.5 s(z) + 0.1 z`, `1.5 s(z)` with
    /// `s(z) = sgn(z) |z/2|^beta`.
    Simulation,
    /// `sgn(z) |z/2|^beta` for every arm.
    PowerSgn,
}

impl LinkPreset {
    pub fn links(self, k: usize, beta: f64) -> Vec<LinkSpec> {
        (0..k)
            .map(|arm| match self {
                LinkPreset::PowerSgn => LinkSpec::power_sgn(1.0, beta),
                LinkPreset::Simulation => match arm % 3 {
                    0 => LinkSpec::power_sgn(0.8, beta),
                    1 => LinkSpec::power_sgn_plus_linear(0.5, beta, 0.1),
                    _ => LinkSpec::power_sgn(1.5, beta),
                },
            })
            .collect()
    }
}

/// Random environment: index vectors with first coordinate 1 and the remaining
/// coordinates uniform on the ball of radius `sqrt(3)` (so `|v|_2 <= 2`),
/// redrawn until the stacked matrix has full rank; Gaussian noise of variance
/// 0.1 and truncated-Gaussian covariates.
pub fn generate_environment(
    seed: u64,
    d: usize,
    k: usize,
    beta: f64,
    preset: LinkPreset,
) -> Result<EnvironmentSpec> {
    if d < 2 || k < 2 {
        return Err(Error::InvalidEnvironment(format!(
            "generator needs d >= 2 and K >= 2, got d={d}, K={k}"
        )));
    }
    let mut rng = crate::rng_from_seed(seed);
    let radius = 3f64.sqrt();
    for _ in 0..RESAMPLE_CAP {
        let indices: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let mut v = vec![1.0];
                v.extend(uniform_in_ball(d - 1, radius, &mut rng));
                v
            })
            .collect();
        if index_rank(&indices, d) >= k.min(d) {
            let spec = EnvironmentSpec {
                d,
                k,
                indices,
                links: preset.links(k, beta),
                noise: NoiseSpec::gaussian(0.1),
                covariate_law: CovariateSpec::TruncatedGaussianUnitBall,
            };
            spec.validate()?;
            return Ok(spec);
        }
    }
    Err(Error::ResampleBudget(RESAMPLE_CAP))
}

fn uniform_in_ball(dim: usize, radius: f64, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = l2_norm(&dir);
        if norm > 1e-12 {
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            return dir.into_iter().map(|v| v * r / norm).collect();
        }
    }
}

/// Numerical rank of the matrix whose rows are `indices`.
pub fn index_rank(indices: &[Vec<f64>], d: usize) -> usize {
    if indices.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(indices.len(), d, |r, c| indices[r][c]);
    m.rank(1e-9)
}
