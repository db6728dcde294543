use serde::{Deserialize, Serialize};

use crate::bandit::BanditConfig;
use crate::baseline::SmoothBanditConfig;
use crate::env::{generate_environment, EnvironmentSpec, LinkPreset};
use crate::mrc::{Direction, MrcSearchConfig};
use crate::smooth::{AdaptiveConfig, SmoothnessConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SingleIndex,
    SmoothBandit,
    Adaptive,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SingleIndex => "single_index",
            Algorithm::SmoothBandit => "smooth_bandit",
            Algorithm::Adaptive => "adaptive",
        }
    }
}

/// Parameters for [`generate_environment`]. Without a fixed `seed` each trial
/// draws its own environment from the trial seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub beta: f64,
    #[serde(default = "default_preset")]
    pub preset: LinkPreset,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_preset() -> LinkPreset {
    LinkPreset::Simulation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Spec(EnvironmentSpec),
    Generate(GeneratorParams),
}

impl EnvironmentConfig {
    pub fn dimension(&self) -> usize {
        match self {
            EnvironmentConfig::Spec(s) => s.d,
            EnvironmentConfig::Generate(g) => g.d,
        }
    }

    pub fn for_trial(&self, trial_seed: u64) -> Result<EnvironmentSpec> {
        match self {
            EnvironmentConfig::Spec(s) => Ok(s.clone()),
            EnvironmentConfig::Generate(g) => {
                generate_environment(g.seed.unwrap_or(trial_seed), g.d, g.k, g.beta, g.preset)
            }
        }
    }
}

/// Tuning constants. `beta` goes with `single_index` and `smooth_bandit`,
/// `(beta_lo, beta_hi)` with `adaptive`; the rest fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    pub beta: Option<f64>,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
    pub c_t: Option<f64>,
    pub c_eps: Option<f64>,
    pub c_h: Option<f64>,
    pub c_gap: Option<f64>,
    pub c_l: Option<f64>,
    pub c_conf: Option<f64>,
    /// Norm bound on index vectors.
    pub b_v: Option<f64>,
    pub min_epochs: Option<usize>,
    pub cross_fit: Option<bool>,
    pub direction: Option<Direction>,
    pub mrc: Option<MrcSearchConfig>,
}

fn default_stride() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub environment: EnvironmentConfig,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_stride")]
    pub checkpoint_stride: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials: must be at least 1".into());
        }
        if self.checkpoint_stride == 0 {
            return bad("checkpoint_stride: must be at least 1".into());
        }
        let c = &self.constants;
        let has_beta = c.beta.is_some();
        let has_range = c.beta_lo.is_some() || c.beta_hi.is_some();
        match self.algorithm {
            Algorithm::SingleIndex | Algorithm::SmoothBandit => {
                if !has_beta || has_range {
                    return bad(format!(
                        "constants: algorithm {} takes `beta` and no `beta_lo`/`beta_hi`",
                        self.algorithm.name()
                    ));
                }
                if !(c.beta.unwrap() > 0.0) {
                    return bad("constants.beta: must be positive".into());
                }
            }
            Algorithm::Adaptive => {
                if has_beta || c.beta_lo.is_none() || c.beta_hi.is_none() {
                    return bad("constants: algorithm adaptive takes `beta_lo` and `beta_hi` and no `beta`".into());
                }
            }
        }
        if let EnvironmentConfig::Spec(spec) = &self.environment {
            spec.validate().map_err(|e| Error::Config(format!("environment.spec: {e}")))?;
        }
        if let EnvironmentConfig::Generate(g) = &self.environment {
            if g.d < 2 || g.k < 2 || !(g.beta > 0.0) {
                return bad("environment.generate: need d >= 2, K >= 2, beta > 0".into());
            }
        }
        let d = self.environment.dimension();
        self.mrc().validate(d).map_err(|e| Error::Config(format!("constants.mrc: {e}")))?;
        match self.algorithm {
            Algorithm::SingleIndex => {
                let b = self.bandit();
                if !(b.c_eps > 0.0 && b.c_eps <= 0.6) {
                    return bad("constants.c_eps: must lie in (0, 0.6]".into());
                }
            }
            Algorithm::SmoothBandit => {}
            Algorithm::Adaptive => {
                self.smoothness()
                    .validate()
                    .map_err(|e| Error::Config(format!("constants: {e}")))?;
            }
        }
        Ok(())
    }

    fn mrc(&self) -> MrcSearchConfig {
        let mut mrc = self.constants.mrc.clone().unwrap_or_default();
        if let Some(b) = self.constants.b_v {
            mrc.bound = b;
        }
        mrc
    }

    pub fn bandit(&self) -> BanditConfig {
        let c = &self.constants;
        let d = BanditConfig::default();
        BanditConfig {
            beta: c.beta.unwrap_or(d.beta),
            c_t: c.c_t,
            c_eps: c.c_eps.unwrap_or(d.c_eps),
            c_h: c.c_h.unwrap_or(d.c_h),
            min_epochs: c.min_epochs.unwrap_or(d.min_epochs),
            cross_fit: c.cross_fit.unwrap_or(d.cross_fit),
            clamp_predictions: d.clamp_predictions,
            direction: c.direction.unwrap_or(d.direction),
            mrc: self.mrc(),
        }
    }

    pub fn smooth_bandit(&self) -> SmoothBanditConfig {
        let c = &self.constants;
        let d = SmoothBanditConfig::default();
        SmoothBanditConfig {
            beta: c.beta.unwrap_or(d.beta),
            c_t: c.c_t,
            c_eps: c.c_eps.unwrap_or(d.c_eps),
            min_epochs: c.min_epochs.unwrap_or(d.min_epochs),
            c_conf: c.c_conf.unwrap_or(d.c_conf),
        }
    }

    pub fn smoothness(&self) -> SmoothnessConfig {
        let c = &self.constants;
        let d = SmoothnessConfig::default();
        SmoothnessConfig {
            beta_lo: c.beta_lo.unwrap_or(d.beta_lo),
            beta_hi: c.beta_hi.unwrap_or(d.beta_hi),
            c_gap: c.c_gap.unwrap_or(d.c_gap),
            c_l: c.c_l.unwrap_or(d.c_l),
            c_h: c.c_h.unwrap_or(d.c_h),
            direction: c.direction.unwrap_or(d.direction),
            mrc: self.mrc(),
        }
    }

    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            smoothness: self.smoothness(),
            bandit: self.bandit(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "seed": 7, "trials": 2, "horizon": 500,
        "environment": {"generate": {"d": 4, "K": 3, "beta": 1.5}},
        "algorithm": "single_index",
        "constants": {"beta": 1.5}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.checkpoint_stride, 100);
        assert_eq!(c.bandit().beta, 1.5);
        assert_eq!(c.bandit().mrc.bound, 2.0);
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = BASE.replace("\"horizon\"", "\"horizn\"");
        assert!(matches!(ExperimentConfig::from_json(&typo), Err(Error::Config(_))));
        let nested = BASE.replace("{\"beta\": 1.5}", "{\"beta\": 1.5, \"c_tt\": 1}");
        let err = ExperimentConfig::from_json(&nested).unwrap_err().to_string();
        assert!(err.contains("c_tt"), "{err}");
    }

    #[test]
    fn beta_must_match_algorithm() {
        let adaptive_with_beta = BASE.replace("single_index", "adaptive");
        assert!(ExperimentConfig::from_json(&adaptive_with_beta).is_err());
        let ok = adaptive_with_beta.replace("{\"beta\": 1.5}", "{\"beta_lo\": 0.9, \"beta_hi\": 1.9}");
        let c = ExperimentConfig::from_json(&ok).unwrap();
        assert_eq!(c.smoothness().beta_hi, 1.9);
        let both = BASE.replace("{\"beta\": 1.5}", "{\"beta\": 1.5, \"beta_lo\": 0.9}");
        assert!(ExperimentConfig::from_json(&both).is_err());
        let zero = BASE.replace("\"trials\": 2", "\"trials\": 0");
        assert!(ExperimentConfig::from_json(&zero).is_err());
    }

    #[test]
    fn b_v_sets_the_search_bound() {
        let text = BASE.replace("{\"beta\": 1.5}", "{\"beta\": 1.5, \"b_v\": 3.0}");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap().bandit().mrc.bound, 3.0);
        let bad = BASE.replace("{\"beta\": 1.5}", "{\"beta\": 1.5, \"b_v\": 0.5}");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn explicit_spec_environment() {
        let text = r#"{
            "seed": 1, "trials": 1, "horizon": 10, "algorithm": "smooth_bandit",
            "constants": {"beta": 1.0},
            "environment": {"spec": {
                "d": 2, "K": 2,
                "indices": [[1.0, 0.5], [1.0, -0.5]],
                "links": [{"family": "power_sgn", "beta": 1.0}, {"family": "power_sgn", "beta": 1.0, "scale": 0.5}],
                "noise": {"family": "gaussian", "variance": 0.1},
                "covariate_law": {"family": "truncated_gaussian_unit_ball"}
            }}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.environment.for_trial(0).unwrap().k, 2);
        let broken = text.replace("[1.0, -0.5]", "[0.5, -0.5]");
        assert!(matches!(ExperimentConfig::from_json(&broken), Err(Error::Config(_))));
    }
}
