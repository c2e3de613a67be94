//! Run configuration: one TOML document with a section per module.
//!
//! Every field has a default and unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! observations = "observations.csv"
//! model = "model.toml"
//!
//! [fit]
//! k_max = 8
//!
//! [sim]
//! r0 = 30.0
//! arrivals = { mode = "poisson" }
//!
//! [gates]
//! mu_0 = 0.9
//! kappa_0 = 0.05
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{HumanDriverSettings, SoftYieldParams};
use crate::eval::Gates;
use crate::mixture::{FitConfig, MomentEstimator, TruncationBox};
use crate::scenario::ObservationVector;
use crate::sim::SimConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every module seed is derived from it.
    pub seed: u64,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub fit: FitSection,
    pub condition: ConditionSection,
    pub sim: SimConfig,
    pub soft_yield: SoftYieldParams,
    pub human: HumanDriverSettings,
    pub evaluate: EvaluateSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gates: Option<Gates>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            fit: FitSection::default(),
            condition: ConditionSection::default(),
            sim: SimConfig::default(),
            soft_yield: SoftYieldParams::default(),
            human: HumanDriverSettings::default(),
            evaluate: EvaluateSection::default(),
            gates: None,
        }
    }
}

/// Input locations. Relative paths are looked up in the working directory
/// first and then in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub observations: PathBuf,
    pub model: PathBuf,
    /// Synthetic generator model; the built-in reference generator when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<PathBuf>,
    /// Trajectory CSV for the `ingest` command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_log: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            observations: "observations.csv".into(),
            model: "model.toml".into(),
            generator: None,
            trajectory_log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Synthetic sample size.
    pub n: usize,
    /// Resampling stride for trajectory logs, s.
    pub sample_stride: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { n: 5000, sample_stride: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub k_min: usize,
    pub k_max: usize,
    /// Relative BIC improvement below which more components are not worth it.
    pub rate_threshold: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub loglik_tolerance: f64,
    pub covariance_floor: f64,
    /// Fit a positive-orthant truncated mixture.
    pub truncated: bool,
    pub moments: MomentEstimator,
    pub moment_draws: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            k_min: 1,
            k_max: 15,
            rate_threshold: 0.10,
            restarts: f.restarts,
            max_iterations: f.max_iterations,
            loglik_tolerance: f.loglik_tolerance,
            covariance_floor: f.covariance_floor,
            truncated: true,
            moments: f.moments,
            moment_draws: f.moment_draws,
        }
    }
}

impl FitSection {
    pub fn k_range(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).collect()
    }

    pub fn fit_config(&self, d: usize, seed: u64) -> FitConfig {
        FitConfig {
            components: self.k_min,
            max_iterations: self.max_iterations,
            loglik_tolerance: self.loglik_tolerance,
            restarts: self.restarts,
            covariance_floor: self.covariance_floor,
            seed,
            truncation: self.truncated.then(|| TruncationBox::positive_orthant(d)),
            moments: self.moments,
            moment_draws: self.moment_draws,
        }
    }
}

/// Conditional density table request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionSection {
    /// Observed variable values by column name.
    pub observed: BTreeMap<String, f64>,
    /// Variable whose conditional density is tabulated.
    pub free: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for ConditionSection {
    fn default() -> Self {
        Self { observed: BTreeMap::new(), free: "v_p".into(), lo: 0.0, hi: 3.0, points: 301 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    #[default]
    SoftYield,
    Human,
    Cruise,
}

impl std::str::FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "soft_yield" | "soft-yield" => Ok(Self::SoftYield),
            "human" => Ok(Self::Human),
            "cruise" => Ok(Self::Cruise),
            other => Err(format!("unknown strategy {other:?} (expected soft_yield, human or cruise)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    /// Paired experiments N.
    pub experiments: usize,
    /// Strategy evaluated against the human baseline.
    pub av_strategy: StrategyChoice,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { experiments: 50, av_strategy: StrategyChoice::SoftYield }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.fit.k_min == 0 || self.fit.k_min > self.fit.k_max {
            return invalid(format!("fit: need 1 <= k_min <= k_max, got {}..{}", self.fit.k_min, self.fit.k_max));
        }
        if self.fit.restarts == 0 {
            return invalid("fit: restarts must be at least 1".into());
        }
        if self.evaluate.experiments == 0 {
            return invalid("evaluate: experiments must be at least 1".into());
        }
        if !(self.data.sample_stride >= 0.0) {
            return invalid(format!("data: sample_stride must be nonnegative, got {}", self.data.sample_stride));
        }
        for name in self.condition.observed.keys().chain(std::iter::once(&self.condition.free)) {
            if ObservationVector::dim_of(name).is_none() {
                return invalid(format!("condition: unknown variable {name:?}"));
            }
        }
        if self.condition.observed.contains_key(&self.condition.free) {
            return invalid(format!("condition: {:?} is both observed and free", self.condition.free));
        }
        if !(self.condition.lo < self.condition.hi) || self.condition.points < 2 {
            return invalid("condition: need lo < hi and at least 2 points".into());
        }
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let h = &self.human;
        if !(h.update_interval > 0.0 && h.max_acceleration > 0.0 && h.recovery_acceleration > 0.0) {
            return invalid("human: update_interval, max_acceleration and recovery_acceleration must be positive".into());
        }
        self.sim.check_update_interval(h.update_interval).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ArrivalMode;

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig { seed: 99, gates: Some(Gates { mu_0: 0.9, kappa_0: 0.1 }), ..RunConfig::default() };
        c.sim.arrivals = ArrivalMode::FixedCount { count: 2, window: Some(4.5) };
        c.condition.observed.insert("inv_R".into(), 0.05);
        c.paths.generator = Some("gen.toml".into());
        for cfg in [RunConfig::default(), c] {
            let text = cfg.to_toml_string();
            let back = RunConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml_string(), text);
        }
    }

    #[test]
    fn unknown_keys_fail_loudly() {
        assert!(RunConfig::from_toml_str("sed = 3").is_err());
        assert!(RunConfig::from_toml_str("[sim]\nr_0 = 30.0").is_err());
        assert!(RunConfig::from_toml_str("[gates]\nmu_0 = 1.0").is_err());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_toml_str(
            "seed = 5\n[sim]\narrivals = { mode = \"poisson\" }\nlambda = 0.1\n[evaluate]\nav_strategy = \"human\"\n[condition]\nobserved = { inv_R = 0.05, v = 4.0 }\n",
        )
        .unwrap();
        assert_eq!(c.sim.arrivals, ArrivalMode::Poisson);
        assert_eq!(c.evaluate.av_strategy, StrategyChoice::Human);
        assert_eq!(c.condition.observed.len(), 2);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml_str("[fit]\nk_min = 4\nk_max = 2").is_err());
        assert!(RunConfig::from_toml_str("[condition]\nfree = \"speed\"").is_err());
        assert!(RunConfig::from_toml_str("[sim]\ndt = 0.5").is_err());
    }
}
