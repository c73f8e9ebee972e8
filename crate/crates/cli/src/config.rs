//! Defaults file. Every section is optional; flags override individual fields.

use std::path::{Path, PathBuf};

use anyhow::Context;
use liveeval::filters::{FilterConfig, JudgeEndpoint};
use liveeval::{FitConfig, PlannerConfig, WorldConfig};
use serde::{Deserialize, Serialize};

pub const DEFAULT_STORE_PATH: &str = "liveeval-store.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store_path: Option<PathBuf>,
    pub fit: FitConfig,
    pub planner: PlannerConfig,
    pub filters: FiltersSection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiltersSection {
    #[serde(flatten)]
    pub run: FilterConfig,
    pub judge: JudgeEndpoint,
}

/// World parameters, the number of seeds and the first seed. Randomness is
/// never seeded from the clock, so `seed` has no default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub num_models: Option<usize>,
    pub num_domains: Option<usize>,
    pub samples_per_domain: Option<usize>,
    pub theta_mean: Option<f64>,
    pub theta_sd: Option<f64>,
    pub beta_mean: Option<f64>,
    pub beta_sd: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
}

impl SimSection {
    pub fn world(&self) -> WorldConfig {
        let d = WorldConfig::default();
        WorldConfig {
            num_models: self.num_models.unwrap_or(d.num_models),
            num_domains: self.num_domains.unwrap_or(d.num_domains),
            samples_per_domain: self.samples_per_domain.unwrap_or(d.samples_per_domain),
            theta_mean: self.theta_mean.unwrap_or(d.theta_mean),
            theta_sd: self.theta_sd.unwrap_or(d.theta_sd),
            beta_mean: self.beta_mean.unwrap_or(d.beta_mean),
            beta_sd: self.beta_sd.unwrap_or(d.beta_sd),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| crate::UsageError(format!("config {}: {e}", path.display())))?;
        config.fit.validate()?;
        config.filters.run.validate()?;
        config.sim.world().validate()?;
        Ok(config)
    }

    pub fn store_path(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.store_path.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE_PATH))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let config: Config = toml::from_str(
            "store_path = \"s.json\"\n[planner]\nbudget = 3\n[sim]\nseed = 9\nnum_models = 5\n[filters]\nrepeats = 7\n[filters.judge]\nmodel = \"m\"\n",
        )
        .unwrap();
        assert_eq!(config.planner.budget, 3);
        assert_eq!(config.planner.similarity_epsilon, 0.005);
        assert_eq!(config.sim.seed, Some(9));
        assert_eq!(config.sim.world().num_models, 5);
        assert_eq!(config.sim.world().num_domains, 10);
        assert_eq!(config.filters.run.repeats, 7);
        assert_eq!(config.filters.run.retries, 3);
        assert_eq!(config.filters.judge.model, "m");
        assert_eq!(config.filters.judge.token_env, "LIVEEVAL_JUDGE_TOKEN");
        assert_eq!(config.fit, FitConfig::default());
    }

    #[test]
    fn unknown_top_level_key_rejected() {
        assert!(toml::from_str::<Config>("bogus = 1").is_err());
    }
}
